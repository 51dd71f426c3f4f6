#pragma once

#include <string>
#include <vector>

#include "idu/model.hpp"

namespace idu::model {

class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

class MagicMismatchError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class VersionMismatchError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class TensorShapeError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class TruncatedError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

/// Train/serve skew guard: a dataset or manifest digest differs from the one
/// recorded in the checkpoint.
class DigestMismatchError : public DataError {
public:
    using DataError::DataError;
};

struct CheckpointMeta {
    ModelConfig config;
    std::vector<std::string> class_names;
    std::string feature_digest;   // digest of the selected-feature manifest
    std::string encoder_digest;
    std::string config_digest;    // resolved run configuration
    std::string task = "class";
};

/// File format: magic "IDUD", u32 version=1, u32 metadata length + JSON, then
/// named tensors (u16 name length, name bytes, u8 rank, u32 dims each,
/// little-endian f32 payload). save -> load -> save is byte-identical.
void save_checkpoint(const std::string& path, ModelParams& params, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    ModelParams params;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace idu::model
