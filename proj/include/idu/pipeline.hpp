#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idu/checkpoint.hpp"
#include "idu/forest.hpp"
#include "idu/metrics.hpp"
#include "idu/protocols.hpp"
#include "idu/train.hpp"
#include "idu/ueba.hpp"

namespace idu::pipe {

/// Fully resolved run configuration. Every field has a materialized value;
/// the flat dump (and its digest) is embedded in every artifact produced.
struct Options {
    // dataset stage
    std::string data_path;
    std::string schema_name = "kdd99";
    std::string task = "class";  // class | role
    std::string map_file;
    bool join_ueba = false;
    int ueba_users = 200;
    int ueba_sessions = 10;
    double ueba_malicious = 0.1;
    long join_total = 20000;
    double join_benign_malicious = 0.5;
    bool join_recycle = true;
    double split_ratio = 0.8;
    double resample_floor = 0.05;
    // feature selection
    int trees = 100;
    int max_depth = 12;
    int min_leaf = 5;
    int mtry = 0;
    int top_k = 32;
    // model
    std::vector<int> widths = {512, 512, 256, 128, 64, 32, 16};
    int dk = 16;
    int group = 1;
    double dropout = 0.2;
    // training
    int epochs = 30;
    int batch = 256;
    double lr = 1e-3;
    double clip = 5.0;
    // protocol knobs
    int runs = 10;
    bool same_seed = false;
    std::vector<double> fractions = {0.10, 0.25, 0.50, 0.75, 1.00};
    // shared
    uint64_t seed = 0;
    bool deterministic = true;
    std::string out_dir = "out";

    std::map<std::string, std::string> flat() const;
    std::string dump() const;    // sorted key=value lines
    std::string digest() const;  // over dump()
};

struct BuiltDataset {
    prep::EncodedDataset train;
    prep::EncodedDataset test;
    prep::EncoderSpec encoder;
    ingest::RejectReport rejects;
    std::vector<std::string> warnings;
    long dropped_excluded_rows = 0;  // role task rows whose role maps to Excluded
};

/// ingest -> (optional ueba join, via the CSV interface) -> split -> encode
/// -> resample. When `csv_out` is non-empty the synergistic CSV lands there.
BuiltDataset build_dataset(const Options& opt, uint64_t seed, const std::string& csv_out = "");

forest::FeatureManifest select_features(const Options& opt, const prep::EncodedDataset& train,
                                        uint64_t seed);

struct Trained {
    model::ModelParams params;
    model::TrainResult history;
    model::CheckpointMeta meta;
    double train_wall_s = 0;
};

Trained train_model(const Options& opt, const prep::EncodedDataset& train_projected, uint64_t seed,
                    std::ostream* log = nullptr);

/// Full in-memory cycle (build, select, project, train, evaluate) used by the
/// stability and scalability protocols.
eval::EvalReport run_once(const Options& opt, uint64_t seed, std::ostream* log = nullptr);

/// Scalability row: stratified subsample of the (already resampled) training
/// set, full train+eval at this fraction, memory sampled at 100 ms.
eval::ScaleRow run_fraction(const Options& opt, const BuiltDataset& built,
                            const forest::FeatureManifest& manifest, double fraction,
                            std::ostream* log = nullptr);

/// Artifact manifest: file digests plus the producing command's config digest.
struct Manifest {
    struct Entry {
        std::string file;
        std::string digest;
        std::string config_digest;
        std::string command;
    };
    std::vector<Entry> entries;

    void add(const std::string& dir, const std::string& file, const std::string& config_digest,
             const std::string& command);
    void save(const std::string& dir) const;
    static Manifest load_or_empty(const std::string& dir);
};

/// Re-derives every digest in the manifest; returns human-readable failures.
std::vector<std::string> verify_out_dir(const std::string& dir);

}  // namespace idu::pipe
