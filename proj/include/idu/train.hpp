#pragma once

#include <ostream>

#include "idu/encode.hpp"
#include "idu/model.hpp"

namespace idu::model {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 256;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double clip_norm = 5.0;  // global gradient norm; <= 0 disables
    uint64_t seed = 0;
    bool deterministic = true;

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 2) throw ConfigError("train: batch size must be >= 2 (batchnorm)");
        if (lr < 0.0) throw ConfigError("train: negative learning rate");
    }
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double wall_s = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    long steps = 0;
    long dropped_rows = 0;  // trailing single-row batches, incompatible with batchnorm
};

/// Mini-batch gradient descent with adaptive moment estimates (bias-corrected)
/// and global-norm gradient clipping. A non-finite activation aborts the run;
/// the parameters are rolled back to the last completed epoch before the
/// NumericError is rethrown.
TrainResult train(ModelParams& params, const prep::EncodedDataset& data, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

void write_history_csv(const std::string& path, const TrainResult& result,
                       const std::string& config_digest);

}  // namespace idu::model
