#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "idu/checkpoint.hpp"
#include "idu/encode.hpp"

namespace idu::eval {

/// C x C integer counts; rows are true classes, columns predictions.
struct ConfusionMatrix {
    int C = 0;
    std::vector<long> counts;

    explicit ConfusionMatrix(int classes = 0) : C(classes), counts(static_cast<size_t>(classes) * classes, 0) {}

    long& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * C + pred]; }
    long at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * C + pred]; }
    void add(int truth, int pred) { ++at(truth, pred); }

    long total() const {
        long t = 0;
        for (long v : counts) t += v;
        return t;
    }
    long trace() const {
        long t = 0;
        for (int i = 0; i < C; ++i) t += at(i, i);
        return t;
    }
};

/// One-vs-rest metrics for a single class. Any 0/0 ratio resolves to 0 and
/// the metric name is recorded in zero_flagged.
struct ClassMetrics {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0, precision = 0, recall = 0, dr = 0, far = 0, fnr = 0, f1 = 0;
    std::vector<std::string> zero_flagged;
};

ClassMetrics metrics(const ConfusionMatrix& cm, int positive_class);

struct Aggregates {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0, far = 0, fnr = 0;
};

struct EvalReport {
    std::vector<std::string> class_names;
    ConfusionMatrix cm;
    std::vector<ClassMetrics> per_class;
    Aggregates macro;          // unweighted mean over classes
    double micro_accuracy = 0; // trace / total
    double train_time_s = 0;
    double detection_time_s = 0;     // full test-pass wall clock
    double latency_per_batch_s = 0;  // mean per-batch inference time
    double per_record_latency_s = 0;
    uint64_t seed = 0;
    std::string config_digest;
    std::string task = "class";
    std::string dataset_source;
    std::vector<std::pair<int, int>> predictions;  // (true, predicted) per row

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static EvalReport load(const std::string& path);
    void write_predictions_csv(const std::string& path) const;
};

/// Builds the report from per-row predictions.
EvalReport report_from_predictions(const std::vector<std::pair<int, int>>& predictions,
                                   const std::vector<std::string>& class_names);

/// Batched argmax inference over the test set. The test set's feature digest
/// must match the checkpoint's (train/serve skew guard).
EvalReport evaluate_model(model::ModelParams& params, const model::CheckpointMeta& meta,
                          const prep::EncodedDataset& test, int batch_size = 256);

}  // namespace idu::eval
