#include "idu/metrics.hpp"

#include <chrono>
#include <fstream>

namespace idu::eval {

namespace {

double ratio_or_zero(long num, long den, const char* name, std::vector<std::string>& flags) {
    if (den == 0) {
        flags.push_back(name);
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

ClassMetrics metrics(const ConfusionMatrix& cm, int positive_class) {
    if (cm.total() <= 0) throw UsageError("metrics: empty confusion matrix");
    if (positive_class < 0 || positive_class >= cm.C) throw UsageError("metrics: class out of range");
    ClassMetrics m;
    const int k = positive_class;
    m.tp = cm.at(k, k);
    for (int p = 0; p < cm.C; ++p)
        if (p != k) m.fn += cm.at(k, p);
    for (int t = 0; t < cm.C; ++t)
        if (t != k) m.fp += cm.at(t, k);
    m.tn = cm.total() - m.tp - m.fn - m.fp;

    m.precision = ratio_or_zero(m.tp, m.tp + m.fp, "precision", m.zero_flagged);
    m.recall = ratio_or_zero(m.tp, m.tp + m.fn, "recall", m.zero_flagged);
    m.dr = m.recall;
    m.far = ratio_or_zero(m.fp, m.fp + m.tn, "far", m.zero_flagged);
    m.fnr = ratio_or_zero(m.fn, m.fn + m.tp, "fnr", m.zero_flagged);
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(cm.total());
    const double pr = m.precision + m.recall;
    m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    if (pr == 0.0) m.zero_flagged.push_back("f1");
    return m;
}

EvalReport report_from_predictions(const std::vector<std::pair<int, int>>& predictions,
                                   const std::vector<std::string>& class_names) {
    const int C = static_cast<int>(class_names.size());
    EvalReport report;
    report.class_names = class_names;
    report.cm = ConfusionMatrix(C);
    for (const auto& [truth, pred] : predictions) {
        if (truth < 0 || truth >= C || pred < 0 || pred >= C)
            throw UsageError("report: prediction outside class range");
        report.cm.add(truth, pred);
    }
    report.predictions = predictions;
    for (int c = 0; c < C; ++c) report.per_class.push_back(metrics(report.cm, c));
    for (const auto& m : report.per_class) {
        report.macro.accuracy += m.accuracy;
        report.macro.precision += m.precision;
        report.macro.recall += m.recall;
        report.macro.f1 += m.f1;
        report.macro.far += m.far;
        report.macro.fnr += m.fnr;
    }
    report.macro.accuracy /= C;
    report.macro.precision /= C;
    report.macro.recall /= C;
    report.macro.f1 /= C;
    report.macro.far /= C;
    report.macro.fnr /= C;
    report.micro_accuracy = static_cast<double>(report.cm.trace()) / static_cast<double>(report.cm.total());
    return report;
}

EvalReport evaluate_model(model::ModelParams& params, const model::CheckpointMeta& meta,
                          const prep::EncodedDataset& test, int batch_size) {
    if (batch_size < 1) throw ConfigError("evaluate: batch size must be >= 1");
    if (test.rows() == 0) throw DataError("evaluate: empty test set");
    if (!meta.feature_digest.empty() && test.provenance.feature_digest != meta.feature_digest)
        throw model::DigestMismatchError(
            "evaluate: test set feature digest " + test.provenance.feature_digest +
            " does not match checkpoint feature digest " + meta.feature_digest);
    if (test.class_names != meta.class_names)
        throw model::DigestMismatchError("evaluate: class names differ from checkpoint");
    if (test.width() != params.config.input_dim)
        throw ShapeError("evaluate: test width does not match model input");

    const long N = test.rows();
    const int d = test.width();
    const int C = test.n_classes();
    std::vector<std::pair<int, int>> predictions;
    predictions.reserve(N);

    const double t0 = wall_seconds();
    long batches = 0;
    for (long start = 0; start < N; start += batch_size) {
        const long stop = std::min(N, start + batch_size);
        const int B = static_cast<int>(stop - start);
        core::Tensor X({B, d});
        std::copy_n(test.X.data.data() + static_cast<size_t>(start) * d, static_cast<size_t>(B) * d,
                    X.data.data());
        const auto probs = model::forward_infer(params, X);
        for (int r = 0; r < B; ++r) {
            int argmax = 0;
            for (int c = 1; c < C; ++c)
                if (probs.at(r, c) > probs.at(r, argmax)) argmax = c;
            predictions.emplace_back(test.labels[start + r], argmax);
        }
        ++batches;
    }
    const double elapsed = wall_seconds() - t0;

    EvalReport report = report_from_predictions(predictions, test.class_names);
    report.detection_time_s = elapsed;
    report.latency_per_batch_s = batches ? elapsed / static_cast<double>(batches) : 0.0;
    report.per_record_latency_s = elapsed / static_cast<double>(N);
    report.task = test.provenance.task;
    report.dataset_source = test.provenance.source_path;
    report.seed = test.provenance.seed;
    report.config_digest = meta.config_digest;
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json per_class_json = nlohmann::json::object();
    for (size_t c = 0; c < per_class.size(); ++c) {
        const auto& m = per_class[c];
        per_class_json[class_names[c]] = {
            {"tp", m.tp},           {"fp", m.fp},
            {"fn", m.fn},           {"tn", m.tn},
            {"accuracy", m.accuracy}, {"precision", m.precision},
            {"recall", m.recall},   {"dr", m.dr},
            {"far", m.far},         {"fnr", m.fnr},
            {"f1", m.f1},           {"zero_flagged", m.zero_flagged}};
    }
    std::vector<std::vector<long>> cm_rows;
    for (int t = 0; t < cm.C; ++t) {
        std::vector<long> row;
        for (int p = 0; p < cm.C; ++p) row.push_back(cm.at(t, p));
        cm_rows.push_back(row);
    }
    return {{"schema_version", 1},
            {"task", task},
            {"classes", class_names},
            {"confusion", cm_rows},
            {"per_class", per_class_json},
            {"macro",
             {{"accuracy", macro.accuracy},
              {"precision", macro.precision},
              {"recall", macro.recall},
              {"f1", macro.f1},
              {"far", macro.far},
              {"fnr", macro.fnr}}},
            {"micro_accuracy", micro_accuracy},
            {"train_time_s", train_time_s},
            {"detection_time_s", detection_time_s},
            {"latency_per_batch_s", latency_per_batch_s},
            {"per_record_latency_s", per_record_latency_s},
            {"seed", seed},
            {"config_digest", config_digest},
            {"dataset_source", dataset_source}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    const auto cm_rows = j.at("confusion").get<std::vector<std::vector<long>>>();
    r.cm = ConfusionMatrix(static_cast<int>(r.class_names.size()));
    for (int t = 0; t < r.cm.C; ++t)
        for (int p = 0; p < r.cm.C; ++p) r.cm.at(t, p) = cm_rows.at(t).at(p);
    for (int c = 0; c < r.cm.C; ++c) r.per_class.push_back(metrics(r.cm, c));
    const auto& mj = j.at("macro");
    r.macro = {mj.at("accuracy"), mj.at("precision"), mj.at("recall"),
               mj.at("f1"),       mj.at("far"),       mj.at("fnr")};
    r.micro_accuracy = j.at("micro_accuracy");
    r.train_time_s = j.value("train_time_s", 0.0);
    r.detection_time_s = j.value("detection_time_s", 0.0);
    r.latency_per_batch_s = j.value("latency_per_batch_s", 0.0);
    r.per_record_latency_s = j.value("per_record_latency_s", 0.0);
    r.seed = j.value("seed", uint64_t{0});
    r.config_digest = j.value("config_digest", "");
    r.task = j.value("task", "class");
    r.dataset_source = j.value("dataset_source", "");
    return r;
}

void EvalReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out << to_json().dump(2) << "\n";
}

EvalReport EvalReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

void EvalReport::write_predictions_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write predictions: " + path);
    out << "# config=" << config_digest << "\n";
    out << "row,true,predicted\n";
    for (size_t i = 0; i < predictions.size(); ++i)
        out << i << "," << class_names[predictions[i].first] << "," << class_names[predictions[i].second]
            << "\n";
}

}  // namespace idu::eval
