#include "idu/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <unistd.h>

namespace idu::eval {

double quantile(const std::vector<double>& sorted_values, double q) {
    if (sorted_values.empty()) throw UsageError("quantile: empty sample");
    if (q < 0.0 || q > 1.0) throw UsageError("quantile: q outside [0,1]");
    const double pos = q * static_cast<double>(sorted_values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    if (lo + 1 >= sorted_values.size()) return sorted_values.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw UsageError("box_stats: empty sample");
    BoxStats b;
    b.values = values;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0;
    for (double v : sorted) sum += v;
    b.mean = sum / static_cast<double>(sorted.size());
    double sq = 0;
    for (double v : sorted) sq += (v - b.mean) * (v - b.mean);
    b.stddev = std::sqrt(sq / static_cast<double>(sorted.size()));
    b.median = quantile(sorted, 0.5);
    b.q1 = quantile(sorted, 0.25);
    b.q3 = quantile(sorted, 0.75);
    b.iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * b.iqr;
    const double hi_fence = b.q3 + 1.5 * b.iqr;
    b.whisker_low = b.q3;
    b.whisker_high = b.q1;
    bool any = false;
    for (double v : sorted) {
        if (v < lo_fence || v > hi_fence) {
            b.outliers.push_back(v);
        } else {
            if (!any) {
                b.whisker_low = v;
                b.whisker_high = v;
                any = true;
            } else {
                b.whisker_low = std::min(b.whisker_low, v);
                b.whisker_high = std::max(b.whisker_high, v);
            }
        }
    }
    return b;
}

std::map<std::string, double> tracked_metrics(const EvalReport& r) {
    return {{"macro_accuracy", r.macro.accuracy}, {"micro_accuracy", r.micro_accuracy},
            {"macro_precision", r.macro.precision}, {"macro_recall", r.macro.recall},
            {"macro_f1", r.macro.f1},             {"macro_far", r.macro.far},
            {"macro_fnr", r.macro.fnr}};
}

StabilitySummary summarize_reports(const std::vector<EvalReport>& reports, int requested_runs) {
    StabilitySummary s;
    s.requested_runs = requested_runs;
    s.run_reports = reports;
    if (reports.empty()) return s;
    std::map<std::string, std::vector<double>> series;
    for (const auto& r : reports)
        for (const auto& [name, value] : tracked_metrics(r)) series[name].push_back(value);
    for (auto& [name, values] : series) s.per_metric[name] = box_stats(std::move(values));
    return s;
}

StabilitySummary stability_run(int runs, uint64_t base_seed,
                               const std::function<EvalReport(uint64_t seed)>& runner, bool same_seed) {
    if (runs < 2) throw ConfigError("stability: need at least 2 runs");
    std::vector<EvalReport> reports;
    std::vector<std::string> failures;
    for (int r = 0; r < runs; ++r) {
        const uint64_t seed = same_seed ? base_seed : base_seed + static_cast<uint64_t>(r);
        try {
            reports.push_back(runner(seed));
        } catch (const Error& e) {
            failures.push_back("run " + std::to_string(r) + " (seed " + std::to_string(seed) +
                               "): " + e.what());
        }
    }
    StabilitySummary s = summarize_reports(reports, runs);
    s.failed_runs = std::move(failures);
    return s;
}

nlohmann::json StabilitySummary::to_json() const {
    nlohmann::json metrics_json = nlohmann::json::object();
    for (const auto& [name, b] : per_metric) {
        metrics_json[name] = {{"mean", b.mean},
                              {"median", b.median},
                              {"q1", b.q1},
                              {"q3", b.q3},
                              {"iqr", b.iqr},
                              {"whisker_low", b.whisker_low},
                              {"whisker_high", b.whisker_high},
                              {"stddev", b.stddev},
                              {"outliers", b.outliers},
                              {"values", b.values}};
    }
    return {{"schema_version", 1},
            {"quartile_convention", "linear interpolation at q*(n-1)"},
            {"whisker_rule", "1.5*IQR"},
            {"requested_runs", requested_runs},
            {"completed_runs", run_reports.size()},
            {"failed_runs", failed_runs},
            {"metrics", metrics_json}};
}

void StabilitySummary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write stability summary: " + path);
    out << to_json().dump(2) << "\n";
}

void StabilitySummary::write_csv(const std::string& path, const std::string& config_digest) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write stability csv: " + path);
    out << "# config=" << config_digest << "\n";
    out << "run,seed";
    std::vector<std::string> names;
    if (!run_reports.empty())
        for (const auto& [name, v] : tracked_metrics(run_reports.front())) {
            names.push_back(name);
            out << "," << name;
        }
    out << "\n";
    for (size_t r = 0; r < run_reports.size(); ++r) {
        out << r << "," << run_reports[r].seed;
        const auto m = tracked_metrics(run_reports[r]);
        for (const auto& name : names) out << "," << m.at(name);
        out << "\n";
    }
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw UsageError("linear_fit: need >= 2 points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    LinearFit fit;
    if (denom == 0.0) throw UsageError("linear_fit: degenerate x values");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double pred = fit.slope * xs[i] + fit.intercept;
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

ScaleResult scalability_run(const std::vector<double>& fractions,
                            const std::function<ScaleRow(double fraction)>& runner) {
    if (fractions.empty()) throw ConfigError("scale: no fractions");
    for (size_t i = 0; i < fractions.size(); ++i) {
        if (fractions[i] <= 0.0 || fractions[i] > 1.0)
            throw ConfigError("scale: fractions must lie in (0,1]");
        if (i > 0 && fractions[i] <= fractions[i - 1])
            throw ConfigError("scale: fractions must be strictly ascending");
    }
    ScaleResult result;
    for (double f : fractions) result.rows.push_back(runner(f));
    if (result.rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& row : result.rows) {
            xs.push_back(static_cast<double>(row.n_samples));
            ys.push_back(row.train_s);
        }
        result.time_fit = linear_fit(xs, ys);
    } else {
        result.time_fit = {0, result.rows.front().train_s, 1.0};
    }
    return result;
}

nlohmann::json ScaleResult::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"fraction", r.fraction},
                             {"n_samples", r.n_samples},
                             {"macro_accuracy", r.macro_accuracy},
                             {"micro_accuracy", r.micro_accuracy},
                             {"train_s", r.train_s},
                             {"detection_time_s", r.detection_time_s},
                             {"latency_per_batch_s", r.latency_per_batch_s},
                             {"per_record_latency_s", r.per_record_latency_s},
                             {"peak_rss_bytes", r.peak_rss_bytes},
                             {"rss_percent_of_total", r.rss_percent_of_total}});
    return {{"schema_version", 1},
            {"rows", rows_json},
            {"time_fit",
             {{"slope_s_per_sample", time_fit.slope}, {"intercept_s", time_fit.intercept}, {"r2", time_fit.r2}}},
            {"latency_note", "latency_per_batch_s is mean per-batch inference time; "
                             "detection_time_s is the full test-pass wall clock"}};
}

void ScaleResult::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scale result: " + path);
    out << to_json().dump(2) << "\n";
}

void ScaleResult::write_csv(const std::string& path, const std::string& config_digest) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scale csv: " + path);
    out << "# config=" << config_digest << "\n";
    out << "fraction,n_samples,macro_accuracy,micro_accuracy,train_s,detection_time_s,"
           "latency_per_batch_s,per_record_latency_s,peak_rss_bytes,rss_percent_of_total\n";
    for (const auto& r : rows)
        out << r.fraction << "," << r.n_samples << "," << r.macro_accuracy << "," << r.micro_accuracy
            << "," << r.train_s << "," << r.detection_time_s << "," << r.latency_per_batch_s << ","
            << r.per_record_latency_s << "," << r.peak_rss_bytes << "," << r.rss_percent_of_total << "\n";
}

// ---- RSS sampling ----------------------------------------------------------

struct RssSampler::Impl {
    std::thread worker;
    std::atomic<bool> running{false};
    std::atomic<long> peak{0};
};

RssSampler::RssSampler() : impl_(new Impl) {}

RssSampler::~RssSampler() {
    if (impl_->running.load()) stop();
    delete impl_;
}

long RssSampler::current_rss_bytes() {
    std::ifstream statm("/proc/self/statm");
    if (!statm) return 0;
    long pages_total = 0, pages_resident = 0;
    statm >> pages_total >> pages_resident;
    return pages_resident * static_cast<long>(sysconf(_SC_PAGESIZE));
}

long RssSampler::total_system_bytes() {
    std::ifstream meminfo("/proc/meminfo");
    std::string key;
    long kb = 0;
    while (meminfo >> key >> kb) {
        if (key == "MemTotal:") return kb * 1024L;
        meminfo.ignore(256, '\n');
    }
    return 0;
}

void RssSampler::start() {
    impl_->peak.store(current_rss_bytes());
    impl_->running.store(true);
    impl_->worker = std::thread([impl = impl_] {
        while (impl->running.load(std::memory_order_relaxed)) {
            const long now = current_rss_bytes();
            long prev = impl->peak.load(std::memory_order_relaxed);
            while (now > prev && !impl->peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
    });
}

long RssSampler::stop() {
    impl_->running.store(false);
    if (impl_->worker.joinable()) impl_->worker.join();
    long final_peak = impl_->peak.load();
    final_peak = std::max(final_peak, current_rss_bytes());
    return final_peak;
}

}  // namespace idu::eval
