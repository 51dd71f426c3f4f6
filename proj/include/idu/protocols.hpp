#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idu/metrics.hpp"

namespace idu::eval {

/// Quantile by linear interpolation at q*(n-1) over the sorted values
/// (the convention is recorded in the summary output).
double quantile(const std::vector<double>& sorted_values, double q);

struct BoxStats {
    double mean = 0, median = 0, q1 = 0, q3 = 0, iqr = 0;
    double whisker_low = 0, whisker_high = 0;  // extreme non-outlier values (1.5 IQR rule)
    double stddev = 0;
    std::vector<double> outliers;
    std::vector<double> values;
};

BoxStats box_stats(std::vector<double> values);

struct StabilitySummary {
    std::map<std::string, BoxStats> per_metric;
    std::vector<EvalReport> run_reports;     // completed runs
    std::vector<std::string> failed_runs;    // "run 3: <error>"
    int requested_runs = 0;

    nlohmann::json to_json() const;
    void save(const std::string& path) const;
    void write_csv(const std::string& path, const std::string& config_digest) const;
};

/// Runs R full train+eval cycles via `runner` with seeds base_seed..+R-1
/// (or base_seed repeated when same_seed). Failed runs are recorded and the
/// statistics cover completed runs only.
StabilitySummary stability_run(int runs, uint64_t base_seed,
                               const std::function<EvalReport(uint64_t seed)>& runner,
                               bool same_seed = false);

/// Extracts the box-tracked metrics from a report.
std::map<std::string, double> tracked_metrics(const EvalReport& report);

/// Recomputes the summary from saved per-run reports (consistency check).
StabilitySummary summarize_reports(const std::vector<EvalReport>& reports, int requested_runs);

struct LinearFit {
    double slope = 0, intercept = 0, r2 = 0;
};

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct ScaleRow {
    double fraction = 0;
    long n_samples = 0;
    double macro_accuracy = 0;
    double micro_accuracy = 0;
    double train_s = 0;
    double detection_time_s = 0;
    double latency_per_batch_s = 0;
    double per_record_latency_s = 0;
    long peak_rss_bytes = 0;
    double rss_percent_of_total = 0;
};

struct ScaleResult {
    std::vector<ScaleRow> rows;
    LinearFit time_fit;  // train seconds vs sample count

    nlohmann::json to_json() const;
    void save(const std::string& path) const;
    void write_csv(const std::string& path, const std::string& config_digest) const;
};

/// Per fraction: the runner trains on a stratified subsample and reports the
/// row; afterwards train time is fitted against sample count.
ScaleResult scalability_run(const std::vector<double>& fractions,
                            const std::function<ScaleRow(double fraction)>& runner);

/// Peak resident set size sampled at 100 ms from /proc (Linux).
class RssSampler {
public:
    RssSampler();
    ~RssSampler();
    void start();
    long stop();  // peak bytes observed since start()
    static long current_rss_bytes();
    static long total_system_bytes();

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace idu::eval
