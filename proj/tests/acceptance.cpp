// Acceptance suite: one criterion per function, one PASS/FAIL/SKIP line each.
//
//   idu_acceptance              runs everything
//   idu_acceptance --criterion N  runs one (exit 0 pass, 1 fail, 77 skip)
//
// Criteria 5, 6, 7 and 11 train on the public NSL-KDD KDDTrain+_20Percent
// file, which cannot be redistributed here. Provide it via the IDU_NSLKDD
// environment variable or at data/KDDTrain+_20Percent.txt; without it those
// criteria report SKIP.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "fixture.hpp"
#include "idu/checkpoint.hpp"
#include "idu/pipeline.hpp"
#include "test_util.hpp"

using namespace idu;

namespace {

namespace fs = std::filesystem;

constexpr int kSkipExit = 77;

struct Outcome {
    enum Kind { pass, fail, skip } kind = fail;
    std::string detail;
};

Outcome ok(std::string detail = "") { return {Outcome::pass, std::move(detail)}; }
Outcome bad(std::string detail) { return {Outcome::fail, std::move(detail)}; }
Outcome skipped(std::string detail) { return {Outcome::skip, std::move(detail)}; }

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string nslkdd_path() {
    if (const char* env = std::getenv("IDU_NSLKDD"); env && *env) return env;
#ifdef IDU_SOURCE_DIR
    return std::string(IDU_SOURCE_DIR) + "/data/KDDTrain+_20Percent.txt";
#else
    return "data/KDDTrain+_20Percent.txt";
#endif
}

bool nslkdd_available(std::string& path, std::string& why) {
    path = nslkdd_path();
    if (!fs::exists(path)) {
        why = "NSL-KDD file not found at " + path +
              " (set IDU_NSLKDD or place KDDTrain+_20Percent.txt under data/)";
        return false;
    }
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    const auto cells = ingest::split_csv_line(line, false);
    if (cells.size() != 43) {
        why = path + " does not look like NSL-KDD (expected 43 cells per row, got " +
              std::to_string(cells.size()) + ")";
        return false;
    }
    return true;
}

// Criterion 5's pinned configuration (seed varies for criteria 6/7).
pipe::Options desk_scale_options(const std::string& data_path, uint64_t seed) {
    pipe::Options opt;
    opt.data_path = data_path;
    opt.schema_name = "nslkdd";
    opt.task = "class";
    opt.split_ratio = 0.8;
    opt.resample_floor = 0.05;
    opt.trees = 100;
    opt.max_depth = 12;
    opt.min_leaf = 5;
    opt.mtry = 0;
    opt.top_k = 32;
    opt.widths = {64, 64, 32};
    opt.dk = 16;
    opt.group = 1;
    opt.dropout = 0.2;
    opt.epochs = 15;
    opt.batch = 256;
    opt.lr = 1e-3;
    opt.clip = 5.0;
    opt.seed = seed;
    return opt;
}

// ---------------------------------------------------------------------------
// 1. Gradient audit on the reduced config, full parameter sweep in double.
// ---------------------------------------------------------------------------
Outcome criterion_1() {
    const double t0 = now_s();
    using DGraph = core::GraphT<double>;
    using DTensor = core::TensorT<double>;

    model::ModelConfig cfg;
    cfg.input_dim = 8;
    cfg.widths = {8, 6};
    cfg.attn_dim = 4;
    cfg.group = 1;
    cfg.dropout = 0.2;
    cfg.n_classes = 3;
    cfg.seed = 42;
    auto params = model::ModelParamsT<double>::init(cfg);

    const int B = 4;
    Rng data_rng(42);
    DTensor X({B, cfg.input_dim});
    for (auto& v : X.data) v = data_rng.gauss();
    DTensor Y(DTensor::zeros({B, cfg.n_classes}));
    for (int r = 0; r < B; ++r) Y.at(r, static_cast<int>(data_rng.uniform_u64(cfg.n_classes))) = 1.0;

    // dropout rng reseeded per forward pass: masks are identical across
    // evaluations, so the loss is a fixed differentiable function
    auto loss_of = [&](model::ModelParamsT<double>& p, model::ForwardHandles<double>* handles_out,
                       DGraph* graph_out) {
        DGraph local;
        DGraph& g = graph_out ? *graph_out : local;
        Rng drop_rng(4242);
        auto handles = model::build_forward(g, p, X, core::Mode::train, &drop_rng);
        auto loss_id = g.cross_entropy(handles.probs, Y);
        if (handles_out) *handles_out = handles;
        if (graph_out) g.backward(loss_id);
        return g.val(loss_id).data[0];
    };

    DGraph g;
    model::ForwardHandles<double> handles;
    (void)loss_of(params, &handles, &g);

    long checked = 0, worst_idx = -1;
    double worst = 0.0;
    std::string worst_name;
    const double h = 1e-3;
    for (auto& [name, id] : handles.param_ids) {
        DTensor* tensor = nullptr;
        params.visit([&](const std::string& n, DTensor& t, bool) {
            if (n == name) tensor = &t;
        });
        if (!tensor) return bad("parameter " + name + " not found in visit order");
        DTensor analytic = g.has_grad(id) ? g.grad(id) : DTensor::zeros(tensor->dims);
        for (size_t j = 0; j < tensor->size(); ++j) {
            const double keep = tensor->data[j];
            tensor->data[j] = keep + h;
            const double up = loss_of(params, nullptr, nullptr);
            tensor->data[j] = keep - h;
            const double dn = loss_of(params, nullptr, nullptr);
            tensor->data[j] = keep;
            const double fd = (up - dn) / (2 * h);
            const double rel = std::abs(analytic.data[j] - fd) / std::max(std::abs(fd), 1e-6);
            ++checked;
            if (rel > worst) {
                worst = rel;
                worst_name = name;
                worst_idx = static_cast<long>(j);
            }
        }
    }
    const double elapsed = now_s() - t0;
    std::ostringstream detail;
    detail << checked << " parameters, worst rel err " << worst << " at " << worst_name << "["
           << worst_idx << "], " << elapsed << "s";
    if (worst >= 1e-4) return bad(detail.str());
    if (elapsed > 60.0) return bad("audit exceeded 60s: " + detail.str());
    return ok(detail.str());
}

// ---------------------------------------------------------------------------
// 2. Attention oracle: graph ops vs naive scalar loops, 100 random cases each.
// ---------------------------------------------------------------------------
core::TensorT<double> naive_sda(const core::TensorT<double>& Q, const core::TensorT<double>& K,
                                const core::TensorT<double>& V) {
    const int t = Q.rows(), dk = Q.cols();
    core::TensorT<double> out({t, dk});
    for (int i = 0; i < t; ++i) {
        std::vector<double> s(t);
        double mx = -1e300;
        for (int j = 0; j < t; ++j) {
            double dot = 0;
            for (int p = 0; p < dk; ++p) dot += Q.at(i, p) * K.at(j, p);
            s[j] = dot / std::sqrt(static_cast<double>(dk));
            mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (auto& x : s) {
            x = std::exp(x - mx);
            z += x;
        }
        for (int p = 0; p < dk; ++p) {
            double acc = 0;
            for (int j = 0; j < t; ++j) acc += s[j] / z * V.at(j, p);
            out.at(i, p) = acc;
        }
    }
    return out;
}

Outcome criterion_2() {
    using DGraph = core::GraphT<double>;
    using DTensor = core::TensorT<double>;
    Rng rng(20240);
    auto rand_t = [&](std::vector<int> dims) {
        DTensor t(std::move(dims));
        for (auto& v : t.data) v = rng.gauss();
        return t;
    };
    double worst = 0.0;

    for (int trial = 0; trial < 100; ++trial) {
        const int t = 1 + static_cast<int>(rng.uniform_u64(8));
        const int dk = 1 + static_cast<int>(rng.uniform_u64(8));
        DTensor Q = rand_t({t, dk}), K = rand_t({t, dk}), V = rand_t({t, dk});
        DGraph g;
        const auto& got = g.val(g.scaled_dot_attention(g.leaf(Q), g.leaf(K), g.leaf(V)));
        const auto want = naive_sda(Q, K, V);
        for (size_t i = 0; i < want.size(); ++i)
            worst = std::max(worst, std::abs(got.data[i] - want.data[i]));
    }

    for (int trial = 0; trial < 100; ++trial) {
        const int dk = 1 + static_cast<int>(rng.uniform_u64(6));
        const int group = 1 + static_cast<int>(rng.uniform_u64(3));
        const int w = 1 + static_cast<int>(rng.uniform_u64(10));
        const int B = 1 + static_cast<int>(rng.uniform_u64(4));
        DTensor H = rand_t({B, w});
        DTensor U = rand_t({dk, group}), c = rand_t({dk});
        DTensor Wq = rand_t({dk, dk}), Wk = rand_t({dk, dk}), Wv = rand_t({dk, dk}), p = rand_t({dk});
        DGraph g;
        model::AttendIds<double> ids{g.leaf(U), g.leaf(c), g.leaf(Wq), g.leaf(Wk), g.leaf(Wv), g.leaf(p)};
        const auto& got = g.val(model::attend(g, g.leaf(H), ids, dk, group));

        // scalar-loop attend oracle
        const int t = (w + group - 1) / group;
        for (int b = 0; b < B; ++b) {
            DTensor E({t, dk});
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < dk; ++j) {
                    double acc = c.data[j];
                    for (int gi = 0; gi < group; ++gi) {
                        const int pos = i * group + gi;
                        acc += U.at(j, gi) * (pos < w ? H.at(b, pos) : 0.0);
                    }
                    E.at(i, j) = acc;
                }
            auto proj = [&](const DTensor& W) {
                DTensor R({t, dk});
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < dk; ++j) {
                        double acc = 0;
                        for (int k2 = 0; k2 < dk; ++k2) acc += E.at(i, k2) * W.at(k2, j);
                        R.at(i, j) = acc;
                    }
                return R;
            };
            const auto A = naive_sda(proj(Wq), proj(Wk), proj(Wv));
            for (int i = 0; i < t; ++i) {
                double s = 0;
                for (int j = 0; j < dk; ++j) s += A.at(i, j) * p.data[j];
                for (int gi = 0; gi < group; ++gi) {
                    const int pos = i * group + gi;
                    if (pos < w) worst = std::max(worst, std::abs(got.at(b, pos) - s));
                }
            }
        }
    }
    std::ostringstream detail;
    detail << "200 random cases, worst abs err " << worst;
    return worst < 1e-5 ? ok(detail.str()) : bad(detail.str());
}

// ---------------------------------------------------------------------------
// 3. Label-map exhaustiveness over the published tag tables.
// ---------------------------------------------------------------------------
Outcome criterion_3() {
    using ingest::AttackClass;
    struct Row {
        ingest::SchemaName schema;
        const char* tag;
        AttackClass cls;
    };
    const AttackClass P = AttackClass::Probe, D = AttackClass::DoS, U = AttackClass::U2R,
                      R = AttackClass::R2L, B = AttackClass::Benign;
    const auto k99 = ingest::SchemaName::kdd99;
    const auto nsl = ingest::SchemaName::nslkdd;
    const auto cic = ingest::SchemaName::cicids2017;
    const std::vector<Row> rows = {
        // KDDCup99 table
        {k99, "ipsweep", P}, {k99, "nmap", P}, {k99, "portsweep", P},
        {k99, "smurf", D}, {k99, "neptune", D}, {k99, "back", D}, {k99, "pod", D},
        {k99, "land", D}, {k99, "teardrop", D},
        {k99, "buffer_overflow", U}, {k99, "rootkit", U}, {k99, "loadmodule", U}, {k99, "perl", U},
        {k99, "ftp_write", R}, {k99, "imap", R}, {k99, "multihop", R}, {k99, "phf", R},
        {k99, "spy", R}, {k99, "warezclient", R}, {k99, "guess_passwd", R}, {k99, "warezmaster", R},
        {k99, "BENIGN", B},
        // NSL-KDD table
        {nsl, "satan", P}, {nsl, "ipsweep", P}, {nsl, "nmap", P}, {nsl, "portsweep", P},
        {nsl, "mscan", P}, {nsl, "saint", P},
        {nsl, "neptune", D}, {nsl, "worm", D}, {nsl, "smurf", D}, {nsl, "back", D}, {nsl, "pod", D},
        {nsl, "land", D}, {nsl, "apache2", D}, {nsl, "mailbomb", D}, {nsl, "processtable", D},
        {nsl, "teardrop", D}, {nsl, "snmpgetattack", D}, {nsl, "httptunnel", D}, {nsl, "sqlattack", D},
        {nsl, "udpstorm", D},
        {nsl, "buffer_overflow", U}, {nsl, "loadmodule", U}, {nsl, "rootkit", U}, {nsl, "perl", U},
        {nsl, "xterm", U}, {nsl, "ps", U},
        {nsl, "guess_passwd", R}, {nsl, "ftp_write", R}, {nsl, "imap", R}, {nsl, "phf", R},
        {nsl, "multihop", R}, {nsl, "warezmaster", R}, {nsl, "spy", R}, {nsl, "named", R},
        {nsl, "sendmail", R}, {nsl, "snmpguess", R}, {nsl, "xlock", R}, {nsl, "xsnoop", R},
        {nsl, "warezclient", R}, {nsl, "BENIGN", B},
        // CICIDS2017 table
        {cic, "PortScan", P},
        {cic, "DoS slowloris", D}, {cic, "DoS Slowhttptest", D}, {cic, "DoS Hulk", D},
        {cic, "DoS GoldenEye", D}, {cic, "DDoS", D},
        {cic, "Heartbleed", U},
        {cic, "Infiltration", R}, {cic, "FTP-Patator", R}, {cic, "SSH-Patator", R},
        {cic, "Web Attack - Brute Force", R}, {cic, "Web Attack - XSS", R},
        {cic, "Web Attack - Sql Injection", R},
        {cic, "BENIGN", B},
    };
    long checked = 0;
    for (const auto& row : rows) {
        const auto map = ingest::default_label_map(row.schema);
        try {
            if (map.map_tag(row.tag) != row.cls)
                return bad(std::string("tag \"") + row.tag + "\" mapped to the wrong class");
        } catch (const UnknownTagError&) {
            return bad(std::string("UnknownTag for listed tag \"") + row.tag + "\"");
        }
        ++checked;
    }
    return ok(std::to_string(checked) + " tags mapped, zero UnknownTag");
}

// ---------------------------------------------------------------------------
// 4. Metric oracle on 1000 random confusion matrices.
// ---------------------------------------------------------------------------
Outcome criterion_4() {
    Rng rng(4096);
    double worst = 0.0, worst_identity = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int C = 2 + static_cast<int>(rng.uniform_u64(6));
        eval::ConfusionMatrix cm(C);
        for (auto& v : cm.counts) v = static_cast<long>(rng.uniform_u64(60));
        if (cm.total() == 0) cm.at(0, 0) = 1;
        for (int k = 0; k < C; ++k) {
            const auto m = eval::metrics(cm, k);
            // brute-force recomputation from the definitions
            long tp = cm.at(k, k), fp = 0, fn = 0;
            for (int i = 0; i < C; ++i)
                if (i != k) {
                    fp += cm.at(i, k);
                    fn += cm.at(k, i);
                }
            const long tn = cm.total() - tp - fp - fn;
            auto div = [](long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
            worst = std::max(worst, std::abs(m.precision - div(tp, tp + fp)));
            worst = std::max(worst, std::abs(m.recall - div(tp, tp + fn)));
            worst = std::max(worst, std::abs(m.far - div(fp, fp + tn)));
            worst = std::max(worst, std::abs(m.fnr - div(fn, fn + tp)));
            worst = std::max(worst, std::abs(m.accuracy - div(tp + tn, cm.total())));
            const double p = div(tp, tp + fp), r = div(tp, tp + fn);
            worst = std::max(worst, std::abs(m.f1 - (p + r > 0 ? 2 * p * r / (p + r) : 0.0)));
            if (tp + fn > 0) worst_identity = std::max(worst_identity, std::abs(m.fnr + m.recall - 1.0));
            if (tn + fp > 0)
                worst_identity = std::max(worst_identity,
                                          std::abs(m.far + div(tn, tn + fp) - 1.0));
        }
    }
    std::ostringstream detail;
    detail << "worst metric err " << worst << ", worst identity err " << worst_identity;
    return (worst <= 1e-12 && worst_identity <= 1e-12) ? ok(detail.str()) : bad(detail.str());
}

// ---------------------------------------------------------------------------
// 5. Desk-scale detection quality on NSL-KDD KDDTrain+_20Percent.
// ---------------------------------------------------------------------------
Outcome criterion_5() {
    std::string path, why;
    if (!nslkdd_available(path, why)) return skipped(why);
    const double t0 = now_s();
    const auto opt = desk_scale_options(path, 0);
    auto report = pipe::run_once(opt, 0, &std::cerr);
    const double elapsed = now_s() - t0;

    std::ostringstream detail;
    detail.precision(4);
    detail << "macro acc " << report.macro.accuracy;
    bool pass = report.macro.accuracy >= 0.95;
    for (const auto& name : {"DoS", "Probe", "Benign"}) {
        const auto it = std::find(report.class_names.begin(), report.class_names.end(), name);
        if (it == report.class_names.end()) return bad(std::string(name) + " missing from report");
        const auto& m = report.per_class[it - report.class_names.begin()];
        detail << ", " << name << " recall " << m.recall;
        pass = pass && m.recall >= 0.90;
    }
    for (const auto& name : {"U2R", "R2L"}) {
        const auto it = std::find(report.class_names.begin(), report.class_names.end(), name);
        if (it != report.class_names.end())
            detail << ", " << name << " recall " << report.per_class[it - report.class_names.begin()].recall
                   << " (reported, not gated)";
    }
    detail << ", " << elapsed << "s";
    if (elapsed > 900.0) return bad("exceeded 15 min: " + detail.str());
    return pass ? ok(detail.str()) : bad(detail.str());
}

// ---------------------------------------------------------------------------
// 6. Stability: 10 runs, seeds 0..9.
// ---------------------------------------------------------------------------
Outcome criterion_6() {
    std::string path, why;
    if (!nslkdd_available(path, why)) return skipped(why);
    const auto opt = desk_scale_options(path, 0);
    auto summary = eval::stability_run(10, 0, [&](uint64_t seed) {
        std::cerr << "stability seed " << seed << "\n";
        return pipe::run_once(opt, seed, nullptr);
    });
    if (!summary.failed_runs.empty()) return bad(summary.failed_runs.front());
    const auto& acc = summary.per_metric.at("macro_accuracy");
    double min_acc = acc.values.front();
    for (double v : acc.values) min_acc = std::min(min_acc, v);
    std::ostringstream detail;
    detail.precision(5);
    detail << "macro acc stddev " << acc.stddev << ", min " << min_acc << ", median " << acc.median;
    return (acc.stddev <= 0.01 && min_acc >= 0.93) ? ok(detail.str()) : bad(detail.str());
}

// ---------------------------------------------------------------------------
// 7. Linear scaling across training-set fractions.
// ---------------------------------------------------------------------------
Outcome criterion_7() {
    std::string path, why;
    if (!nslkdd_available(path, why)) return skipped(why);
    const auto opt = desk_scale_options(path, 0);
    auto built = pipe::build_dataset(opt, opt.seed);
    auto manifest = pipe::select_features(opt, built.train, opt.seed);
    auto result = eval::scalability_run({0.10, 0.25, 0.50, 0.75, 1.00}, [&](double fraction) {
        std::cerr << "fraction " << fraction << "\n";
        return pipe::run_fraction(opt, built, manifest, fraction, nullptr);
    });
    std::ostringstream detail;
    detail.precision(5);
    detail << "time = " << result.time_fit.slope << "*n + " << result.time_fit.intercept << ", r2 "
           << result.time_fit.r2;
    return result.time_fit.r2 >= 0.90 ? ok(detail.str()) : bad(detail.str());
}

// ---------------------------------------------------------------------------
// 8. Resampling contract at the stated class counts.
// ---------------------------------------------------------------------------
Outcome criterion_8() {
    const std::vector<long> counts = {10000, 500, 50, 5};
    prep::EncodedDataset ds;
    ds.class_names = {"a", "b", "c", "d"};
    ds.column_names = {"x"};
    long N = 0;
    for (long c : counts) N += c;
    ds.X.dims = {static_cast<int>(N), 1};
    ds.Y.dims = {static_cast<int>(N), 4};
    ds.Y.data.assign(static_cast<size_t>(N) * 4, 0.0f);
    long row = 0;
    for (int c = 0; c < 4; ++c)
        for (long k = 0; k < counts[c]; ++k) {
            ds.X.data.push_back(static_cast<float>(c * 1000000 + k));
            ds.labels.push_back(c);
            ds.Y.data[static_cast<size_t>(row) * 4 + c] = 1.0f;
            ++row;
        }

    const auto out = prep::resample(ds, 0.05, 99);
    const auto oc = out.class_counts();
    if (oc != std::vector<long>{10000, 500, 500, 500})
        return bad("counts (" + std::to_string(oc[0]) + "," + std::to_string(oc[1]) + "," +
                   std::to_string(oc[2]) + "," + std::to_string(oc[3]) + ") != (10000,500,500,500)");

    for (size_t a = 0; a < counts.size(); ++a)
        for (size_t b = 0; b < counts.size(); ++b)
            if (counts[a] >= counts[b] && oc[a] < oc[b]) return bad("frequency ordering violated");

    std::set<std::pair<int, float>> originals;
    for (long i = 0; i < ds.rows(); ++i) originals.insert({ds.labels[i], ds.X.data[i]});
    for (long i = ds.rows(); i < out.rows(); ++i)
        if (!originals.count({out.labels[i], out.X.data[i]}))
            return bad("synthesized row is not a copy of an original row of its class");
    return ok("counts (10000,500,500,500), ordering preserved, all synthetic rows are copies");
}

// ---------------------------------------------------------------------------
// 9. Feature selection recovers 3 informative features among 29 noise ones.
// ---------------------------------------------------------------------------
Outcome criterion_9() {
    int recovered = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(7000 + seed);
        const long n = 600;
        const int d = 32;
        core::Tensor X({static_cast<int>(n), d});
        std::vector<int> y(n);
        for (long r = 0; r < n; ++r) {
            const int cls = static_cast<int>(rng.uniform_u64(3));
            y[r] = cls;
            for (int c = 0; c < d; ++c) X.data[r * d + c] = static_cast<float>(rng.gauss());
            X.data[r * d + 0] = static_cast<float>((cls == 0 ? 1 : -1) * (0.8 + rng.uniform()));
            X.data[r * d + 1] = static_cast<float>((cls == 1 ? 1 : -1) * (0.8 + rng.uniform()));
            X.data[r * d + 2] = static_cast<float>((cls == 2 ? 1 : -1) * (0.8 + rng.uniform()));
        }
        forest::ForestParams params;
        params.n_trees = 50;
        params.max_depth = 10;
        params.min_leaf = 2;
        params.seed = seed;
        const auto model = forest::fit_forest(X, y, 3, params);
        auto top = forest::select_top_k(model, 3);
        std::sort(top.begin(), top.end());
        recovered += top == std::vector<int>{0, 1, 2};
    }
    std::ostringstream detail;
    detail << recovered << "/20 seeds recovered all informative features";
    return recovered >= 18 ? ok(detail.str()) : bad(detail.str());
}

// ---------------------------------------------------------------------------
// 10. Checkpoint round trip and error taxonomy.
// ---------------------------------------------------------------------------
Outcome criterion_10() {
    testutil::TempDir tmp;
    model::ModelConfig cfg;
    cfg.input_dim = 8;
    cfg.widths = {8, 6};
    cfg.attn_dim = 4;
    cfg.n_classes = 3;
    cfg.seed = 7;
    auto params = model::ModelParams::init(cfg);
    model::CheckpointMeta meta;
    meta.class_names = {"a", "b", "c"};
    meta.feature_digest = "feat1";
    meta.config_digest = "cfg1";

    const auto p1 = tmp.file("m1.ckpt");
    const auto p2 = tmp.file("m2.ckpt");
    model::save_checkpoint(p1, params, meta);
    auto loaded = model::load_checkpoint(p1);
    model::save_checkpoint(p2, loaded.params, loaded.meta);
    if (testutil::read_file(p1) != testutil::read_file(p2))
        return bad("save -> load -> save is not byte-identical");

    const auto bytes = testutil::read_file(p1);
    {
        auto bad_bytes = bytes;
        bad_bytes[1] = 'X';
        testutil::write_file(tmp.file("bad.ckpt"), bad_bytes);
        try {
            (void)model::load_checkpoint(tmp.file("bad.ckpt"));
            return bad("magic mismatch not detected");
        } catch (const model::MagicMismatchError&) {
        } catch (...) {
            return bad("magic mismatch raised the wrong error kind");
        }
    }
    {
        auto bad_bytes = bytes;
        bad_bytes[4] = 3;
        testutil::write_file(tmp.file("bad.ckpt"), bad_bytes);
        try {
            (void)model::load_checkpoint(tmp.file("bad.ckpt"));
            return bad("version mismatch not detected");
        } catch (const model::VersionMismatchError&) {
        } catch (...) {
            return bad("version mismatch raised the wrong error kind");
        }
    }
    {
        testutil::write_file(tmp.file("bad.ckpt"), bytes.substr(0, bytes.size() - 7));
        try {
            (void)model::load_checkpoint(tmp.file("bad.ckpt"));
            return bad("truncation not detected");
        } catch (const model::TruncatedError&) {
        } catch (...) {
            return bad("truncation raised the wrong error kind");
        }
    }
    {
        // digest mismatch: evaluation against a test set with another manifest
        prep::EncodedDataset test;
        test.class_names = meta.class_names;
        test.column_names = {"f"};
        test.X.dims = {2, 8};
        test.X.data.assign(16, 0.1f);
        test.X.dims = {2, 8};
        test.Y.dims = {2, 3};
        test.Y.data = {1, 0, 0, 0, 1, 0};
        test.labels = {0, 1};
        test.provenance.feature_digest = "featOTHER";
        try {
            (void)eval::evaluate_model(loaded.params, loaded.meta, test, 2);
            return bad("feature digest mismatch not detected");
        } catch (const model::DigestMismatchError&) {
        } catch (...) {
            return bad("digest mismatch raised the wrong error kind");
        }
    }
    return ok("byte-identical round trip; magic/version/truncation/digest errors distinct");
}

// ---------------------------------------------------------------------------
// 11. Synergistic role task on a ueba-synth + NSL-KDD join.
// ---------------------------------------------------------------------------
Outcome criterion_11() {
    std::string path, why;
    if (!nslkdd_available(path, why)) return skipped(why);
    pipe::Options opt = desk_scale_options(path, 0);
    opt.task = "role";
    opt.join_ueba = true;
    opt.join_total = 20000;
    opt.ueba_users = 200;
    opt.ueba_sessions = 10;
    opt.ueba_malicious = 0.1;
    opt.epochs = 12;
    auto report = pipe::run_once(opt, 0, &std::cerr);
    std::ostringstream detail;
    detail.precision(4);
    detail << "4-role macro f1 " << report.macro.f1 << " over";
    for (const auto& name : report.class_names) detail << " " << name;
    if (report.class_names.size() != 4) return bad("expected 4 roles: " + detail.str());
    return report.macro.f1 >= 0.95 ? ok(detail.str()) : bad(detail.str());
}

struct Criterion {
    int number;
    const char* title;
    std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "gradient audit vs central finite differences (reduced config)", criterion_1},
    {2, "attention matches the scalar-loop oracle", criterion_2},
    {3, "label-map exhaustiveness over the published tag tables", criterion_3},
    {4, "metric oracle on random confusion matrices", criterion_4},
    {5, "desk-scale detection quality on NSL-KDD 20%", criterion_5},
    {6, "stability over 10 seeded runs", criterion_6},
    {7, "linear scaling of training time vs sample count", criterion_7},
    {8, "resampling contract", criterion_8},
    {9, "feature selection recovers informative features", criterion_9},
    {10, "checkpoint round trip and error taxonomy", criterion_10},
    {11, "synergistic role task reaches macro F1 0.95", criterion_11},
};

int report_line(const Criterion& c) {
    Outcome outcome;
    try {
        outcome = c.run();
    } catch (const std::exception& e) {
        outcome = bad(std::string("unexpected exception: ") + e.what());
    }
    const char* verdict = outcome.kind == Outcome::pass ? "PASS"
                          : outcome.kind == Outcome::skip ? "SKIP"
                                                          : "FAIL";
    std::cout << "CRITERION " << c.number << ": " << verdict << " - " << c.title;
    if (!outcome.detail.empty()) std::cout << " (" << outcome.detail << ")";
    std::cout << std::endl;
    return outcome.kind == Outcome::pass ? 0 : outcome.kind == Outcome::skip ? kSkipExit : 1;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
        if (std::strcmp(argv[i], "--list") == 0) {
            for (const auto& c : kCriteria) std::cout << c.number << ": " << c.title << "\n";
            return 0;
        }
    }
    if (only != 0) {
        for (const auto& c : kCriteria)
            if (c.number == only) return report_line(c);
        std::cerr << "no criterion " << only << "\n";
        return 3;
    }
    int failures = 0, skips = 0;
    for (const auto& c : kCriteria) {
        const int rc = report_line(c);
        failures += rc == 1;
        skips += rc == kSkipExit;
    }
    std::cout << kCriteria.size() - failures - skips << " passed, " << failures << " failed, " << skips
              << " skipped" << std::endl;
    return failures ? 1 : 0;
}
