#include "idu/forest.hpp"

#include "idu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace idu::forest {

namespace {

double gini(const std::vector<long>& hist, long n) {
    if (n == 0) return 0.0;
    double sq = 0.0;
    for (long c : hist) {
        const double p = static_cast<double>(c) / static_cast<double>(n);
        sq += p * p;
    }
    return 1.0 - sq;
}

struct TreeBuilder {
    const core::Tensor& X;
    const std::vector<int>& y;
    int n_classes;
    const ForestParams& params;
    int mtry;
    long n_bootstrap;
    Rng rng;
    Tree tree;
    std::vector<double> importance;  // accumulated weighted impurity decrease

    TreeBuilder(const core::Tensor& X_, const std::vector<int>& y_, int n_classes_,
                const ForestParams& p_, int mtry_, Rng rng_)
        : X(X_), y(y_), n_classes(n_classes_), params(p_), mtry(mtry_), n_bootstrap(0), rng(rng_) {
        importance.assign(X.cols(), 0.0);
    }

    int build(std::vector<long>& idx, long lo, long hi, int depth) {
        const long n = hi - lo;
        std::vector<long> hist(n_classes, 0);
        for (long i = lo; i < hi; ++i) hist[y[idx[i]]]++;
        const double node_gini = gini(hist, n);

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].histogram = hist;

        const bool pure = node_gini <= 0.0;
        if (pure || depth >= params.max_depth || n < 2 * params.min_leaf) return node_id;

        // sample mtry candidate features without replacement
        std::vector<int> features(X.cols());
        std::iota(features.begin(), features.end(), 0);
        for (int i = 0; i < mtry; ++i) {
            const int j = i + static_cast<int>(rng.uniform_u64(features.size() - i));
            std::swap(features[i], features[j]);
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_children_gini = node_gini;  // weighted; lower is better
        std::vector<std::pair<float, int>> vals(n);
        std::vector<long> left_hist(n_classes);

        for (int fi = 0; fi < mtry; ++fi) {
            const int f = features[fi];
            for (long i = 0; i < n; ++i) {
                const long row = idx[lo + i];
                vals[i] = {X.at(static_cast<int>(row), f), y[row]};
            }
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (vals.front().first == vals.back().first) continue;

            std::fill(left_hist.begin(), left_hist.end(), 0);
            long n_left = 0;
            for (long i = 0; i + 1 < n; ++i) {
                left_hist[vals[i].second]++;
                ++n_left;
                if (vals[i].first == vals[i + 1].first) continue;  // threshold only between distinct values
                const long n_right = n - n_left;
                if (n_left < params.min_leaf || n_right < params.min_leaf) continue;
                double left_sq = 0.0;
                for (long c : left_hist) left_sq += static_cast<double>(c) * c;
                const double gini_left = 1.0 - left_sq / (static_cast<double>(n_left) * n_left);
                double right_sq = 0.0;
                for (int c = 0; c < n_classes; ++c) {
                    const double rc = static_cast<double>(hist[c] - left_hist[c]);
                    right_sq += rc * rc;
                }
                const double gini_right = 1.0 - right_sq / (static_cast<double>(n_right) * n_right);
                const double children =
                    (n_left * gini_left + n_right * gini_right) / static_cast<double>(n);
                if (children < best_children_gini - 1e-15) {
                    best_children_gini = children;
                    best_feature = f;
                    // midpoint between adjacent distinct values
                    best_threshold =
                        (static_cast<double>(vals[i].first) + static_cast<double>(vals[i + 1].first)) / 2.0;
                }
            }
        }

        if (best_feature < 0) return node_id;

        std::vector<long>::iterator mid =
            std::partition(idx.begin() + lo, idx.begin() + hi, [&](long row) {
                return X.at(static_cast<int>(row), best_feature) <= best_threshold;
            });
        const long n_left = mid - (idx.begin() + lo);
        if (n_left == 0 || n_left == n) return node_id;  // numeric edge; keep as leaf

        const double decrease = node_gini - best_children_gini;
        importance[best_feature] += (static_cast<double>(n) / static_cast<double>(n_bootstrap)) * decrease;

        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = static_cast<float>(best_threshold);
        const int left_id = build(idx, lo, lo + n_left, depth + 1);
        tree.nodes[node_id].left = left_id;
        const int right_id = build(idx, lo + n_left, hi, depth + 1);
        tree.nodes[node_id].right = right_id;
        return node_id;
    }
};

}  // namespace

int Tree::predict(const float* row) const {
    int node = 0;
    while (nodes[node].feature >= 0)
        node = row[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left : nodes[node].right;
    const auto& hist = nodes[node].histogram;
    return static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

std::string ForestModel::digest() const {
    Fnv64 f;
    auto u64 = [&](uint64_t v) { f.update(&v, sizeof(v)); };
    u64(trees.size());
    u64(static_cast<uint64_t>(n_features));
    for (const auto& t : trees) {
        u64(t.nodes.size());
        for (const auto& n : t.nodes) {
            u64(static_cast<uint64_t>(n.feature));
            f.update(&n.threshold, sizeof(n.threshold));
            for (long c : n.histogram) u64(static_cast<uint64_t>(c));
        }
    }
    for (double imp : importances) f.update(&imp, sizeof(imp));
    return f.hex();
}

ForestModel fit_forest(const core::Tensor& X, const std::vector<int>& y, int n_classes,
                       const ForestParams& params) {
    if (X.rank() != 2) throw ShapeError("fit_forest: rank-2 X required");
    const long N = X.rows();
    const int d = X.cols();
    if (N < 2) throw DataError("fit_forest: need at least 2 samples");
    if (y.size() != static_cast<size_t>(N)) throw UsageError("fit_forest: X/y length mismatch");
    for (int label : y)
        if (label < 0 || label >= n_classes) throw UsageError("fit_forest: label out of range");
    if (params.n_trees < 1 || params.min_leaf < 1) throw ConfigError("fit_forest: bad parameters");

    const int mtry = params.mtry > 0 ? std::min(params.mtry, d)
                                     : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));

    ForestModel model;
    model.n_features = d;
    model.seed = params.seed;
    model.trees.resize(params.n_trees);
    std::vector<std::vector<double>> per_tree_importance(params.n_trees);

#pragma omp parallel for schedule(dynamic) if (core::parallel_enabled())
    for (int t = 0; t < params.n_trees; ++t) {
        Rng rng = Rng::derive(params.seed, static_cast<uint64_t>(t) + 1);
        std::vector<long> idx(N);
        for (long i = 0; i < N; ++i) idx[i] = static_cast<long>(rng.uniform_u64(N));
        TreeBuilder builder(X, y, n_classes, params, mtry, rng);
        builder.n_bootstrap = N;
        builder.build(idx, 0, N, 0);
        model.trees[t] = std::move(builder.tree);
        per_tree_importance[t] = std::move(builder.importance);
    }

    model.importances.assign(d, 0.0);
    for (const auto& imp : per_tree_importance)
        for (int j = 0; j < d; ++j) model.importances[j] += imp[j];
    double total = 0.0;
    for (double v : model.importances) total += v;
    if (total > 0.0) {
        for (auto& v : model.importances) v /= total;
    } else {
        model.warnings.push_back("degenerate training data: all trees are single leaves, importances are zero");
    }
    return model;
}

std::vector<int> select_top_k(const ForestModel& model, int k) {
    const int d = model.n_features;
    if (k < 1 || k > d)
        throw ConfigError("select_top_k: k=" + std::to_string(k) + " outside [1," + std::to_string(d) + "]");
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (model.importances[a] != model.importances[b]) return model.importances[a] > model.importances[b];
        return a < b;
    });
    order.resize(k);
    return order;
}

prep::EncodedDataset project(const prep::EncodedDataset& ds, const std::vector<int>& indices) {
    const int d = ds.width();
    for (int i : indices)
        if (i < 0 || i >= d) throw ConfigError("project: feature index " + std::to_string(i) + " out of range");
    prep::EncodedDataset out;
    out.class_names = ds.class_names;
    out.labels = ds.labels;
    out.Y = ds.Y;
    out.provenance = ds.provenance;
    for (int i : indices) out.column_names.push_back(ds.column_names.at(i));
    const long N = ds.rows();
    const int k = static_cast<int>(indices.size());
    out.X.dims = {static_cast<int>(N), k};
    out.X.data.resize(static_cast<size_t>(N) * k);
    for (long r = 0; r < N; ++r)
        for (int j = 0; j < k; ++j)
            out.X.data[static_cast<size_t>(r) * k + j] = ds.X.data[static_cast<size_t>(r) * d + indices[j]];
    return out;
}

std::string FeatureManifest::serialize() const {
    std::ostringstream out;
    out << "# idu-features v1\n";
    out << "# config=" << config_digest << "\n";
    char buf[64];
    for (size_t i = 0; i < indices.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", importances[i]);
        out << indices[i] << "\t" << names[i] << "\t" << buf << "\n";
    }
    return out.str();
}

FeatureManifest FeatureManifest::deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "# idu-features v1")
        throw DataError("feature manifest: bad header");
    FeatureManifest m;
    while (std::getline(in, line)) {
        if (line.rfind("# config=", 0) == 0) {
            m.config_digest = trim(line.substr(9));
            continue;
        }
        if (trim(line).empty()) continue;
        const auto parts = split(line, '\t');
        if (parts.size() != 3) throw DataError("feature manifest: bad line: " + line);
        m.indices.push_back(std::stoi(parts[0]));
        m.names.push_back(parts[1]);
        m.importances.push_back(std::stod(parts[2]));
    }
    return m;
}

void FeatureManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature manifest: " + path);
    out << serialize();
}

FeatureManifest FeatureManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature manifest: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(text);
}

std::string FeatureManifest::digest() const { return digest_hex(serialize()); }

}  // namespace idu::forest
