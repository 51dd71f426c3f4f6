#pragma once

#include <string>
#include <vector>

#include "idu/encode.hpp"
#include "idu/tensor.hpp"

namespace idu::forest {

/// Either a split (feature, threshold, children) or a leaf (class histogram).
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    float threshold = 0.0f;
    int left = -1;
    int right = -1;
    std::vector<long> histogram;
};

struct Tree {
    std::vector<TreeNode> nodes;  // index 0 is the root

    int predict(const float* row) const;
};

struct ForestParams {
    int n_trees = 100;
    int max_depth = 12;
    int min_leaf = 5;
    int mtry = 0;  // 0 resolves to ceil(sqrt(d))
    uint64_t seed = 0;
};

struct ForestModel {
    std::vector<Tree> trees;
    int n_features = 0;
    uint64_t seed = 0;
    std::vector<double> importances;  // sums to 1, or all zero for degenerate data
    std::vector<std::string> warnings;

    std::string digest() const;
};

/// Bootstrapped trees split by maximum Gini impurity decrease over mtry
/// features sampled per node. Importance is mean decrease in impurity,
/// averaged over trees and normalized. Per-tree seeds derive from the master
/// seed, so running trees in parallel never changes the result.
ForestModel fit_forest(const core::Tensor& X, const std::vector<int>& y, int n_classes,
                       const ForestParams& params);

/// Indices of the k largest importances; ties break toward the lower index.
std::vector<int> select_top_k(const ForestModel& model, int k);

/// Column subset in the given order; labels untouched.
prep::EncodedDataset project(const prep::EncodedDataset& ds, const std::vector<int>& indices);

/// Text manifest of selected features, consumed by train/eval for column
/// alignment checks.
struct FeatureManifest {
    std::vector<int> indices;
    std::vector<std::string> names;
    std::vector<double> importances;
    std::string config_digest;

    std::string serialize() const;
    static FeatureManifest deserialize(const std::string& text);
    void save(const std::string& path) const;
    static FeatureManifest load(const std::string& path);
    std::string digest() const;
};

}  // namespace idu::forest
