#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "codmtl/common.hpp"

namespace codmtl {

// One node of a regression tree. feature < 0 marks a leaf; internal nodes
// route value <= threshold to the left child.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf log-odds contribution
    int leaf_id = -1;    // 0..n_leaves-1 in preorder, left subtree first
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    std::size_t n_leaves() const;
    const TreeNode& route(std::span<const double> x) const;
};

struct GBDTConfig {
    std::size_t num_trees = 100;
    std::size_t max_leaves = 31;
    std::size_t min_samples_leaf = 20;
    double shrinkage = 0.1;
    double l2_lambda = 1.0;
    std::size_t num_bins = 255;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GBDTModel {
    std::vector<Tree> trees;
    double base_score = 0.0;
    double shrinkage = 0.1;
    std::vector<std::size_t> leaf_counts;
    std::vector<double> feature_gain;
    std::size_t n_features = 0;
};

// Binary logistic boosting: base score from the empirical positive rate, then
// per round a histogram-binned, leaf-wise tree fit to g_i = p_i - y_i and
// h_i = p_i (1 - p_i), with Newton leaf values -G/(H + lambda).
GBDTModel train_gbdt(const Matrix& X, std::span<const double> y,
                     const GBDTConfig& config);

double predict_margin(const GBDTModel& model, std::span<const double> x);

// Margin using only the first n_trees trees (n_trees = 0 gives the base score).
double predict_margin_prefix(const GBDTModel& model, std::span<const double> x,
                             std::size_t n_trees);

double predict_proba(const GBDTModel& model, std::span<const double> x);

// Element t is the leaf id reached in tree t.
std::vector<int> leaf_indices(const GBDTModel& model, std::span<const double> x);

// All features with positive cumulative gain, or the top_k by gain (ties to
// the lower index). Sorted ascending.
std::vector<std::size_t> selected_features(const GBDTModel& model,
                                           std::optional<std::size_t> top_k = {});

}  // namespace codmtl
