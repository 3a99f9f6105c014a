#include "codmtl/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace codmtl {

std::size_t Tree::n_leaves() const {
    std::size_t n = 0;
    for (const auto& node : nodes) {
        if (node.feature < 0) ++n;
    }
    return n;
}

const TreeNode& Tree::route(std::span<const double> x) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
        const auto& node = nodes[at];
        at = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                         : node.right;
    }
    return nodes[at];
}

void GBDTConfig::validate() const {
    if (num_trees < 1) throw ConfigError("gbdt: num_trees must be >= 1");
    if (max_leaves < 2) throw ConfigError("gbdt: max_leaves must be >= 2");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) {
        throw ConfigError("gbdt: shrinkage must be in (0, 1]");
    }
    if (l2_lambda < 0.0) throw ConfigError("gbdt: l2_lambda must be >= 0");
    if (num_bins < 2) throw ConfigError("gbdt: num_bins must be >= 2");
    if (min_samples_leaf < 1) throw ConfigError("gbdt: min_samples_leaf must be >= 1");
}

namespace {

// Per-feature bin layout: thresholds[f] are the candidate split edges; a value
// routes into bin lower_bound(thresholds, x), so x <= thresholds[b] exactly
// when bin(x) <= b. Training partitions and inference both reduce to the same
// "<= goes left" rule.
struct BinnedDataset {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<std::vector<double>> thresholds;  // per feature, strictly increasing
    std::vector<std::size_t> bin_offset;          // prefix sums of bins per feature
    std::size_t total_bins = 0;
    std::vector<std::uint16_t> bins;              // row-major [n_rows x n_features]

    std::size_t bins_of(std::size_t f) const {
        return bin_offset[f + 1] - bin_offset[f];
    }
};

BinnedDataset bin_dataset(const Matrix& X, std::size_t num_bins) {
    BinnedDataset ds;
    ds.n_rows = X.rows();
    ds.n_features = X.cols();
    ds.thresholds.resize(ds.n_features);
    ds.bin_offset.assign(ds.n_features + 1, 0);

    std::vector<double> values(ds.n_rows);
    for (std::size_t f = 0; f < ds.n_features; ++f) {
        for (std::size_t r = 0; r < ds.n_rows; ++r) values[r] = X(r, f);
        std::sort(values.begin(), values.end());
        auto last = std::unique(values.begin(), values.end());
        std::size_t n_unique = static_cast<std::size_t>(last - values.begin());

        auto& edges = ds.thresholds[f];
        if (n_unique <= num_bins) {
            for (std::size_t u = 0; u + 1 < n_unique; ++u) {
                edges.push_back(0.5 * (values[u] + values[u + 1]));
            }
        } else {
            for (std::size_t b = 1; b < num_bins; ++b) {
                std::size_t pos = b * n_unique / num_bins;
                double edge = 0.5 * (values[pos - 1] + values[pos]);
                if (edges.empty() || edge > edges.back()) edges.push_back(edge);
            }
        }
        ds.bin_offset[f + 1] = ds.bin_offset[f] + edges.size() + 1;
    }
    ds.total_bins = ds.bin_offset[ds.n_features];

    ds.bins.resize(ds.n_rows * ds.n_features);
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        for (std::size_t f = 0; f < ds.n_features; ++f) {
            const auto& edges = ds.thresholds[f];
            auto it = std::lower_bound(edges.begin(), edges.end(), X(r, f));
            ds.bins[r * ds.n_features + f] =
                static_cast<std::uint16_t>(it - edges.begin());
        }
    }
    return ds;
}

// Gradient/hessian/count histogram over all features of one node.
struct Histogram {
    std::vector<double> g;
    std::vector<double> h;
    std::vector<double> c;

    void reset(std::size_t total_bins) {
        g.assign(total_bins, 0.0);
        h.assign(total_bins, 0.0);
        c.assign(total_bins, 0.0);
    }
    // self -= other (turns a parent histogram into the sibling's)
    void subtract(const Histogram& other) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] -= other.g[i];
            h[i] -= other.h[i];
            c[i] -= other.c[i];
        }
    }
};

struct SplitChoice {
    bool valid = false;
    std::size_t feature = 0;
    std::size_t bin = 0;  // left child takes bins <= bin
    double gain = 0.0;
    double left_g = 0.0, left_h = 0.0;
    std::size_t left_count = 0;
};

struct BuildNode {
    int node_index = 0;
    std::size_t begin = 0, end = 0;  // range in the row-index array
    double sum_g = 0.0, sum_h = 0.0;
    Histogram hist;
    SplitChoice split;
};

void fill_histogram(const BinnedDataset& ds, std::span<const std::size_t> rows,
                    std::span<const double> g, std::span<const double> h,
                    Histogram& hist) {
    hist.reset(ds.total_bins);
    const std::size_t nf = ds.n_features;
    for (std::size_t r : rows) {
        const std::uint16_t* brow = ds.bins.data() + r * nf;
        const double gr = g[r];
        const double hr = h[r];
        for (std::size_t f = 0; f < nf; ++f) {
            std::size_t slot = ds.bin_offset[f] + brow[f];
            hist.g[slot] += gr;
            hist.h[slot] += hr;
            hist.c[slot] += 1.0;
        }
    }
}

double leaf_objective(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

SplitChoice best_split(const BinnedDataset& ds, const BuildNode& node,
                       const GBDTConfig& cfg, std::size_t node_count) {
    SplitChoice best;
    const double parent_obj = leaf_objective(node.sum_g, node.sum_h, cfg.l2_lambda);
    const double total_count = static_cast<double>(node_count);
    for (std::size_t f = 0; f < ds.n_features; ++f) {
        const std::size_t base = ds.bin_offset[f];
        const std::size_t nb = ds.bins_of(f);
        if (nb < 2) continue;
        double gl = 0.0, hl = 0.0, cl = 0.0;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
            gl += node.hist.g[base + b];
            hl += node.hist.h[base + b];
            cl += node.hist.c[base + b];
            double cr = total_count - cl;
            if (cl < static_cast<double>(cfg.min_samples_leaf)) continue;
            if (cr < static_cast<double>(cfg.min_samples_leaf)) break;
            double gr = node.sum_g - gl;
            double hr = node.sum_h - hl;
            double gain = leaf_objective(gl, hl, cfg.l2_lambda) +
                          leaf_objective(gr, hr, cfg.l2_lambda) - parent_obj;
            if (gain > best.gain) {
                best.valid = true;
                best.feature = f;
                best.bin = b;
                best.gain = gain;
                best.left_g = gl;
                best.left_h = hl;
                best.left_count = static_cast<std::size_t>(cl);
            }
        }
    }
    return best;
}

// Preorder leaf numbering, left subtree first.
void assign_leaf_ids(Tree& tree) {
    int next_id = 0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int at = stack.back();
        stack.pop_back();
        auto& node = tree.nodes[static_cast<std::size_t>(at)];
        if (node.feature < 0) {
            node.leaf_id = next_id++;
        } else {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }
}

}  // namespace

GBDTModel train_gbdt(const Matrix& X, std::span<const double> y,
                     const GBDTConfig& config) {
    config.validate();
    if (X.rows() == 0 || X.cols() == 0) throw DataError("train_gbdt: empty matrix");
    if (X.rows() != y.size()) throw DataError("train_gbdt: X/y row mismatch");

    std::size_t n_pos = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) throw DataError("train_gbdt: labels must be 0/1");
        if (v == 1.0) ++n_pos;
    }
    if (n_pos == 0 || n_pos == y.size()) {
        throw DataError("train_gbdt: labels are single-class");
    }

    const std::size_t n = X.rows();
    GBDTModel model;
    model.n_features = X.cols();
    model.shrinkage = config.shrinkage;
    model.feature_gain.assign(X.cols(), 0.0);
    double pbar = static_cast<double>(n_pos) / static_cast<double>(n);
    model.base_score = std::log(pbar / (1.0 - pbar));

    BinnedDataset ds = bin_dataset(X, config.num_bins);

    std::vector<double> margin(n, model.base_score);
    std::vector<double> g(n), h(n);
    std::vector<std::size_t> rows(n);

    for (std::size_t round = 0; round < config.num_trees; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margin[i]);
            g[i] = p - y[i];
            h[i] = p * (1.0 - p);
        }
        std::iota(rows.begin(), rows.end(), 0u);

        Tree tree;
        tree.nodes.push_back({});  // root, leaf for now

        std::vector<BuildNode> leaves;
        {
            BuildNode root;
            root.node_index = 0;
            root.begin = 0;
            root.end = n;
            root.sum_g = std::accumulate(g.begin(), g.end(), 0.0);
            root.sum_h = std::accumulate(h.begin(), h.end(), 0.0);
            fill_histogram(ds, rows, g, h, root.hist);
            root.split = best_split(ds, root, config, n);
            leaves.push_back(std::move(root));
        }

        std::size_t n_leaves = 1;
        while (n_leaves < config.max_leaves) {
            // Expand the pending leaf with the largest gain; ties keep the
            // first (oldest) candidate so growth is deterministic.
            std::size_t best_at = leaves.size();
            double best_gain = 0.0;
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (leaves[i].split.valid && leaves[i].split.gain > best_gain) {
                    best_gain = leaves[i].split.gain;
                    best_at = i;
                }
            }
            if (best_at == leaves.size()) break;

            BuildNode parent = std::move(leaves[best_at]);
            leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(best_at));
            const SplitChoice& choice = parent.split;

            auto& pnode = tree.nodes[static_cast<std::size_t>(parent.node_index)];
            pnode.feature = static_cast<int>(choice.feature);
            pnode.threshold = ds.thresholds[choice.feature][choice.bin];
            pnode.left = static_cast<int>(tree.nodes.size());
            pnode.right = static_cast<int>(tree.nodes.size() + 1);
            tree.nodes.push_back({});
            tree.nodes.push_back({});
            model.feature_gain[choice.feature] += choice.gain;

            auto mid = std::partition(
                rows.begin() + static_cast<std::ptrdiff_t>(parent.begin),
                rows.begin() + static_cast<std::ptrdiff_t>(parent.end),
                [&](std::size_t r) {
                    return ds.bins[r * ds.n_features + choice.feature] <= choice.bin;
                });
            std::size_t split_at =
                static_cast<std::size_t>(mid - rows.begin());

            BuildNode left, right;
            left.node_index = pnode.left;
            left.begin = parent.begin;
            left.end = split_at;
            left.sum_g = choice.left_g;
            left.sum_h = choice.left_h;
            right.node_index = pnode.right;
            right.begin = split_at;
            right.end = parent.end;
            right.sum_g = parent.sum_g - choice.left_g;
            right.sum_h = parent.sum_h - choice.left_h;

            // Histogram for the smaller child directly; sibling by subtraction.
            std::size_t left_count = split_at - parent.begin;
            std::size_t right_count = parent.end - split_at;
            BuildNode* small = left_count <= right_count ? &left : &right;
            BuildNode* large = left_count <= right_count ? &right : &left;
            fill_histogram(ds,
                           std::span<const std::size_t>(rows.data() + small->begin,
                                                        small->end - small->begin),
                           g, h, small->hist);
            large->hist = std::move(parent.hist);
            large->hist.subtract(small->hist);

            left.split = best_split(ds, left, config, left_count);
            right.split = best_split(ds, right, config, right_count);
            leaves.push_back(std::move(left));
            leaves.push_back(std::move(right));
            ++n_leaves;
        }

        // Newton leaf values recomputed from the raw gradients of each leaf's
        // rows, then applied to the margins.
        for (const auto& leaf : leaves) {
            double sum_g = 0.0, sum_h = 0.0;
            for (std::size_t i = leaf.begin; i < leaf.end; ++i) {
                sum_g += g[rows[i]];
                sum_h += h[rows[i]];
            }
            double value = -sum_g / (sum_h + config.l2_lambda);
            tree.nodes[static_cast<std::size_t>(leaf.node_index)].value = value;
            for (std::size_t i = leaf.begin; i < leaf.end; ++i) {
                margin[rows[i]] += config.shrinkage * value;
            }
        }

        assign_leaf_ids(tree);
        model.leaf_counts.push_back(tree.n_leaves());
        model.trees.push_back(std::move(tree));
    }
    return model;
}

namespace {

void check_width(const GBDTModel& model, std::span<const double> x) {
    if (x.size() != model.n_features) {
        throw DataError("gbdt predict: row width mismatch");
    }
}

}  // namespace

double predict_margin_prefix(const GBDTModel& model, std::span<const double> x,
                             std::size_t n_trees) {
    check_width(model, x);
    double sum = 0.0;
    for (std::size_t t = 0; t < n_trees && t < model.trees.size(); ++t) {
        sum += model.trees[t].route(x).value;
    }
    return model.base_score + model.shrinkage * sum;
}

double predict_margin(const GBDTModel& model, std::span<const double> x) {
    return predict_margin_prefix(model, x, model.trees.size());
}

double predict_proba(const GBDTModel& model, std::span<const double> x) {
    return sigmoid(predict_margin(model, x));
}

std::vector<int> leaf_indices(const GBDTModel& model, std::span<const double> x) {
    check_width(model, x);
    std::vector<int> out;
    out.reserve(model.trees.size());
    for (const auto& tree : model.trees) {
        out.push_back(tree.route(x).leaf_id);
    }
    return out;
}

std::vector<std::size_t> selected_features(const GBDTModel& model,
                                           std::optional<std::size_t> top_k) {
    std::vector<std::size_t> out;
    if (!top_k) {
        for (std::size_t f = 0; f < model.feature_gain.size(); ++f) {
            if (model.feature_gain[f] > 0.0) out.push_back(f);
        }
        return out;
    }
    if (*top_k > model.feature_gain.size()) {
        throw ConfigError("selected_features: top_k exceeds feature count");
    }
    std::vector<std::size_t> order(model.feature_gain.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return model.feature_gain[a] > model.feature_gain[b];
    });
    out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(*top_k));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace codmtl
