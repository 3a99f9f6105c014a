#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codmtl/common.hpp"
#include "codmtl/gbdt.hpp"

namespace codmtl {

// Concatenated one-hot leaf vectors for a set of rows, stored as the active
// slot per tree (the dense width is sum(leaf_counts)).
struct LeafOnehotBatch {
    std::vector<std::size_t> leaf_counts;
    std::vector<std::size_t> offsets;  // per-tree slot offsets, size n_trees + 1
    std::size_t width = 0;
    std::vector<std::vector<std::size_t>> active;  // per row: one slot per tree

    std::size_t n_rows() const { return active.size(); }
    std::size_t n_trees() const { return leaf_counts.size(); }
};

// Soft distillation targets q_i in (0,1).
struct SoftTargets {
    std::vector<double> q;
};

struct EmbedTrainConfig {
    std::size_t d_e = 20;
    std::size_t hidden = 100;
    std::size_t epochs = 100;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
};

// One-hot leaf concatenation -> relu hidden layer -> dense embedding, with a
// scalar logit readout used only while fitting to the soft targets. The first
// layer is stored input-major so one-hot rows touch contiguous memory.
class LeafEmbeddingModel {
public:
    LeafEmbeddingModel() = default;
    LeafEmbeddingModel(std::vector<std::size_t> leaf_counts, std::size_t hidden,
                       std::size_t d_e, std::uint64_t seed);

    std::size_t input_width() const { return input_width_; }
    std::size_t hidden() const { return hidden_; }
    std::size_t d_e() const { return d_e_; }
    const std::vector<std::size_t>& leaf_counts() const { return leaf_counts_; }

    std::span<double> w_in();              // [input_width x hidden], input-major
    std::span<const double> w_in() const;
    std::span<double> b_in();
    std::span<const double> b_in() const;
    std::span<double> w_emb();             // [d_e x hidden], output-major
    std::span<const double> w_emb() const;
    std::span<double> b_emb();
    std::span<const double> b_emb() const;
    std::span<double> readout_w();         // [d_e]
    std::span<const double> readout_w() const;
    double& readout_b();
    double readout_b() const;

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }

    // Embedding of one sparse row (active slot per tree).
    std::vector<double> embed_active(std::span<const std::size_t> active) const;
    // Readout logit of one sparse row.
    double logit_active(std::span<const std::size_t> active) const;

    bool operator==(const LeafEmbeddingModel&) const = default;

private:
    std::vector<std::size_t> leaf_counts_;
    std::size_t input_width_ = 0;
    std::size_t hidden_ = 0;
    std::size_t d_e_ = 0;
    std::vector<double> flat_;
};

// Dense concatenated one-hot vector for one sample; exactly one 1 per tree.
std::vector<double> leaf_onehot(std::span<const int> leaf_ids,
                                std::span<const std::size_t> leaf_counts);

// Sparse one-hot batch for the rows of X under the model's trees.
LeafOnehotBatch make_onehot_batch(const GBDTModel& model, const Matrix& X);

// q_i = sigmoid(predict_margin(model, x_i)).
SoftTargets soft_targets(const GBDTModel& model, const Matrix& X);

// Minimizes mean soft-target cross-entropy of the readout logit against q by
// minibatch AdamW; deterministic per seed.
struct EmbedTrainResult {
    LeafEmbeddingModel model;
    std::vector<double> epoch_loss;
};
EmbedTrainResult train_leaf_embedding(const LeafOnehotBatch& onehots,
                                      const SoftTargets& q,
                                      const EmbedTrainConfig& config);

// Dense-input embedding (width must match sum of leaf_counts).
std::vector<double> embed(const LeafEmbeddingModel& model,
                          std::span<const double> onehot);

// Embeddings of every batch row, the distillation target matrix.
Matrix distill_targets(const LeafEmbeddingModel& model, const LeafOnehotBatch& batch);

// Mean squared difference between a network output and its embedding target.
double distill_loss(std::span<const double> nn_output, std::span<const double> target);

}  // namespace codmtl
