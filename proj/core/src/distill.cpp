#include "codmtl/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "codmtl/nn.hpp"

namespace codmtl {

LeafEmbeddingModel::LeafEmbeddingModel(std::vector<std::size_t> leaf_counts,
                                       std::size_t hidden, std::size_t d_e,
                                       std::uint64_t seed)
    : leaf_counts_(std::move(leaf_counts)), hidden_(hidden), d_e_(d_e) {
    if (leaf_counts_.empty()) throw ConfigError("leaf embedding: no trees");
    if (hidden_ < 1 || d_e_ < 1) throw ConfigError("leaf embedding: bad sizes");
    input_width_ = std::accumulate(leaf_counts_.begin(), leaf_counts_.end(),
                                   std::size_t{0});
    flat_.assign(input_width_ * hidden_ + hidden_ + d_e_ * hidden_ + d_e_ + d_e_ + 1,
                 0.0);

    Rng rng(seed);
    double bound_in = std::sqrt(6.0 / static_cast<double>(input_width_ + hidden_));
    for (double& w : w_in()) w = rng.uniform(-bound_in, bound_in);
    double bound_emb = std::sqrt(6.0 / static_cast<double>(hidden_ + d_e_));
    for (double& w : w_emb()) w = rng.uniform(-bound_emb, bound_emb);
    double bound_out = std::sqrt(6.0 / static_cast<double>(d_e_ + 1));
    for (double& w : readout_w()) w = rng.uniform(-bound_out, bound_out);
}

std::span<double> LeafEmbeddingModel::w_in() {
    return {flat_.data(), input_width_ * hidden_};
}
std::span<const double> LeafEmbeddingModel::w_in() const {
    return {flat_.data(), input_width_ * hidden_};
}
std::span<double> LeafEmbeddingModel::b_in() {
    return {flat_.data() + input_width_ * hidden_, hidden_};
}
std::span<const double> LeafEmbeddingModel::b_in() const {
    return {flat_.data() + input_width_ * hidden_, hidden_};
}
std::span<double> LeafEmbeddingModel::w_emb() {
    return {flat_.data() + input_width_ * hidden_ + hidden_, d_e_ * hidden_};
}
std::span<const double> LeafEmbeddingModel::w_emb() const {
    return {flat_.data() + input_width_ * hidden_ + hidden_, d_e_ * hidden_};
}
std::span<double> LeafEmbeddingModel::b_emb() {
    return {flat_.data() + input_width_ * hidden_ + hidden_ + d_e_ * hidden_, d_e_};
}
std::span<const double> LeafEmbeddingModel::b_emb() const {
    return {flat_.data() + input_width_ * hidden_ + hidden_ + d_e_ * hidden_, d_e_};
}
std::span<double> LeafEmbeddingModel::readout_w() {
    return {flat_.data() + input_width_ * hidden_ + hidden_ + d_e_ * hidden_ + d_e_,
            d_e_};
}
std::span<const double> LeafEmbeddingModel::readout_w() const {
    return {flat_.data() + input_width_ * hidden_ + hidden_ + d_e_ * hidden_ + d_e_,
            d_e_};
}
double& LeafEmbeddingModel::readout_b() { return flat_.back(); }
double LeafEmbeddingModel::readout_b() const { return flat_.back(); }

namespace {

void hidden_from_active(const LeafEmbeddingModel& m,
                        std::span<const std::size_t> active,
                        std::vector<double>& h) {
    const std::size_t hidden = m.hidden();
    h.assign(m.b_in().begin(), m.b_in().end());
    const double* w = m.w_in().data();
    for (std::size_t slot : active) {
        const double* wrow = w + slot * hidden;
        for (std::size_t j = 0; j < hidden; ++j) h[j] += wrow[j];
    }
    for (double& v : h) v = v > 0.0 ? v : 0.0;
}

void embedding_from_hidden(const LeafEmbeddingModel& m, const std::vector<double>& h,
                           std::vector<double>& e) {
    const std::size_t hidden = m.hidden();
    e.assign(m.b_emb().begin(), m.b_emb().end());
    const double* w = m.w_emb().data();
    for (std::size_t k = 0; k < m.d_e(); ++k) {
        const double* wrow = w + k * hidden;
        double acc = e[k];
        for (std::size_t j = 0; j < hidden; ++j) acc += wrow[j] * h[j];
        e[k] = acc;
    }
}

}  // namespace

std::vector<double> LeafEmbeddingModel::embed_active(
    std::span<const std::size_t> active) const {
    std::vector<double> h, e;
    hidden_from_active(*this, active, h);
    embedding_from_hidden(*this, h, e);
    return e;
}

double LeafEmbeddingModel::logit_active(std::span<const std::size_t> active) const {
    auto e = embed_active(active);
    double z = readout_b();
    auto w = readout_w();
    for (std::size_t k = 0; k < d_e_; ++k) z += w[k] * e[k];
    return z;
}

std::vector<double> leaf_onehot(std::span<const int> leaf_ids,
                                std::span<const std::size_t> leaf_counts) {
    if (leaf_ids.size() != leaf_counts.size()) {
        throw DataError("leaf_onehot: leaf id / leaf count length mismatch");
    }
    std::size_t width = std::accumulate(leaf_counts.begin(), leaf_counts.end(),
                                        std::size_t{0});
    std::vector<double> out(width, 0.0);
    std::size_t offset = 0;
    for (std::size_t t = 0; t < leaf_ids.size(); ++t) {
        int id = leaf_ids[t];
        if (id < 0 || static_cast<std::size_t>(id) >= leaf_counts[t]) {
            throw DataError("leaf_onehot: leaf id out of range in tree " +
                            std::to_string(t));
        }
        out[offset + static_cast<std::size_t>(id)] = 1.0;
        offset += leaf_counts[t];
    }
    return out;
}

LeafOnehotBatch make_onehot_batch(const GBDTModel& model, const Matrix& X) {
    LeafOnehotBatch batch;
    batch.leaf_counts = model.leaf_counts;
    batch.offsets.assign(batch.leaf_counts.size() + 1, 0);
    for (std::size_t t = 0; t < batch.leaf_counts.size(); ++t) {
        batch.offsets[t + 1] = batch.offsets[t] + batch.leaf_counts[t];
    }
    batch.width = batch.offsets.back();
    batch.active.reserve(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        auto ids = leaf_indices(model, X.row(r));
        std::vector<std::size_t> slots(ids.size());
        for (std::size_t t = 0; t < ids.size(); ++t) {
            slots[t] = batch.offsets[t] + static_cast<std::size_t>(ids[t]);
        }
        batch.active.push_back(std::move(slots));
    }
    return batch;
}

SoftTargets soft_targets(const GBDTModel& model, const Matrix& X) {
    SoftTargets t;
    t.q.reserve(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        t.q.push_back(predict_proba(model, X.row(r)));
    }
    return t;
}

EmbedTrainResult train_leaf_embedding(const LeafOnehotBatch& onehots,
                                      const SoftTargets& q,
                                      const EmbedTrainConfig& config) {
    if (onehots.n_rows() == 0) throw DataError("train_leaf_embedding: empty input");
    if (onehots.n_rows() != q.q.size()) {
        throw DataError("train_leaf_embedding: rows/targets mismatch");
    }
    if (config.d_e < 1) throw ConfigError("train_leaf_embedding: d_E must be >= 1");

    EmbedTrainResult result;
    result.model = LeafEmbeddingModel(onehots.leaf_counts, config.hidden, config.d_e,
                                      mix_seed(config.seed, 1));
    auto& m = result.model;

    OptimizerState opt;
    opt.lr = config.lr;
    opt.weight_decay = config.weight_decay;

    const std::size_t n = onehots.n_rows();
    const std::size_t hidden = m.hidden();
    const std::size_t d_e = m.d_e();
    std::vector<double> grads(m.flat().size());
    std::vector<double> h, e, de(d_e), dh(hidden);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng batch_rng(mix_seed(config.seed, 2));

    // Gradient views share the parameter layout.
    const std::size_t off_bin = m.w_in().size();
    const std::size_t off_wemb = off_bin + hidden;
    const std::size_t off_bemb = off_wemb + d_e * hidden;
    const std::size_t off_rw = off_bemb + d_e;
    const std::size_t off_rb = off_rw + d_e;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        batch_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            std::size_t stop = std::min(n, start + config.batch_size);
            double inv_b = 1.0 / static_cast<double>(stop - start);
            std::fill(grads.begin(), grads.end(), 0.0);

            for (std::size_t s = start; s < stop; ++s) {
                const auto& active = onehots.active[order[s]];
                const double target = q.q[order[s]];

                hidden_from_active(m, active, h);
                embedding_from_hidden(m, h, e);
                double z = m.readout_b();
                for (std::size_t k = 0; k < d_e; ++k) z += m.readout_w()[k] * e[k];

                epoch_loss += bce_logit(z, target);
                double dz = (sigmoid(z) - target) * inv_b;

                for (std::size_t k = 0; k < d_e; ++k) {
                    grads[off_rw + k] += dz * e[k];
                    de[k] = dz * m.readout_w()[k];
                }
                grads[off_rb] += dz;

                std::fill(dh.begin(), dh.end(), 0.0);
                const double* wemb = m.w_emb().data();
                for (std::size_t k = 0; k < d_e; ++k) {
                    const double dek = de[k];
                    double* grow = grads.data() + off_wemb + k * hidden;
                    const double* wrow = wemb + k * hidden;
                    for (std::size_t j = 0; j < hidden; ++j) {
                        grow[j] += dek * h[j];
                        dh[j] += dek * wrow[j];
                    }
                    grads[off_bemb + k] += dek;
                }
                for (std::size_t j = 0; j < hidden; ++j) {
                    if (h[j] <= 0.0) dh[j] = 0.0;  // relu mask
                    grads[off_bin + j] += dh[j];
                }
                for (std::size_t slot : active) {
                    double* grow = grads.data() + slot * hidden;
                    for (std::size_t j = 0; j < hidden; ++j) grow[j] += dh[j];
                }
            }
            adamw_step(m.flat(), grads, opt);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("train_leaf_embedding: non-finite loss");
        }
        result.epoch_loss.push_back(epoch_loss);
    }
    return result;
}

std::vector<double> embed(const LeafEmbeddingModel& model,
                          std::span<const double> onehot) {
    if (onehot.size() != model.input_width()) {
        throw DataError("embed: one-hot width mismatch");
    }
    const std::size_t hidden = model.hidden();
    std::vector<double> h(model.b_in().begin(), model.b_in().end());
    const double* w = model.w_in().data();
    for (std::size_t i = 0; i < onehot.size(); ++i) {
        const double x = onehot[i];
        if (x == 0.0) continue;
        const double* wrow = w + i * hidden;
        for (std::size_t j = 0; j < hidden; ++j) h[j] += x * wrow[j];
    }
    for (double& v : h) v = v > 0.0 ? v : 0.0;
    std::vector<double> e;
    embedding_from_hidden(model, h, e);
    return e;
}

Matrix distill_targets(const LeafEmbeddingModel& model, const LeafOnehotBatch& batch) {
    Matrix targets(batch.n_rows(), model.d_e());
    for (std::size_t r = 0; r < batch.n_rows(); ++r) {
        auto e = model.embed_active(batch.active[r]);
        std::copy(e.begin(), e.end(), targets.row(r).begin());
    }
    return targets;
}

double distill_loss(std::span<const double> nn_output, std::span<const double> target) {
    if (nn_output.size() != target.size() || nn_output.empty()) {
        throw DataError("distill_loss: length mismatch");
    }
    return mse(nn_output, target);
}

}  // namespace codmtl
