#include "codmtl/mtl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace codmtl {

namespace {

// Sub-stream tags so the trunk/head draws are identical across model kinds
// that must reduce to one another.
constexpr std::uint64_t kTrunkTag = 1;
constexpr std::uint64_t kBatchTag = 3;
constexpr std::uint64_t kHeadTag = 100;
constexpr std::uint64_t kProjTag = 200;

double broadcast(const std::vector<double>& v, std::size_t j, double fallback) {
    if (v.empty()) return fallback;
    if (v.size() == 1) return v[0];
    return v.at(j);
}

}  // namespace

double MTLConfig::alpha_of(std::size_t j) const { return broadcast(alpha, j, 1.0); }
double MTLConfig::beta_of(std::size_t j) const { return broadcast(beta, j, 1.0); }
double MTLConfig::gamma_of(std::size_t j) const { return broadcast(gamma, j, 1.0); }

void MTLConfig::validate(std::size_t n_tasks) const {
    auto check_size = [&](const std::vector<double>& v, const char* name) {
        if (!v.empty() && v.size() != 1 && v.size() != n_tasks) {
            throw ConfigError(std::string("mtl: ") + name +
                              " must have 1 or n_tasks entries");
        }
        for (double x : v) {
            if (x < 0.0) throw ConfigError(std::string("mtl: ") + name + " must be >= 0");
        }
    };
    check_size(alpha, "alpha");
    check_size(beta, "beta");
    check_size(gamma, "gamma");
    for (std::size_t j = 0; j < n_tasks; ++j) {
        if (beta_of(j) <= 0.0 && gamma_of(j) <= 0.0) {
            throw ConfigError("mtl: task " + std::to_string(j) +
                              " needs beta or gamma positive");
        }
    }
    if (epochs < 1) throw ConfigError("mtl: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("mtl: batch_size must be >= 1");
    if (hidden < 1) throw ConfigError("mtl: hidden width must be >= 1");
    if (lr <= 0.0) throw ConfigError("mtl: lr must be > 0");
}

void CoDMTLModel::restrict_row(std::span<const double> x,
                               std::vector<double>& out) const {
    if (x.size() != full_width) throw DataError("mtl: row width mismatch");
    out.resize(feature_union.size());
    for (std::size_t i = 0; i < feature_union.size(); ++i) {
        out[i] = x[feature_union[i]];
    }
}

namespace {

CoDMTLModel build_shared(std::size_t full_width, std::vector<std::size_t> features,
                         std::size_t n_tasks, const MTLConfig& config,
                         const std::vector<std::size_t>& proj_dims) {
    if (features.empty()) throw ConfigError("mtl: empty feature set");
    if (n_tasks < 1) throw ConfigError("mtl: needs at least one task");
    config.validate(n_tasks);

    CoDMTLModel model;
    model.full_width = full_width;
    model.feature_union = std::move(features);

    model.trunk_spec.layer_sizes = {model.feature_union.size(), config.hidden};
    model.trunk_spec.activations = {Activation::Relu};
    model.trunk_spec.seed = mix_seed(config.seed, kTrunkTag);
    model.trunk = init_params(model.trunk_spec);

    const double head_bound = std::sqrt(6.0 / static_cast<double>(config.hidden + 1));
    for (std::size_t j = 0; j < n_tasks; ++j) {
        TaskHead head;
        head.w.resize(config.hidden);
        Rng rng(mix_seed(config.seed, kHeadTag + j));
        for (double& w : head.w) w = rng.uniform(-head_bound, head_bound);
        model.heads.push_back(std::move(head));
    }

    for (std::size_t j = 0; j < proj_dims.size(); ++j) {
        TaskProjection proj;
        const std::size_t d_e = proj_dims[j];
        proj.w = Matrix(d_e, config.hidden);
        proj.b.assign(d_e, 0.0);
        double bound = std::sqrt(6.0 / static_cast<double>(config.hidden + d_e));
        Rng rng(mix_seed(config.seed, kProjTag + j));
        for (double& w : proj.w.data()) w = rng.uniform(-bound, bound);
        model.projections.push_back(std::move(proj));
    }
    return model;
}

}  // namespace

CoDMTLModel build_codmtl(const std::vector<GBDTModel>& task_gbdts,
                         const std::vector<LeafEmbeddingModel>& embeddings,
                         const MTLConfig& config, std::optional<std::size_t> top_k) {
    if (task_gbdts.empty()) throw ConfigError("build_codmtl: no tasks");
    if (task_gbdts.size() != embeddings.size()) {
        throw ConfigError("build_codmtl: gbdt/embedding list length mismatch");
    }
    const std::size_t width = task_gbdts.front().n_features;
    for (const auto& g : task_gbdts) {
        if (g.n_features != width) {
            throw ConfigError("build_codmtl: GBDTs trained on different feature spaces");
        }
    }

    std::vector<std::size_t> union_set;
    for (const auto& g : task_gbdts) {
        auto sel = selected_features(g, top_k);
        union_set.insert(union_set.end(), sel.begin(), sel.end());
    }
    std::sort(union_set.begin(), union_set.end());
    union_set.erase(std::unique(union_set.begin(), union_set.end()), union_set.end());
    if (union_set.empty()) throw ConfigError("build_codmtl: empty feature union");

    std::vector<std::size_t> proj_dims;
    for (const auto& e : embeddings) proj_dims.push_back(e.d_e());

    return build_shared(width, std::move(union_set), task_gbdts.size(), config,
                        proj_dims);
}

CoDMTLModel build_plain_mtl(std::size_t full_width, std::size_t n_tasks,
                            const MTLConfig& config,
                            std::vector<std::size_t> feature_subset) {
    if (feature_subset.empty()) {
        feature_subset.resize(full_width);
        std::iota(feature_subset.begin(), feature_subset.end(), 0u);
    }
    return build_shared(full_width, std::move(feature_subset), n_tasks, config, {});
}

std::vector<double> trunk_output(const CoDMTLModel& model, std::span<const double> x) {
    std::vector<double> restricted;
    model.restrict_row(x, restricted);
    auto acts = forward(model.trunk, model.trunk_spec, restricted);
    return std::move(acts.back());
}

double forward_task(const CoDMTLModel& model, std::span<const double> x,
                    std::size_t task) {
    if (task >= model.n_tasks()) throw ConfigError("forward_task: bad task index");
    auto t = trunk_output(model, x);
    const auto& head = model.heads[task];
    double z = head.b;
    for (std::size_t i = 0; i < t.size(); ++i) z += head.w[i] * t[i];
    return sigmoid(z);
}

std::vector<double> predict_logits(const CoDMTLModel& model,
                                   std::span<const double> x) {
    auto t = trunk_output(model, x);
    std::vector<double> out(model.n_tasks());
    for (std::size_t j = 0; j < model.n_tasks(); ++j) {
        const auto& head = model.heads[j];
        double z = head.b;
        for (std::size_t i = 0; i < t.size(); ++i) z += head.w[i] * t[i];
        out[j] = z;
    }
    return out;
}

std::vector<double> predict_probs(const CoDMTLModel& model, std::span<const double> x) {
    auto out = predict_logits(model, x);
    for (double& z : out) z = sigmoid(z);
    return out;
}

LossBreakdown multitask_loss(const CoDMTLModel& model, const Matrix& X,
                             const Matrix& labels,
                             const std::vector<Matrix>& targets,
                             const MTLConfig& config) {
    const std::size_t m = model.n_tasks();
    config.validate(m);
    if (X.rows() != labels.rows() || labels.cols() != m) {
        throw DataError("multitask_loss: batch misaligned");
    }
    const bool with_targets = !targets.empty();
    if (with_targets) {
        if (targets.size() != m) throw DataError("multitask_loss: targets per task");
        for (std::size_t j = 0; j < m; ++j) {
            if (!model.projections.empty() && targets[j].rows() != X.rows()) {
                throw DataError("multitask_loss: target rows misaligned");
            }
        }
    }

    LossBreakdown out;
    out.task_ce.assign(m, 0.0);
    out.task_distill.assign(m, 0.0);

    std::vector<double> restricted, p;
    ForwardBuffer buf;
    for (std::size_t r = 0; r < X.rows(); ++r) {
        model.restrict_row(X.row(r), restricted);
        forward_into(model.trunk, model.trunk_spec, restricted, buf);
        const auto& t = buf.acts.back();
        for (std::size_t j = 0; j < m; ++j) {
            const auto& head = model.heads[j];
            double z = head.b;
            for (std::size_t i = 0; i < t.size(); ++i) z += head.w[i] * t[i];
            out.task_ce[j] += bce_logit(z, labels(r, j));

            if (with_targets && j < model.projections.size()) {
                const auto& proj = model.projections[j];
                const std::size_t d_e = proj.b.size();
                p.resize(d_e);
                for (std::size_t k = 0; k < d_e; ++k) {
                    double acc = proj.b[k];
                    const double* wrow = proj.w.data().data() + k * t.size();
                    for (std::size_t i = 0; i < t.size(); ++i) acc += wrow[i] * t[i];
                    p[k] = acc;
                }
                out.task_distill[j] += mse(p, targets[j].row(r));
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(X.rows());
    out.total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        out.task_ce[j] *= inv_n;
        out.task_distill[j] *= inv_n;
        out.total += config.alpha_of(j) * (config.beta_of(j) * out.task_ce[j] +
                                           config.gamma_of(j) * out.task_distill[j]);
    }
    return out;
}

TrainHistory train_mtl_core(CoDMTLModel& model, const Matrix& X, const Matrix& labels,
                            const std::vector<Matrix>& targets,
                            const MTLConfig& config) {
    const std::size_t m = model.n_tasks();
    const std::size_t n = X.rows();
    const std::size_t hidden = config.hidden;
    config.validate(m);
    if (n == 0) throw DataError("mtl training: empty training set");
    if (X.cols() != model.feature_union.size()) {
        throw DataError("mtl training: X not restricted to the model's features");
    }
    if (labels.rows() != n || labels.cols() != m) {
        throw DataError("mtl training: label shape mismatch");
    }
    const bool distilling = !model.projections.empty() && !targets.empty();
    if (distilling) {
        if (targets.size() != m) throw DataError("mtl training: one target per task");
        for (std::size_t j = 0; j < m; ++j) {
            if (targets[j].rows() != n ||
                targets[j].cols() != model.projections[j].b.size()) {
                throw DataError("mtl training: target shape mismatch");
            }
        }
    }

    // Trainer-local contiguous parameter blocks, one optimizer state each.
    OptimizerState trunk_opt;
    trunk_opt.lr = config.lr;
    trunk_opt.weight_decay = config.weight_decay;
    std::vector<std::vector<double>> head_par(m), head_grad(m);
    std::vector<OptimizerState> head_opt(m, trunk_opt);
    for (std::size_t j = 0; j < m; ++j) {
        head_par[j] = model.heads[j].w;
        head_par[j].push_back(model.heads[j].b);
        head_grad[j].assign(hidden + 1, 0.0);
    }
    std::vector<std::vector<double>> proj_par, proj_grad;
    std::vector<OptimizerState> proj_opt;
    std::vector<std::size_t> proj_de;
    if (distilling) {
        for (std::size_t j = 0; j < m; ++j) {
            const auto& proj = model.projections[j];
            std::vector<double> par = proj.w.data();
            par.insert(par.end(), proj.b.begin(), proj.b.end());
            proj_grad.emplace_back(par.size(), 0.0);
            proj_par.push_back(std::move(par));
            proj_opt.push_back(trunk_opt);
            proj_de.push_back(proj.b.size());
        }
    }
    std::vector<double> trunk_grad(model.trunk.flat().size(), 0.0);

    TrainHistory history;
    history.task_ce = Matrix(config.epochs, m);
    history.task_distill = Matrix(config.epochs, m);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng batch_rng(mix_seed(config.seed, kBatchTag));

    ForwardBuffer buf;
    std::vector<double> upstream(hidden);
    std::vector<double> p;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        batch_rng.shuffle(order);
        std::vector<double> sum_ce(m, 0.0), sum_mse(m, 0.0);

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            std::fill(trunk_grad.begin(), trunk_grad.end(), 0.0);
            for (auto& g : head_grad) std::fill(g.begin(), g.end(), 0.0);
            for (auto& g : proj_grad) std::fill(g.begin(), g.end(), 0.0);

            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t r = order[s];
                forward_into(model.trunk, model.trunk_spec, X.row(r), buf);
                const auto& t = buf.acts.back();
                upstream.assign(hidden, 0.0);

                for (std::size_t j = 0; j < m; ++j) {
                    const double* hw = head_par[j].data();
                    double z = head_par[j][hidden];
                    for (std::size_t i = 0; i < hidden; ++i) z += hw[i] * t[i];
                    sum_ce[j] += bce_logit(z, labels(r, j));

                    const double dz = (sigmoid(z) - labels(r, j)) *
                                      (config.alpha_of(j) * config.beta_of(j) * inv_b);
                    double* hg = head_grad[j].data();
                    for (std::size_t i = 0; i < hidden; ++i) {
                        hg[i] += dz * t[i];
                        upstream[i] += dz * hw[i];
                    }
                    head_grad[j][hidden] += dz;

                    if (!distilling) continue;
                    const std::size_t d_e = proj_de[j];
                    const double* pw = proj_par[j].data();
                    const double* pb = pw + d_e * hidden;
                    auto target = targets[j].row(r);
                    p.resize(d_e);
                    double msev = 0.0;
                    for (std::size_t k = 0; k < d_e; ++k) {
                        double acc = pb[k];
                        const double* wrow = pw + k * hidden;
                        for (std::size_t i = 0; i < hidden; ++i) acc += wrow[i] * t[i];
                        p[k] = acc;
                        const double diff = acc - target[k];
                        msev += diff * diff;
                    }
                    msev /= static_cast<double>(d_e);
                    sum_mse[j] += msev;

                    const double gamma = config.gamma_of(j);
                    if (gamma == 0.0) continue;
                    const double coeff = config.alpha_of(j) * gamma * inv_b * 2.0 /
                                         static_cast<double>(d_e);
                    double* pg = proj_grad[j].data();
                    double* pgb = pg + d_e * hidden;
                    for (std::size_t k = 0; k < d_e; ++k) {
                        const double dp = coeff * (p[k] - target[k]);
                        double* grow = pg + k * hidden;
                        const double* wrow = pw + k * hidden;
                        for (std::size_t i = 0; i < hidden; ++i) {
                            grow[i] += dp * t[i];
                            upstream[i] += dp * wrow[i];
                        }
                        pgb[k] += dp;
                    }
                }
                backward_accumulate(model.trunk, model.trunk_spec, X.row(r), buf,
                                    upstream, trunk_grad);
            }

            adamw_step(model.trunk.flat(), trunk_grad, trunk_opt);
            for (std::size_t j = 0; j < m; ++j) {
                adamw_step(head_par[j], head_grad[j], head_opt[j]);
            }
            for (std::size_t j = 0; j < proj_par.size(); ++j) {
                adamw_step(proj_par[j], proj_grad[j], proj_opt[j]);
            }
        }

        const double inv_n = 1.0 / static_cast<double>(n);
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double ce = sum_ce[j] * inv_n;
            const double ms = sum_mse[j] * inv_n;
            history.task_ce(epoch, j) = ce;
            history.task_distill(epoch, j) = ms;
            total += config.alpha_of(j) *
                     (config.beta_of(j) * ce + config.gamma_of(j) * ms);
        }
        if (!std::isfinite(total)) throw NumericError("mtl training: non-finite loss");
        history.total.push_back(total);
    }

    for (std::size_t j = 0; j < m; ++j) {
        std::copy(head_par[j].begin(), head_par[j].begin() + hidden,
                  model.heads[j].w.begin());
        model.heads[j].b = head_par[j][hidden];
    }
    for (std::size_t j = 0; j < proj_par.size(); ++j) {
        auto& proj = model.projections[j];
        const std::size_t d_e = proj_de[j];
        std::copy(proj_par[j].begin(), proj_par[j].begin() + d_e * hidden,
                  proj.w.data().begin());
        std::copy(proj_par[j].begin() + d_e * hidden, proj_par[j].end(),
                  proj.b.begin());
    }
    return history;
}

TrainHistory train_codmtl(CoDMTLModel& model, const Cohort& cohort,
                          const FoldSplit& fold, const std::vector<Matrix>& targets,
                          const MTLConfig& config) {
    if (fold.train_rows.empty()) throw DataError("train_codmtl: empty training fold");
    Matrix x = take_rows(restrict_columns(cohort.X, model.feature_union),
                         fold.train_rows);
    Matrix y = take_rows(cohort.Y, fold.train_rows);
    return train_mtl_core(model, x, y, targets, config);
}

double logreg_predict(const LinearModel& model, std::span<const double> x) {
    auto acts = forward(model.params, model.spec, x);
    return sigmoid(acts.back()[0]);
}

LinearModel train_logreg(const Matrix& X, std::span<const double> y,
                         const MTLConfig& config, LogRegHistory* history) {
    if (X.rows() == 0) throw DataError("train_logreg: empty training set");
    if (X.rows() != y.size()) throw DataError("train_logreg: X/y mismatch");

    LinearModel model;
    model.spec.layer_sizes = {X.cols(), 1};
    model.spec.activations = {Activation::Identity};
    model.spec.seed = mix_seed(config.seed, kTrunkTag);
    model.params = init_params(model.spec);

    OptimizerState opt;
    opt.lr = config.lr;
    opt.weight_decay = config.weight_decay;

    const std::size_t n = X.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng batch_rng(mix_seed(config.seed, kBatchTag));

    std::vector<double> grad(model.params.flat().size());
    std::vector<double> upstream(1);
    ForwardBuffer buf;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        batch_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t r = order[s];
                forward_into(model.params, model.spec, X.row(r), buf);
                const double z = buf.acts.back()[0];
                epoch_loss += bce_logit(z, y[r]);
                upstream.assign(1, (sigmoid(z) - y[r]) * inv_b);
                backward_accumulate(model.params, model.spec, X.row(r), buf, upstream,
                                    grad);
            }
            adamw_step(model.params.flat(), grad, opt);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) throw NumericError("train_logreg: non-finite loss");
        if (history != nullptr) history->epoch_loss.push_back(epoch_loss);
    }
    return model;
}

CoDMTLModel train_mlp_single(const Matrix& X, std::span<const double> y,
                             const MTLConfig& config, TrainHistory* history) {
    if (X.rows() != y.size()) throw DataError("train_mlp_single: X/y mismatch");
    CoDMTLModel model = build_plain_mtl(X.cols(), 1, config);
    Matrix labels(X.rows(), 1);
    for (std::size_t r = 0; r < X.rows(); ++r) labels(r, 0) = y[r];
    auto h = train_mtl_core(model, X, labels, {}, config);
    if (history != nullptr) *history = std::move(h);
    return model;
}

CoDMTLModel train_mtl_plain(const Matrix& X, const Matrix& labels,
                            const MTLConfig& config, TrainHistory* history,
                            std::vector<std::size_t> feature_subset) {
    CoDMTLModel model =
        build_plain_mtl(X.cols(), labels.cols(), config, std::move(feature_subset));
    Matrix x = model.feature_union.size() == X.cols()
                   ? X
                   : restrict_columns(X, model.feature_union);
    auto h = train_mtl_core(model, x, labels, {}, config);
    if (history != nullptr) *history = std::move(h);
    return model;
}

BaselineModel train_baseline(BaselineKind kind, const Cohort& cohort,
                             const FoldSplit& fold,
                             std::optional<std::size_t> task_index,
                             const MTLConfig& config) {
    if (fold.train_rows.empty()) throw DataError("train_baseline: empty training fold");
    Matrix x = take_rows(cohort.X, fold.train_rows);
    switch (kind) {
        case BaselineKind::LogReg:
        case BaselineKind::MlpSingle: {
            if (!task_index || *task_index >= cohort.n_tasks()) {
                throw ConfigError("train_baseline: single-task kind needs a task index");
            }
            std::vector<double> y(fold.train_rows.size());
            for (std::size_t i = 0; i < y.size(); ++i) {
                y[i] = cohort.Y(fold.train_rows[i], *task_index);
            }
            if (kind == BaselineKind::LogReg) return train_logreg(x, y, config);
            return train_mlp_single(x, y, config);
        }
        case BaselineKind::MtlPlain: {
            Matrix labels = take_rows(cohort.Y, fold.train_rows);
            return train_mtl_plain(x, labels, config);
        }
    }
    throw ConfigError("train_baseline: invalid kind");
}

}  // namespace codmtl
