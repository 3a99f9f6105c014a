#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "codmtl/common.hpp"
#include "codmtl/dataset.hpp"
#include "codmtl/distill.hpp"
#include "codmtl/gbdt.hpp"
#include "codmtl/nn.hpp"

namespace codmtl {

struct MTLConfig {
    std::vector<double> alpha;  // per task; size 1 broadcasts
    std::vector<double> beta;
    std::vector<double> gamma;
    std::size_t epochs = 100;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::size_t batch_size = 128;
    std::size_t hidden = 100;
    std::uint64_t seed = 0;

    double alpha_of(std::size_t j) const;
    double beta_of(std::size_t j) const;
    double gamma_of(std::size_t j) const;
    void validate(std::size_t n_tasks) const;
};

struct TaskHead {
    std::vector<double> w;  // [hidden]
    double b = 0.0;
};

// Linear map from the trunk output to a task's embedding target space.
struct TaskProjection {
    Matrix w;               // [d_e x hidden]
    std::vector<double> b;  // [d_e]
};

// Shared trunk over the union of tree-selected features, with one projection
// (distillation output) and one prediction head per task. The plain
// hard-sharing baseline is the same structure without projections.
struct CoDMTLModel {
    std::vector<std::size_t> feature_union;  // sorted indices into the full space
    std::size_t full_width = 0;
    NetSpec trunk_spec;
    NetParams trunk;
    std::vector<TaskHead> heads;
    std::vector<TaskProjection> projections;  // empty when not distilling

    std::size_t n_tasks() const { return heads.size(); }
    void restrict_row(std::span<const double> x, std::vector<double>& out) const;
};

struct TrainHistory {
    std::vector<double> total;  // per epoch
    Matrix task_ce;             // [epochs x M]
    Matrix task_distill;        // [epochs x M]
};

// Trunk on the union of per-task selected features, projections sized to each
// task's embedding dimension; deterministic init per config.seed.
CoDMTLModel build_codmtl(const std::vector<GBDTModel>& task_gbdts,
                         const std::vector<LeafEmbeddingModel>& embeddings,
                         const MTLConfig& config,
                         std::optional<std::size_t> top_k = {});

// Same trunk/head construction and seed derivation without projections.
// feature_subset empty means all features.
CoDMTLModel build_plain_mtl(std::size_t full_width, std::size_t n_tasks,
                            const MTLConfig& config,
                            std::vector<std::size_t> feature_subset = {});

std::vector<double> trunk_output(const CoDMTLModel& model, std::span<const double> x);

// sigmoid(head_j . trunk(x[feature_union]) + b_j)
double forward_task(const CoDMTLModel& model, std::span<const double> x,
                    std::size_t task);

// One trunk evaluation shared by all heads.
std::vector<double> predict_probs(const CoDMTLModel& model, std::span<const double> x);
std::vector<double> predict_logits(const CoDMTLModel& model, std::span<const double> x);

struct LossBreakdown {
    double total = 0.0;
    std::vector<double> task_ce;
    std::vector<double> task_distill;
};

// Mean Eq-style multi-task loss over full-width batch rows: for each task,
// alpha * (beta * CE + gamma * MSE-vs-embedding-target).
LossBreakdown multitask_loss(const CoDMTLModel& model, const Matrix& X,
                             const Matrix& labels,
                             const std::vector<Matrix>& targets,
                             const MTLConfig& config);

// Minibatch AdamW over the fold's training rows; targets are per-task
// embedding matrices aligned with fold.train_rows.
TrainHistory train_codmtl(CoDMTLModel& model, const Cohort& cohort,
                          const FoldSplit& fold, const std::vector<Matrix>& targets,
                          const MTLConfig& config);

// Core trainer on already-restricted rows (X columns match the trunk input).
TrainHistory train_mtl_core(CoDMTLModel& model, const Matrix& X_restricted,
                            const Matrix& labels, const std::vector<Matrix>& targets,
                            const MTLConfig& config);

// ----------------------------------------------------------------------------
// Baselines
// ----------------------------------------------------------------------------

struct LinearModel {
    NetSpec spec;
    NetParams params;
};

double logreg_predict(const LinearModel& model, std::span<const double> x);

struct LogRegHistory {
    std::vector<double> epoch_loss;
};

LinearModel train_logreg(const Matrix& X, std::span<const double> y,
                         const MTLConfig& config, LogRegHistory* history = nullptr);

// One-hidden-layer single-task net: the M = 1 plain MTL model.
CoDMTLModel train_mlp_single(const Matrix& X, std::span<const double> y,
                             const MTLConfig& config, TrainHistory* history = nullptr);

CoDMTLModel train_mtl_plain(const Matrix& X, const Matrix& labels,
                            const MTLConfig& config, TrainHistory* history = nullptr,
                            std::vector<std::size_t> feature_subset = {});

enum class BaselineKind { LogReg, MlpSingle, MtlPlain };

using BaselineModel = std::variant<LinearModel, CoDMTLModel>;

// Task index is required for the single-task kinds and ignored for MtlPlain.
BaselineModel train_baseline(BaselineKind kind, const Cohort& cohort,
                             const FoldSplit& fold,
                             std::optional<std::size_t> task_index,
                             const MTLConfig& config);

}  // namespace codmtl
