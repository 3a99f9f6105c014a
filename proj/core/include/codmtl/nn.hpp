#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codmtl/common.hpp"

namespace codmtl {

enum class Activation { Relu, Identity, Sigmoid };

// Layer sizes from input to output plus one activation per affine layer.
struct NetSpec {
    std::vector<std::size_t> layer_sizes;
    std::vector<Activation> activations;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t n_layers() const { return activations.size(); }
    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }
};

// All parameters live in one flat vector; per-layer weight matrices are
// [out x in] row-major views into it, followed by the bias vector.
class NetParams {
public:
    NetParams() = default;
    explicit NetParams(const NetSpec& spec);

    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> biases(std::size_t layer);
    std::span<const double> biases(std::size_t layer) const;

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }

    std::size_t n_layers() const { return in_sizes_.size(); }
    std::size_t in_size(std::size_t layer) const { return in_sizes_[layer]; }
    std::size_t out_size(std::size_t layer) const { return out_sizes_[layer]; }

    bool operator==(const NetParams&) const = default;

private:
    std::vector<std::size_t> in_sizes_, out_sizes_;
    std::vector<std::size_t> w_offsets_, b_offsets_;
    std::vector<double> flat_;
};

// Seeded fan-based uniform weights, zero biases.
NetParams init_params(const NetSpec& spec);

// Post-activation outputs of every layer, final output last.
std::vector<std::vector<double>> forward(const NetParams& params, const NetSpec& spec,
                                         std::span<const double> x);

// Reusable buffer variant for hot loops.
struct ForwardBuffer {
    std::vector<std::vector<double>> acts;
};
void forward_into(const NetParams& params, const NetSpec& spec,
                  std::span<const double> x, ForwardBuffer& buf);

struct NetGradients {
    std::vector<double> flat;        // same layout as NetParams::flat
    std::vector<double> input_grad;  // d(output . upstream) / dx
};

// Exact reverse-mode gradients of output . upstream.
NetGradients grad(const NetParams& params, const NetSpec& spec,
                  std::span<const double> x, std::span<const double> upstream);

// Accumulating backward over precomputed activations; adds into grad_flat and
// optionally reports the input gradient. upstream is consumed as scratch.
void backward_accumulate(const NetParams& params, const NetSpec& spec,
                         std::span<const double> x, const ForwardBuffer& acts,
                         std::vector<double>& upstream, std::vector<double>& grad_flat,
                         std::vector<double>* input_grad = nullptr);

// Decoupled weight decay Adam. Moments sized on first use.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void adamw_step(std::span<double> params, std::span<const double> grads,
                OptimizerState& state);

// ----------------------------------------------------------------------------
// Loss primitives on logits. Soft targets q in [0,1] are allowed everywhere a
// hard label is.
// ----------------------------------------------------------------------------

// -[q log s(z) + (1-q) log(1-s(z))], evaluated stably.
double bce_logit(double z, double q);
// d bce_logit / dz
inline double bce_logit_grad(double z, double q) { return sigmoid(z) - q; }

double mse(std::span<const double> a, std::span<const double> b);

}  // namespace codmtl
