#include "codmtl/nn.hpp"

#include <algorithm>
#include <cmath>

namespace codmtl {

void NetSpec::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("NetSpec needs >= 2 layer sizes");
    for (std::size_t s : layer_sizes) {
        if (s < 1) throw ConfigError("NetSpec layer sizes must be >= 1");
    }
    if (activations.size() != layer_sizes.size() - 1) {
        throw ConfigError("NetSpec needs one activation per affine layer");
    }
}

NetParams::NetParams(const NetSpec& spec) {
    spec.validate();
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        std::size_t in = spec.layer_sizes[l];
        std::size_t out = spec.layer_sizes[l + 1];
        in_sizes_.push_back(in);
        out_sizes_.push_back(out);
        w_offsets_.push_back(offset);
        offset += in * out;
        b_offsets_.push_back(offset);
        offset += out;
    }
    flat_.assign(offset, 0.0);
}

std::span<double> NetParams::weights(std::size_t layer) {
    return {flat_.data() + w_offsets_[layer], in_sizes_[layer] * out_sizes_[layer]};
}

std::span<const double> NetParams::weights(std::size_t layer) const {
    return {flat_.data() + w_offsets_[layer], in_sizes_[layer] * out_sizes_[layer]};
}

std::span<double> NetParams::biases(std::size_t layer) {
    return {flat_.data() + b_offsets_[layer], out_sizes_[layer]};
}

std::span<const double> NetParams::biases(std::size_t layer) const {
    return {flat_.data() + b_offsets_[layer], out_sizes_[layer]};
}

NetParams init_params(const NetSpec& spec) {
    NetParams params(spec);
    Rng rng(spec.seed);
    for (std::size_t l = 0; l < params.n_layers(); ++l) {
        double bound = std::sqrt(6.0 / static_cast<double>(params.in_size(l) +
                                                           params.out_size(l)));
        for (double& w : params.weights(l)) w = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return params;
}

namespace {

void apply_activation(Activation act, std::span<double> v) {
    switch (act) {
        case Activation::Relu:
            for (double& x : v) x = x > 0.0 ? x : 0.0;
            break;
        case Activation::Sigmoid:
            for (double& x : v) x = sigmoid(x);
            break;
        case Activation::Identity:
            break;
    }
}

// Derivative expressed through the post-activation value.
double activation_grad(Activation act, double out) {
    switch (act) {
        case Activation::Relu: return out > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return out * (1.0 - out);
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

void forward_into(const NetParams& params, const NetSpec& spec,
                  std::span<const double> x, ForwardBuffer& buf) {
    if (x.size() != spec.input_size()) {
        throw ConfigError("forward: input size mismatch");
    }
    buf.acts.resize(spec.n_layers());
    std::span<const double> in = x;
    for (std::size_t l = 0; l < spec.n_layers(); ++l) {
        auto& out = buf.acts[l];
        out.assign(params.biases(l).begin(), params.biases(l).end());
        const double* w = params.weights(l).data();
        const std::size_t in_n = params.in_size(l);
        for (std::size_t o = 0; o < out.size(); ++o) {
            const double* wrow = w + o * in_n;
            double acc = out[o];
            for (std::size_t i = 0; i < in_n; ++i) acc += wrow[i] * in[i];
            out[o] = acc;
        }
        apply_activation(spec.activations[l], out);
        in = out;
    }
}

std::vector<std::vector<double>> forward(const NetParams& params, const NetSpec& spec,
                                         std::span<const double> x) {
    ForwardBuffer buf;
    forward_into(params, spec, x, buf);
    return std::move(buf.acts);
}

void backward_accumulate(const NetParams& params, const NetSpec& spec,
                         std::span<const double> x, const ForwardBuffer& acts,
                         std::vector<double>& upstream, std::vector<double>& grad_flat,
                         std::vector<double>* input_grad) {
    if (upstream.size() != spec.output_size()) {
        throw ConfigError("backward: upstream size mismatch");
    }
    grad_flat.resize(params.flat().size(), 0.0);

    // Gradient flat vector shares the NetParams layout; rebuild layer offsets.
    std::size_t offset = params.flat().size();
    std::vector<double> delta = std::move(upstream);
    std::vector<double> next_delta;
    for (std::size_t l = spec.n_layers(); l-- > 0;) {
        const std::size_t in_n = params.in_size(l);
        const std::size_t out_n = params.out_size(l);
        offset -= in_n * out_n + out_n;
        double* gw = grad_flat.data() + offset;
        double* gb = gw + in_n * out_n;

        const auto& out = acts.acts[l];
        for (std::size_t o = 0; o < out_n; ++o) {
            delta[o] *= activation_grad(spec.activations[l], out[o]);
        }

        std::span<const double> in =
            l == 0 ? x : std::span<const double>(acts.acts[l - 1]);
        const double* w = params.weights(l).data();

        bool want_input = l > 0 || input_grad != nullptr;
        if (want_input) {
            next_delta.assign(in_n, 0.0);
        }
        for (std::size_t o = 0; o < out_n; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            double* gwrow = gw + o * in_n;
            const double* wrow = w + o * in_n;
            for (std::size_t i = 0; i < in_n; ++i) {
                gwrow[i] += d * in[i];
            }
            if (want_input) {
                for (std::size_t i = 0; i < in_n; ++i) {
                    next_delta[i] += d * wrow[i];
                }
            }
            gb[o] += d;
        }
        delta = std::move(next_delta);
        next_delta.clear();
    }
    if (input_grad != nullptr) *input_grad = std::move(delta);
}

NetGradients grad(const NetParams& params, const NetSpec& spec,
                  std::span<const double> x, std::span<const double> upstream) {
    ForwardBuffer buf;
    forward_into(params, spec, x, buf);
    NetGradients g;
    g.flat.assign(params.flat().size(), 0.0);
    std::vector<double> up(upstream.begin(), upstream.end());
    backward_accumulate(params, spec, x, buf, up, g.flat, &g.input_grad);
    return g;
}

void adamw_step(std::span<double> params, std::span<const double> grads,
                OptimizerState& state) {
    if (params.size() != grads.size()) {
        throw ConfigError("adamw_step: parameter/gradient size mismatch");
    }
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) {
        throw ConfigError("adamw_step: optimizer state size mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.epsilon) +
                                 state.weight_decay * params[i]);
    }
}

double bce_logit(double z, double q) {
    // log(1 + e^z) - q z, rearranged to avoid overflow for |z| large.
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - q * z;
}

double mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw ConfigError("mse: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace codmtl
