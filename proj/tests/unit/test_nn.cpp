#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "codmtl/nn.hpp"

using namespace codmtl;

namespace {

NetSpec random_spec(Rng& rng, std::size_t max_layers = 3) {
    NetSpec spec;
    std::size_t n_layers = 1 + rng.below(max_layers);
    spec.layer_sizes.push_back(1 + rng.below(5));
    for (std::size_t l = 0; l < n_layers; ++l) {
        spec.layer_sizes.push_back(1 + rng.below(5));
        double pick = rng.uniform();
        spec.activations.push_back(pick < 0.4   ? Activation::Relu
                                   : pick < 0.7 ? Activation::Identity
                                                : Activation::Sigmoid);
    }
    spec.seed = rng.next();
    return spec;
}

// Scalar loss of the network output for finite-difference checks:
// loss = sum_i c_i * out_i with fixed coefficients, so upstream = c.
double weighted_output(const NetParams& params, const NetSpec& spec,
                       const std::vector<double>& x, const std::vector<double>& c) {
    auto acts = forward(params, spec, x);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * acts.back()[i];
    return s;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("init_params is deterministic with zero biases and bounded weights") {
    NetSpec spec;
    spec.layer_sizes = {2, 3};
    spec.activations = {Activation::Relu};
    spec.seed = 7;
    auto a = init_params(spec);
    auto b = init_params(spec);
    CHECK(a.flat() == b.flat());

    for (double bias : a.biases(0)) CHECK_EQ(bias, 0.0);
    const double bound = std::sqrt(6.0 / 5.0);
    for (double w : a.weights(0)) {
        CHECK(std::abs(w) <= bound);
    }
    bool any_nonzero = std::any_of(a.weights(0).begin(), a.weights(0).end(),
                                   [](double w) { return w != 0.0; });
    CHECK(any_nonzero);
}

TEST_CASE("forward computes the expected closed forms") {
    NetSpec spec;
    spec.layer_sizes = {2, 2};
    spec.activations = {Activation::Identity};
    spec.seed = 0;
    NetParams params(spec);
    // identity weights
    params.weights(0)[0] = 1.0;
    params.weights(0)[3] = 1.0;
    auto acts = forward(params, spec, std::vector<double>{0.3, -0.7});
    CHECK_EQ(acts.back()[0], 0.3);
    CHECK_EQ(acts.back()[1], -0.7);

    spec.activations = {Activation::Relu};
    acts = forward(params, spec, std::vector<double>{-1.0, 2.0});
    CHECK_EQ(acts.back()[0], 0.0);
    CHECK_EQ(acts.back()[1], 2.0);

    spec.activations = {Activation::Sigmoid};
    for (double x : {-30.0, -1.0, 0.0, 5.0, 30.0}) {
        acts = forward(params, spec, std::vector<double>{x, x});
        CHECK(acts.back()[0] > 0.0);
        CHECK(acts.back()[0] < 1.0);
    }

    CHECK_THROWS_AS(forward(params, spec, std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("single linear layer gradient matches the closed form") {
    NetSpec spec;
    spec.layer_sizes = {3, 2};
    spec.activations = {Activation::Identity};
    spec.seed = 21;
    auto params = init_params(spec);
    std::vector<double> x{0.5, -1.0, 2.0};
    std::vector<double> u{0.7, -0.3};
    auto g = grad(params, spec, x, u);

    // dW = u x^T, db = u, dx = W^T u
    for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK_EQ(g.flat[o * 3 + i], doctest::Approx(u[o] * x[i]).epsilon(1e-12));
        }
    }
    CHECK_EQ(g.flat[6], doctest::Approx(u[0]).epsilon(1e-12));
    CHECK_EQ(g.flat[7], doctest::Approx(u[1]).epsilon(1e-12));
    for (std::size_t i = 0; i < 3; ++i) {
        double expect = params.weights(0)[0 * 3 + i] * u[0] +
                        params.weights(0)[1 * 3 + i] * u[1];
        CHECK_EQ(g.input_grad[i], doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(33);
    auto spec = random_spec(rng);
    auto params = init_params(spec);
    std::vector<double> x(spec.input_size());
    for (double& v : x) v = rng.normal();
    std::vector<double> u(spec.output_size(), 0.0);
    auto g = grad(params, spec, x, u);
    for (double v : g.flat) CHECK_EQ(v, 0.0);
    for (double v : g.input_grad) CHECK_EQ(v, 0.0);
}

TEST_CASE("gradients match central finite differences on random nets") {
    Rng rng(1234);
    int checked = 0;
    for (int rep = 0; rep < 40; ++rep) {
        auto spec = random_spec(rng);
        auto params = init_params(spec);
        // Jitter every parameter (biases init to exactly zero) so no relu
        // preactivation sits on the kink where the subgradient and a central
        // difference legitimately disagree.
        for (double& v : params.flat()) v += 0.05 + 0.2 * rng.uniform();
        std::vector<double> x(spec.input_size());
        for (double& v : x) v = rng.normal();
        std::vector<double> c(spec.output_size());
        for (double& v : c) v = rng.normal();

        auto g = grad(params, spec, x, c);
        const double h = 1e-5;
        for (std::size_t p = 0; p < params.flat().size(); ++p) {
            auto plus = params;
            auto minus = params;
            plus.flat()[p] += h;
            minus.flat()[p] -= h;
            double fd = (weighted_output(plus, spec, x, c) -
                         weighted_output(minus, spec, x, c)) /
                        (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(g.flat[p]), 1e-3});
            CHECK(std::abs(fd - g.flat[p]) / denom <= 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 200);
}

TEST_CASE("adamw zero gradient leaves parameters unchanged") {
    std::vector<double> params{0.5, -0.25, 3.0};
    std::vector<double> grads{0.0, 0.0, 0.0};
    OptimizerState state;
    state.weight_decay = 0.0;
    adamw_step(params, grads, state);
    CHECK_EQ(params, std::vector<double>{0.5, -0.25, 3.0});
}

TEST_CASE("adamw first step matches the scalar hand derivation") {
    // m = (1-b1) g, v = (1-b2) g^2; bias-corrected: m_hat = g, v_hat = g^2;
    // update = -lr * g / (|g| + eps).
    std::vector<double> params{1.0};
    std::vector<double> grads{0.004};
    OptimizerState state;
    state.lr = 0.001;
    state.weight_decay = 0.0;
    adamw_step(params, grads, state);
    double expected = 1.0 - 0.001 * (0.004 / (0.004 + 1e-8));
    CHECK_EQ(params[0], doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adamw decoupled decay shrinks by (1 - lr*wd)") {
    std::vector<double> params{2.0, -4.0};
    std::vector<double> grads{0.0, 0.0};
    OptimizerState state;
    state.lr = 0.01;
    state.weight_decay = 0.1;
    adamw_step(params, grads, state);
    CHECK_EQ(params[0], doctest::Approx(2.0 * (1.0 - 0.001)).epsilon(1e-12));
    CHECK_EQ(params[1], doctest::Approx(-4.0 * (1.0 - 0.001)).epsilon(1e-12));
}

TEST_CASE("adamw reduces loss on a separable toy problem") {
    // 1-D logistic regression via a [1,1] net trained on y = x > 0.
    NetSpec spec;
    spec.layer_sizes = {1, 1};
    spec.activations = {Activation::Identity};
    spec.seed = 5;
    auto params = init_params(spec);
    OptimizerState state;
    state.weight_decay = 0.0;
    state.lr = 0.05;

    Rng rng(6);
    std::vector<double> xs(64), ys(64);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = rng.normal();
        ys[i] = xs[i] > 0.0 ? 1.0 : 0.0;
    }
    auto loss_of = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            auto acts = forward(params, spec, std::span<const double>{&xs[i], 1});
            total += bce_logit(acts.back()[0], ys[i]);
        }
        return total / static_cast<double>(xs.size());
    };

    double initial = loss_of();
    std::vector<double> g(params.flat().size());
    for (int step = 0; step < 200; ++step) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            ForwardBuffer buf;
            forward_into(params, spec, std::span<const double>{&xs[i], 1}, buf);
            std::vector<double> up{bce_logit_grad(buf.acts.back()[0], ys[i]) /
                                   static_cast<double>(xs.size())};
            backward_accumulate(params, spec, std::span<const double>{&xs[i], 1}, buf,
                                up, g);
        }
        adamw_step(params.flat(), g, state);
    }
    CHECK(loss_of() <= 0.5 * initial);
}

TEST_CASE("loss primitives") {
    CHECK_EQ(bce_logit(0.0, 0.5), doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_EQ(bce_logit_grad(0.0, 1.0), doctest::Approx(-0.5).epsilon(1e-12));
    // stable at extreme logits
    CHECK(std::isfinite(bce_logit(745.0, 0.0)));
    CHECK(std::isfinite(bce_logit(-745.0, 1.0)));

    std::vector<double> a{0.0, 0.0};
    std::vector<double> b{1.0, 1.0};
    CHECK_EQ(mse(a, b), 1.0);
    CHECK_EQ(mse(a, a), 0.0);
    CHECK_EQ(mse(b, a), mse(a, b));
}

}  // TEST_SUITE
