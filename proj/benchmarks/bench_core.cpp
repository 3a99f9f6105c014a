#include <benchmark/benchmark.h>

#include "codmtl/gbdt.hpp"
#include "codmtl/metrics.hpp"
#include "codmtl/mtl.hpp"
#include "codmtl/nn.hpp"
#include "codmtl/synth.hpp"

namespace {

codmtl::Cohort small_cohort() {
    codmtl::SynthConfig cfg;
    cfg.n_task1_pos = 400;
    cfg.n_task2_pos = 350;
    cfg.n_negative = 250;
    cfg.n_features = 40;
    cfg.n_informative_shared = 10;
    cfg.n_informative_per_task = 4;
    cfg.seed = 7;
    return codmtl::generate(cfg);
}

void BM_gbdt_train(benchmark::State& state) {
    auto cohort = small_cohort();
    std::vector<double> y(cohort.n_rows());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = cohort.Y(r, 0);
    codmtl::GBDTConfig cfg;
    cfg.num_trees = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto model = codmtl::train_gbdt(cohort.X, y, cfg);
        benchmark::DoNotOptimize(model.base_score);
    }
}
BENCHMARK(BM_gbdt_train)->Arg(10)->Arg(50);

void BM_gbdt_predict(benchmark::State& state) {
    auto cohort = small_cohort();
    std::vector<double> y(cohort.n_rows());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = cohort.Y(r, 0);
    codmtl::GBDTConfig cfg;
    cfg.num_trees = 50;
    auto model = codmtl::train_gbdt(cohort.X, y, cfg);
    std::size_t r = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(codmtl::predict_margin(model, cohort.X.row(r)));
        r = (r + 1) % cohort.n_rows();
    }
}
BENCHMARK(BM_gbdt_predict);

void BM_auroc(benchmark::State& state) {
    codmtl::Rng rng(3);
    codmtl::ScoredSet s;
    for (int i = 0; i < state.range(0); ++i) {
        s.scores.push_back(rng.uniform());
        s.labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(codmtl::auroc(s));
    }
}
BENCHMARK(BM_auroc)->Arg(1000)->Arg(10000);

void BM_adamw_step(benchmark::State& state) {
    std::vector<double> params(static_cast<std::size_t>(state.range(0)), 0.5);
    std::vector<double> grads(params.size(), 0.01);
    codmtl::OptimizerState opt;
    for (auto _ : state) {
        codmtl::adamw_step(params, grads, opt);
        benchmark::DoNotOptimize(params.data());
    }
}
BENCHMARK(BM_adamw_step)->Arg(1 << 10)->Arg(1 << 16);

void BM_mtl_epoch(benchmark::State& state) {
    auto cohort = small_cohort();
    codmtl::MTLConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 11;
    for (auto _ : state) {
        auto model = codmtl::train_mtl_plain(cohort.X, cohort.Y, cfg);
        benchmark::DoNotOptimize(model.heads[0].b);
    }
}
BENCHMARK(BM_mtl_epoch);

}  // namespace

BENCHMARK_MAIN();
