#include "doctest.h"

#include <cmath>

#include "codmtl/metrics.hpp"
#include "codmtl/mtl.hpp"
#include "codmtl/synth.hpp"

using namespace codmtl;

namespace {

GBDTModel fake_gbdt(std::size_t n_features, std::vector<double> gains) {
    GBDTModel model;
    model.n_features = n_features;
    model.feature_gain = std::move(gains);
    return model;
}

LeafEmbeddingModel fake_embedding(std::size_t d_e, std::uint64_t seed = 1) {
    return LeafEmbeddingModel({2}, 4, d_e, seed);
}

Cohort small_mtl_cohort(std::uint64_t seed = 11) {
    SynthConfig cfg;
    cfg.n_task1_pos = 150;
    cfg.n_task2_pos = 130;
    cfg.n_negative = 90;
    cfg.n_features = 20;
    cfg.n_informative_shared = 6;
    cfg.n_informative_per_task = 2;
    cfg.missing_rate = 0.0;
    cfg.seed = seed;
    return generate(cfg);
}

MTLConfig fast_config(std::uint64_t seed, std::size_t epochs = 8) {
    MTLConfig cfg;
    cfg.epochs = epochs;
    cfg.hidden = 16;
    cfg.batch_size = 32;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_SUITE("mtl") {

TEST_CASE("build_codmtl unions the per-task feature sets") {
    std::vector<GBDTModel> gbdts{
        fake_gbdt(6, {0.0, 2.0, 0.0, 1.0, 0.0, 0.0}),
        fake_gbdt(6, {0.0, 0.0, 0.0, 3.0, 0.0, 0.5}),
    };
    std::vector<LeafEmbeddingModel> embs{fake_embedding(3), fake_embedding(4)};
    MTLConfig cfg = fast_config(5);
    auto model = build_codmtl(gbdts, embs, cfg);
    CHECK_EQ(model.feature_union, std::vector<std::size_t>{1, 3, 5});
    CHECK_EQ(model.full_width, 6u);
    REQUIRE_EQ(model.heads.size(), 2u);
    REQUIRE_EQ(model.projections.size(), 2u);
    CHECK_EQ(model.projections[0].b.size(), 3u);
    CHECK_EQ(model.projections[1].b.size(), 4u);
    CHECK_EQ(model.trunk_spec.layer_sizes[0], 3u);

    // single-task degenerates to one trunk and one head
    auto single = build_codmtl({gbdts[0]}, {embs[0]}, cfg);
    CHECK_EQ(single.n_tasks(), 1u);
    CHECK_EQ(single.feature_union, std::vector<std::size_t>{1, 3});

    // determinism of initialization
    auto again = build_codmtl(gbdts, embs, cfg);
    CHECK(again.trunk.flat() == model.trunk.flat());
    CHECK(again.heads[0].w == model.heads[0].w);
    CHECK(again.projections[1].w == model.projections[1].w);
}

TEST_CASE("build_codmtl validates its inputs") {
    std::vector<GBDTModel> gbdts{fake_gbdt(4, {1.0, 0.0, 0.0, 0.0})};
    std::vector<LeafEmbeddingModel> embs{fake_embedding(3), fake_embedding(3)};
    MTLConfig cfg = fast_config(1);
    CHECK_THROWS_AS(build_codmtl(gbdts, embs, cfg), ConfigError);

    std::vector<GBDTModel> no_gain{fake_gbdt(4, {0.0, 0.0, 0.0, 0.0})};
    std::vector<LeafEmbeddingModel> one{fake_embedding(3)};
    CHECK_THROWS_AS(build_codmtl(no_gain, one, cfg), ConfigError);

    std::vector<GBDTModel> mixed{fake_gbdt(4, {1.0, 0, 0, 0}),
                                 fake_gbdt(5, {1.0, 0, 0, 0, 0})};
    std::vector<LeafEmbeddingModel> two{fake_embedding(3), fake_embedding(3)};
    CHECK_THROWS_AS(build_codmtl(mixed, two, cfg), ConfigError);
}

TEST_CASE("forward_task basics") {
    auto model = build_plain_mtl(4, 2, fast_config(9));
    std::vector<double> x{0.3, -0.2, 1.0, 0.5};

    // zero head gives exactly one half for every input
    for (auto& h : model.heads) {
        std::fill(h.w.begin(), h.w.end(), 0.0);
        h.b = 0.0;
    }
    CHECK_EQ(forward_task(model, x, 0), 0.5);
    CHECK_EQ(forward_task(model, x, 1), 0.5);

    auto refreshed = build_plain_mtl(4, 2, fast_config(9));
    auto t1 = trunk_output(refreshed, x);
    auto t2 = trunk_output(refreshed, x);
    CHECK_EQ(t1, t2);  // shared trunk output reused by every head

    double p = forward_task(refreshed, x, 0);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    auto probs = predict_probs(refreshed, x);
    CHECK_EQ(probs[0], p);
    CHECK_EQ(probs[1], forward_task(refreshed, x, 1));

    CHECK_THROWS_AS(forward_task(refreshed, x, 2), ConfigError);
    std::vector<double> narrow{1.0};
    CHECK_THROWS_AS(forward_task(refreshed, narrow, 0), DataError);
}

TEST_CASE("multitask_loss reduces to plain cross-entropy and decomposes") {
    auto model = build_plain_mtl(3, 1, fast_config(21));
    Matrix x(4, 3);
    Matrix y(4, 1);
    Rng rng(2);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 3; ++c) x(r, c) = rng.normal();
        y(r, 0) = r % 2 == 0 ? 1.0 : 0.0;
    }
    MTLConfig cfg = fast_config(21);
    cfg.gamma = {0.0};
    auto breakdown = multitask_loss(model, x, y, {}, cfg);

    double hand = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        double p = forward_task(model, x.row(r), 0);
        hand += -(y(r, 0) * std::log(p) + (1.0 - y(r, 0)) * std::log(1.0 - p));
    }
    hand /= 4.0;
    CHECK_EQ(breakdown.total, doctest::Approx(hand).epsilon(1e-9));
    CHECK_EQ(breakdown.total, doctest::Approx(breakdown.task_ce[0]).epsilon(1e-12));

    // alpha linearity: doubling alpha_1 doubles that task's contribution
    auto two = build_plain_mtl(3, 2, fast_config(22));
    Matrix y2(4, 2);
    for (std::size_t r = 0; r < 4; ++r) {
        y2(r, 0) = r % 2 == 0 ? 1.0 : 0.0;
        y2(r, 1) = r < 2 ? 1.0 : 0.0;
    }
    MTLConfig base_cfg = fast_config(22);
    base_cfg.gamma = {0.0, 0.0};
    auto b1 = multitask_loss(two, x, y2, {}, base_cfg);
    MTLConfig doubled = base_cfg;
    doubled.alpha = {2.0, 1.0};
    auto b2 = multitask_loss(two, x, y2, {}, doubled);
    CHECK_EQ(b2.total - b1.total, doctest::Approx(b1.task_ce[0]).epsilon(1e-12));

    // decomposition identity from the breakdown
    double rebuilt = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        rebuilt += doubled.alpha_of(j) * (doubled.beta_of(j) * b2.task_ce[j] +
                                          doubled.gamma_of(j) * b2.task_distill[j]);
    }
    CHECK(std::abs(rebuilt - b2.total) <= 1e-12);
}

TEST_CASE("near-perfect predictions and exact targets give near-zero loss") {
    auto model = build_plain_mtl(2, 1, fast_config(33));
    // saturate the head so sigmoid(logit) matches the labels almost exactly
    Matrix x(2, 2);
    x(0, 0) = 1.0;
    x(1, 0) = 1.0;
    Matrix y(2, 1);
    y(0, 0) = 1.0;
    y(1, 0) = 1.0;
    for (auto& h : model.heads) {
        std::fill(h.w.begin(), h.w.end(), 0.0);
        h.b = 40.0;  // logit 40 -> p within 4e-18 of 1
    }
    MTLConfig cfg = fast_config(33);
    cfg.gamma = {0.0};
    auto breakdown = multitask_loss(model, x, y, {}, cfg);
    CHECK(breakdown.total < 1e-9);
}

TEST_CASE("training descends and records history") {
    auto cohort = small_mtl_cohort();
    auto folds = kfold_split(cohort, 4, 3);
    MTLConfig cfg = fast_config(44, 10);

    std::vector<GBDTModel> gbdts;
    std::vector<LeafEmbeddingModel> embs;
    std::vector<Matrix> targets;
    Matrix x_train = take_rows(cohort.X, folds[0].train_rows);
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> y(folds[0].train_rows.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = cohort.Y(folds[0].train_rows[i], j);
        }
        GBDTConfig gcfg;
        gcfg.num_trees = 10;
        gcfg.max_leaves = 8;
        gcfg.min_samples_leaf = 5;
        gcfg.seed = 100 + j;
        gbdts.push_back(train_gbdt(x_train, y, gcfg));
        auto onehots = make_onehot_batch(gbdts.back(), x_train);
        auto q = soft_targets(gbdts.back(), x_train);
        EmbedTrainConfig ecfg;
        ecfg.d_e = 6;
        ecfg.hidden = 16;
        ecfg.epochs = 15;
        ecfg.seed = 200 + j;
        auto trained = train_leaf_embedding(onehots, q, ecfg);
        targets.push_back(distill_targets(trained.model, onehots));
        embs.push_back(std::move(trained.model));
    }

    auto model = build_codmtl(gbdts, embs, cfg);
    auto history = train_codmtl(model, cohort, folds[0], targets, cfg);
    CHECK_EQ(history.total.size(), cfg.epochs);
    CHECK_EQ(history.task_ce.rows(), cfg.epochs);
    CHECK(history.total.back() <= history.total.front());
    for (double v : history.total) CHECK(std::isfinite(v));

    FoldSplit empty_fold;
    empty_fold.test_rows = folds[0].test_rows;
    CHECK_THROWS_AS(train_codmtl(model, cohort, empty_fold, targets, cfg),
                    DataError);
}

TEST_CASE("gamma zero reproduces plain hard sharing exactly") {
    auto cohort = small_mtl_cohort(77);
    auto folds = kfold_split(cohort, 3, 5);
    const auto& fold = folds[0];
    Matrix x_train = take_rows(cohort.X, fold.train_rows);
    Matrix y_train = take_rows(cohort.Y, fold.train_rows);

    // distilled model with gamma = 0
    std::vector<GBDTModel> gbdts;
    std::vector<LeafEmbeddingModel> embs;
    std::vector<Matrix> targets;
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> y(fold.train_rows.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = cohort.Y(fold.train_rows[i], j);
        }
        GBDTConfig gcfg;
        gcfg.num_trees = 8;
        gcfg.max_leaves = 6;
        gcfg.min_samples_leaf = 5;
        gbdts.push_back(train_gbdt(x_train, y, gcfg));
        auto onehots = make_onehot_batch(gbdts.back(), x_train);
        auto q = soft_targets(gbdts.back(), x_train);
        EmbedTrainConfig ecfg;
        ecfg.d_e = 5;
        ecfg.hidden = 12;
        ecfg.epochs = 5;
        ecfg.seed = 300 + j;
        auto trained = train_leaf_embedding(onehots, q, ecfg);
        targets.push_back(distill_targets(trained.model, onehots));
        embs.push_back(std::move(trained.model));
    }

    MTLConfig cfg = fast_config(91, 6);
    cfg.gamma = {0.0, 0.0};
    auto distilled = build_codmtl(gbdts, embs, cfg);
    auto proj_init = distilled.projections[0].w;
    Matrix x_union = restrict_columns(x_train, distilled.feature_union);
    auto hist_distilled = train_mtl_core(distilled, x_union, y_train, targets, cfg);

    // plain model restricted to the same feature union, same seed
    auto plain = build_plain_mtl(cohort.n_features(), 2, cfg,
                                 distilled.feature_union);
    auto hist_plain = train_mtl_core(plain, x_union, y_train, {}, cfg);

    REQUIRE_EQ(hist_distilled.total.size(), hist_plain.total.size());
    for (std::size_t e = 0; e < hist_plain.total.size(); ++e) {
        CHECK(std::abs(hist_distilled.total[e] - hist_plain.total[e]) <= 1e-10);
    }
    CHECK(distilled.trunk.flat() == plain.trunk.flat());
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(distilled.heads[j].w == plain.heads[j].w);
        CHECK_EQ(distilled.heads[j].b, plain.heads[j].b);
    }

    // with gamma 0 the projection gradients are identically zero, so the
    // projections only see the decoupled decay factor per optimizer step
    std::size_t steps = 0;
    std::size_t n = x_union.rows();
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        steps += (n + cfg.batch_size - 1) / cfg.batch_size;
    }
    double decay = std::pow(1.0 - cfg.lr * cfg.weight_decay,
                            static_cast<double>(steps));
    for (std::size_t i = 0; i < 5; ++i) {
        double expect = proj_init.data()[i] * decay;
        CHECK_EQ(distilled.projections[0].w.data()[i],
                 doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("single-task plain MTL equals the single-task MLP") {
    auto cohort = small_mtl_cohort(123);
    Matrix x = cohort.X;
    std::vector<double> y(cohort.n_rows());
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = cohort.Y(r, 0);
    Matrix y_mat(cohort.n_rows(), 1);
    for (std::size_t r = 0; r < y.size(); ++r) y_mat(r, 0) = y[r];

    MTLConfig cfg = fast_config(55, 5);
    TrainHistory mlp_hist, plain_hist;
    auto mlp = train_mlp_single(x, y, cfg, &mlp_hist);
    auto plain = train_mtl_plain(x, y_mat, cfg, &plain_hist);

    REQUIRE_EQ(mlp_hist.total.size(), plain_hist.total.size());
    for (std::size_t e = 0; e < mlp_hist.total.size(); ++e) {
        CHECK(std::abs(mlp_hist.total[e] - plain_hist.total[e]) <= 1e-10);
    }
    CHECK(mlp.trunk.flat() == plain.trunk.flat());
    CHECK(mlp.heads[0].w == plain.heads[0].w);
}

TEST_CASE("logistic baseline separates separable data") {
    Cohort cohort;
    cohort.X = Matrix(80, 1);
    cohort.Y = Matrix(80, 1);
    Rng rng(9);
    for (std::size_t r = 0; r < 80; ++r) {
        bool pos = r % 2 == 0;
        cohort.X(r, 0) = (pos ? 2.0 : -2.0) + 0.5 * rng.normal();
        cohort.Y(r, 0) = pos ? 1.0 : 0.0;
    }
    auto folds = kfold_split(cohort, 2, 1);
    MTLConfig cfg;
    cfg.epochs = 60;
    cfg.lr = 0.05;
    cfg.seed = 2;
    auto model = train_baseline(BaselineKind::LogReg, cohort, folds[0], 0, cfg);
    auto& lin = std::get<LinearModel>(model);

    ScoredSet s;
    for (auto r : folds[0].test_rows) {
        double p = logreg_predict(lin, cohort.X.row(r));
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        s.scores.push_back(p);
        s.labels.push_back(cohort.Y(r, 0) != 0.0 ? 1 : 0);
    }
    CHECK_EQ(auroc(s), 1.0);

    CHECK_THROWS_AS(
        train_baseline(BaselineKind::MlpSingle, cohort, folds[0], std::nullopt, cfg),
        ConfigError);
}

TEST_CASE("head rescaling preserves the within-task ranking") {
    auto model = build_plain_mtl(5, 1, fast_config(66));
    Rng rng(4);
    Matrix x(30, 5);
    std::vector<std::uint8_t> labels(30);
    for (std::size_t r = 0; r < 30; ++r) {
        for (std::size_t c = 0; c < 5; ++c) x(r, c) = rng.normal();
        labels[r] = r % 3 == 0 ? 1 : 0;
    }
    auto scores_of = [&] {
        ScoredSet s;
        for (std::size_t r = 0; r < 30; ++r) {
            s.scores.push_back(forward_task(model, x.row(r), 0));
            s.labels.push_back(labels[r]);
        }
        return s;
    };
    double before = auroc(scores_of());
    for (double& w : model.heads[0].w) w *= 3.7;
    model.heads[0].b *= 3.7;
    double after = auroc(scores_of());
    CHECK_EQ(before, doctest::Approx(after).epsilon(1e-12));
}

}  // TEST_SUITE
