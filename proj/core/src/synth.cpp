#include "codmtl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace codmtl {

void SynthConfig::validate() const {
    if (n_informative_shared + 2 * n_informative_per_task > n_features) {
        throw ConfigError("synth: informative feature counts exceed n_features");
    }
    if (n_features < 1) throw ConfigError("synth: n_features must be >= 1");
    if (label_overlap_rate < 0.0 || label_overlap_rate > 1.0) {
        throw ConfigError("synth: label_overlap_rate must be in [0, 1]");
    }
    if (missing_rate < 0.0 || missing_rate >= 1.0) {
        throw ConfigError("synth: missing_rate must be in [0, 1)");
    }
    if (signal_strength < 0.0) throw ConfigError("synth: signal_strength must be >= 0");
    if (latent_noise_shared < 0.0 || latent_noise_private < 0.0) {
        throw ConfigError("synth: latent noise levels must be >= 0");
    }
    if (loading_lo < 0.0 || loading_hi < loading_lo) {
        throw ConfigError("synth: loading range must satisfy 0 <= lo <= hi");
    }
    if (task_names.size() != 2) throw ConfigError("synth: exactly two task names");
    if (total_rows() < 10) throw ConfigError("synth: total row count must be >= 10");
}

std::size_t SynthConfig::overlap_count() const {
    std::size_t smaller = std::min(n_task1_pos, n_task2_pos);
    return static_cast<std::size_t>(
        std::llround(label_overlap_rate * static_cast<double>(smaller)));
}

std::size_t SynthConfig::total_rows() const {
    return n_task1_pos + n_task2_pos - overlap_count() + n_negative;
}

FeatureSchema reference_schema(std::size_t n_features) {
    FeatureSchema schema;
    for (std::size_t f = 0; f < n_features; ++f) {
        Column col;
        bool donor = f < n_features / 2;
        char name[32];
        std::snprintf(name, sizeof(name), "%s_f%03zu", donor ? "donor" : "recip", f);
        col.name = name;
        col.kind = f % 5 == 4 ? ColumnKind::Categorical : ColumnKind::Numerical;
        col.role = donor ? ColumnRole::Donor : ColumnRole::Recipient;
        schema.columns.push_back(std::move(col));
    }
    schema.validate();
    return schema;
}

namespace {

enum class FeatureSignal { Noise, Shared, Task1, Task2 };

// Latent-variable design: each label block drives a per-row latent with its
// own noise, and informative features load weakly and densely on that latent.
// Dense weak loadings reward models that aggregate linearly; the "symmetric"
// slice is non-monotone (spread coded, not mean coded) so axis-aligned trees
// pick it up far more easily than a fresh network does.
constexpr double kSymmetricScale = 1.6;

struct FeaturePlan {
    FeatureSignal signal = FeatureSignal::Noise;
    bool symmetric = false;
    double weight = 1.0;  // signed loading
};

std::vector<FeaturePlan> plan_features(const SynthConfig& cfg) {
    std::vector<FeaturePlan> plan(cfg.n_features);
    const std::size_t n_inf =
        cfg.n_informative_shared + 2 * cfg.n_informative_per_task;
    Rng rng(mix_seed(cfg.seed, 11));
    for (std::size_t k = 0; k < n_inf; ++k) {
        // Spread informative columns across the whole schema.
        std::size_t f = k * cfg.n_features / n_inf;
        auto& p = plan[f];
        if (k < cfg.n_informative_shared) {
            p.signal = FeatureSignal::Shared;
        } else if (k < cfg.n_informative_shared + cfg.n_informative_per_task) {
            p.signal = FeatureSignal::Task1;
        } else {
            p.signal = FeatureSignal::Task2;
        }
        p.symmetric = k % 3 == 2;
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        p.weight = sign * rng.uniform(cfg.loading_lo, cfg.loading_hi);
    }
    return plan;
}

std::string bucket_label(double value) {
    // Fixed cuts; roughly balanced occupancy for a unit-scale value.
    static constexpr double cuts[] = {-1.6, -0.7, 0.0, 0.7, 1.6};
    std::size_t b = 0;
    while (b < 5 && value > cuts[b]) ++b;
    return "c" + std::to_string(b);
}

}  // namespace

SynthOutput generate_raw(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t overlap = cfg.overlap_count();
    const std::size_t n = cfg.total_rows();

    // Label blocks: both positive, task1 only, task2 only, negative.
    std::vector<std::uint8_t> y1(n, 0), y2(n, 0);
    std::size_t at = 0;
    for (std::size_t i = 0; i < overlap; ++i, ++at) { y1[at] = 1; y2[at] = 1; }
    for (std::size_t i = 0; i < cfg.n_task1_pos - overlap; ++i, ++at) y1[at] = 1;
    for (std::size_t i = 0; i < cfg.n_task2_pos - overlap; ++i, ++at) y2[at] = 1;

    auto plan = plan_features(cfg);
    Rng latent_rng(mix_seed(cfg.seed, 15));
    Rng noise(mix_seed(cfg.seed, 12));
    Rng missing(mix_seed(cfg.seed, 13));
    Rng shuffler(mix_seed(cfg.seed, 14));

    // One latent draw per row and factor; features only see the latents.
    std::vector<double> u_shared(n), u_task1(n), u_task2(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double v1 = y1[r] ? 1.0 : -1.0;
        const double v2 = y2[r] ? 1.0 : -1.0;
        u_shared[r] = 0.5 * (v1 + v2) + cfg.latent_noise_shared * latent_rng.normal();
        u_task1[r] = v1 + cfg.latent_noise_private * latent_rng.normal();
        u_task2[r] = v2 + cfg.latent_noise_private * latent_rng.normal();
    }

    const double s = cfg.signal_strength;
    Matrix values(n, cfg.n_features);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < cfg.n_features; ++f) {
            const auto& p = plan[f];
            double latent = 0.0;
            switch (p.signal) {
                case FeatureSignal::Noise: break;
                case FeatureSignal::Shared: latent = u_shared[r]; break;
                case FeatureSignal::Task1: latent = u_task1[r]; break;
                case FeatureSignal::Task2: latent = u_task2[r]; break;
            }
            double x = noise.normal();
            if (p.signal != FeatureSignal::Noise) {
                if (p.symmetric) {
                    // spread coding: the latent widens the feature without
                    // moving its mean
                    double side = noise.uniform() < 0.5 ? -1.0 : 1.0;
                    double lift = latent > 0.0 ? latent : 0.0;
                    x += s * std::abs(p.weight) * kSymmetricScale * lift * side;
                } else {
                    x += s * p.weight * latent;
                }
            }
            values(r, f) = x;
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    shuffler.shuffle(order);

    SynthOutput out;
    out.schema = reference_schema(cfg.n_features);
    out.task_names = cfg.task_names;
    out.table.header.push_back("id");
    for (const auto& col : out.schema.columns) out.table.header.push_back(col.name);
    out.table.header.push_back(cfg.task_names[0]);
    out.table.header.push_back(cfg.task_names[1]);

    out.table.rows.reserve(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t r = order[pos];
        std::vector<std::string> cells;
        cells.reserve(out.table.header.size());
        char id[16];
        std::snprintf(id, sizeof(id), "P%06zu", pos + 1);
        cells.emplace_back(id);
        for (std::size_t f = 0; f < cfg.n_features; ++f) {
            if (missing.uniform() < cfg.missing_rate) {
                cells.emplace_back();
                continue;
            }
            double v = values(r, f);
            if (out.schema.columns[f].kind == ColumnKind::Categorical) {
                cells.push_back(bucket_label(v));
            } else {
                cells.push_back(format_double(v));
            }
        }
        cells.push_back(y1[r] ? "1" : "0");
        cells.push_back(y2[r] ? "1" : "0");
        out.table.rows.push_back(std::move(cells));
    }
    return out;
}

Cohort generate(const SynthConfig& cfg) {
    SynthOutput raw = generate_raw(cfg);
    auto encoded = encode(raw.table, raw.schema);
    Cohort cohort = impute_zero(std::move(encoded.cohort));
    cohort.Y = extract_labels(raw.table, raw.task_names);
    cohort.ids = extract_ids(raw.table);
    return cohort;
}

}  // namespace codmtl
