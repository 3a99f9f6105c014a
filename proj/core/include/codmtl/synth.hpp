#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codmtl/dataset.hpp"

namespace codmtl {

// Synthetic two-task cohort: a shared latent drives both labels through the
// shared informative features, each task adds private informative features,
// everything else is noise. Positive counts per task are hit exactly; a
// label_overlap_rate fraction of the smaller positive class carries both
// labels.
struct SynthConfig {
    std::size_t n_task1_pos = 4160;
    std::size_t n_task2_pos = 3627;
    std::size_t n_negative = 2000;
    std::size_t n_features = 102;
    std::size_t n_informative_shared = 28;
    std::size_t n_informative_per_task = 10;
    double signal_strength = 1.0;
    double label_overlap_rate = 0.1;
    double missing_rate = 0.03;
    // Latent noise between each label block and its factor, and the loading
    // range informative features draw from. Small loadings spread the signal
    // thinly over many columns.
    double latent_noise_shared = 1.0;
    double latent_noise_private = 1.5;
    double loading_lo = 0.4;
    double loading_hi = 0.8;
    std::uint64_t seed = 0;
    std::vector<std::string> task_names = {"task1", "task2"};

    void validate() const;
    std::size_t overlap_count() const;
    std::size_t total_rows() const;
};

// 20% categorical columns, donor roles in the first half, recipient in the
// second; the layout every synthetic cohort shares.
FeatureSchema reference_schema(std::size_t n_features);

struct SynthOutput {
    RawTable table;  // id, feature columns, then one 0/1 column per task
    FeatureSchema schema;
    std::vector<std::string> task_names;
};

SynthOutput generate_raw(const SynthConfig& config);

// generate_raw piped through encode + impute + label/id extraction.
Cohort generate(const SynthConfig& config);

}  // namespace codmtl
