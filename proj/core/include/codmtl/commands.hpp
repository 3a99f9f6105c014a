#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codmtl/artifact.hpp"
#include "codmtl/dataset.hpp"
#include "codmtl/distill.hpp"
#include "codmtl/gbdt.hpp"
#include "codmtl/metrics.hpp"
#include "codmtl/mtl.hpp"
#include "codmtl/synth.hpp"

namespace codmtl {

// One JSON config drives every subcommand; each reads the sections it needs.
struct RunConfig {
    std::string out_dir;  // resolution order: --out flag, config, $CODMTL_OUT, "."
    std::uint64_t seed = 42;
    std::size_t k = 4;
    std::optional<std::size_t> top_k;  // default min(n_features, 64)
    std::size_t jobs = 1;
    std::vector<std::string> tasks = {"task1", "task2"};
    std::string data_path;
    std::string schema_path;
    char delimiter = ',';
    std::string model_path;
    GBDTConfig gbdt;
    MTLConfig mtl;
    EmbedTrainConfig embed;
    SynthConfig synth;
};

RunConfig load_run_config(const std::string& path);

// The fixed benchmark roster, in report order.
const std::vector<std::string>& benchmark_models();

struct FoldEval {
    bool valid = false;  // false when the test fold is single-class
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    double auroc_value = 0.0;
    double auprc_value = 0.0;
    // Filled for the distilled model only: its test logits and the margins of
    // the task's internal GBDT, for fidelity diagnostics.
    std::vector<double> logits;
    std::vector<double> distill_margins;
};

struct BenchmarkResult {
    std::vector<std::string> models;
    std::vector<std::string> tasks;
    std::size_t k = 0;
    std::vector<std::vector<std::vector<FoldEval>>> cells;  // [model][task][fold]
    double wall_seconds = 0.0;

    const FoldEval& cell(const std::string& model, std::size_t task,
                         std::size_t fold) const;
    // Aggregate over valid folds.
    CVReport report(const std::string& model, std::size_t task,
                    const std::string& metric) const;
};

// Writes data.csv, schema.txt and manifest.json under out_dir.
void run_synth(const RunConfig& config);

// K-fold evaluation of all five models; writes report.json, table.txt,
// per-fold curve files and timings.txt unless write_files is false.
BenchmarkResult run_benchmark(const RunConfig& config, bool write_files = true);

// Full-data pipeline; writes model.json and history.csv.
void run_train(const RunConfig& config);

// Writes predictions.csv (id plus one probability column per task).
void run_predict(const RunConfig& config);

// Scores a labeled dataset with a saved model and writes ROC / PR /
// calibration curve files per task.
void run_export_curves(const RunConfig& config);

}  // namespace codmtl
