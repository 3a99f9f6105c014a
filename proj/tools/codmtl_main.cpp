// codmtl command-line front end: synth, train, benchmark, predict,
// export-curves. Exit codes: 0 success, 1 usage/config error, 2 data error,
// 3 numerical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "codmtl/commands.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> k;
    std::optional<std::size_t> top_k;
    std::optional<std::size_t> jobs;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Path to the JSON run config")
        ->required();
    cmd->add_option("--seed", flags.seed, "Override the config seed");
    cmd->add_option("--out", flags.out_dir, "Override the output directory");
    cmd->add_option("--k", flags.k, "Override the number of CV folds");
    cmd->add_option("--top-k", flags.top_k,
                    "Override the per-task tree feature selection size");
    cmd->add_option("--jobs", flags.jobs, "Worker threads for fold/model cells");
}

codmtl::RunConfig resolve_config(const CommonFlags& flags) {
    codmtl::RunConfig cfg = codmtl::load_run_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.k) cfg.k = *flags.k;
    if (flags.top_k) cfg.top_k = *flags.top_k;
    if (flags.jobs) cfg.jobs = *flags.jobs;
    if (cfg.out_dir.empty()) {
        const char* env = std::getenv("CODMTL_OUT");
        cfg.out_dir = env != nullptr && *env != '\0' ? env : ".";
    }
    if (cfg.k < 2) throw codmtl::ConfigError("k must be >= 2");
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree-distilled multi-task learning for tabular cohorts"};
    app.require_subcommand(1);

    CommonFlags synth_flags, train_flags, bench_flags, predict_flags, curves_flags;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
    add_common_flags(synth, synth_flags);
    auto* train = app.add_subcommand("train", "Train the full-data model artifact");
    add_common_flags(train, train_flags);
    auto* bench = app.add_subcommand("benchmark",
                                     "K-fold evaluation of all baseline models");
    add_common_flags(bench, bench_flags);
    auto* predict = app.add_subcommand("predict", "Score a data file with a model");
    add_common_flags(predict, predict_flags);
    auto* curves = app.add_subcommand("export-curves",
                                      "Write ROC/PR/calibration curves for a model");
    add_common_flags(curves, curves_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            codmtl::run_synth(resolve_config(synth_flags));
        } else if (train->parsed()) {
            codmtl::run_train(resolve_config(train_flags));
        } else if (bench->parsed()) {
            codmtl::run_benchmark(resolve_config(bench_flags));
        } else if (predict->parsed()) {
            codmtl::run_predict(resolve_config(predict_flags));
        } else if (curves->parsed()) {
            codmtl::run_export_curves(resolve_config(curves_flags));
        }
    } catch (const codmtl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const codmtl::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const codmtl::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
