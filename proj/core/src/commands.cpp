#include "codmtl/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace codmtl {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kFoldSeedTag = 9000;
constexpr std::uint64_t kModelTagBase = 1000;
constexpr std::uint64_t kAllTasks = 777;

// codmtl sub-stream tags within a cell
constexpr std::uint64_t kCellGbdtTag = 10;
constexpr std::uint64_t kCellEmbedTag = 20;
constexpr std::uint64_t kCellMtlTag = 30;

std::size_t model_index(const std::string& name) {
    const auto& models = benchmark_models();
    auto it = std::find(models.begin(), models.end(), name);
    if (it == models.end()) throw ConfigError("unknown model name: " + name);
    return static_cast<std::size_t>(it - models.begin());
}

// Counts arrive as signed JSON numbers; negatives must fail loudly instead of
// wrapping around.
std::size_t read_count(const json& j, const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    long long v = j.at(key).get<long long>();
    if (v < 0) {
        throw ConfigError(std::string("config: ") + key + " must be >= 0, got " +
                          std::to_string(v));
    }
    return static_cast<std::size_t>(v);
}

GBDTConfig gbdt_config_from(const json& j, GBDTConfig base) {
    base.num_trees = read_count(j, "num_trees", base.num_trees);
    base.max_leaves = read_count(j, "max_leaves", base.max_leaves);
    base.min_samples_leaf = read_count(j, "min_samples_leaf", base.min_samples_leaf);
    base.shrinkage = j.value("shrinkage", base.shrinkage);
    base.l2_lambda = j.value("l2_lambda", base.l2_lambda);
    base.num_bins = read_count(j, "num_bins", base.num_bins);
    return base;
}

MTLConfig mtl_config_from(const json& j, MTLConfig base) {
    base.alpha = j.value("alpha", base.alpha);
    base.beta = j.value("beta", base.beta);
    base.gamma = j.value("gamma", base.gamma);
    base.epochs = read_count(j, "epochs", base.epochs);
    base.lr = j.value("lr", base.lr);
    base.weight_decay = j.value("weight_decay", base.weight_decay);
    base.batch_size = read_count(j, "batch_size", base.batch_size);
    base.hidden = read_count(j, "hidden", base.hidden);
    return base;
}

EmbedTrainConfig embed_config_from(const json& j, EmbedTrainConfig base) {
    base.d_e = read_count(j, "d_e", base.d_e);
    base.hidden = read_count(j, "hidden", base.hidden);
    base.epochs = read_count(j, "epochs", base.epochs);
    base.lr = j.value("lr", base.lr);
    base.weight_decay = j.value("weight_decay", base.weight_decay);
    base.batch_size = read_count(j, "batch_size", base.batch_size);
    return base;
}

SynthConfig synth_config_from(const json& j, SynthConfig base) {
    base.n_task1_pos = read_count(j, "n_task1_pos", base.n_task1_pos);
    base.n_task2_pos = read_count(j, "n_task2_pos", base.n_task2_pos);
    base.n_negative = read_count(j, "n_negative", base.n_negative);
    base.n_features = read_count(j, "n_features", base.n_features);
    base.n_informative_shared =
        read_count(j, "n_informative_shared", base.n_informative_shared);
    base.n_informative_per_task =
        read_count(j, "n_informative_per_task", base.n_informative_per_task);
    base.signal_strength = j.value("signal_strength", base.signal_strength);
    base.label_overlap_rate = j.value("label_overlap_rate", base.label_overlap_rate);
    base.missing_rate = j.value("missing_rate", base.missing_rate);
    base.latent_noise_shared = j.value("latent_noise_shared", base.latent_noise_shared);
    base.latent_noise_private =
        j.value("latent_noise_private", base.latent_noise_private);
    base.loading_lo = j.value("loading_lo", base.loading_lo);
    base.loading_hi = j.value("loading_hi", base.loading_hi);
    return base;
}

json gbdt_config_echo(const GBDTConfig& c) {
    return json{{"num_trees", c.num_trees},
                {"max_leaves", c.max_leaves},
                {"min_samples_leaf", c.min_samples_leaf},
                {"shrinkage", c.shrinkage},
                {"l2_lambda", c.l2_lambda},
                {"num_bins", c.num_bins}};
}

json mtl_config_echo(const MTLConfig& c) {
    return json{{"alpha", c.alpha},           {"beta", c.beta},
                {"gamma", c.gamma},           {"epochs", c.epochs},
                {"lr", c.lr},                 {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size}, {"hidden", c.hidden}};
}

json embed_config_echo(const EmbedTrainConfig& c) {
    return json{{"d_e", c.d_e},       {"hidden", c.hidden},
                {"epochs", c.epochs}, {"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size}};
}

struct LoadedData {
    Cohort cohort;  // encoded + imputed, labels and ids attached
    CodeMaps code_maps;
};

LoadedData load_data(const RunConfig& cfg) {
    if (cfg.data_path.empty() || cfg.schema_path.empty()) {
        throw ConfigError("config needs data.data_path and data.schema_path");
    }
    FeatureSchema schema = load_schema(cfg.schema_path);
    RawTable table = load_table(cfg.data_path, schema, cfg.delimiter);
    LoadedData out;
    auto encoded = encode(table, schema);
    out.code_maps = std::move(encoded.code_maps);
    out.cohort = impute_zero(std::move(encoded.cohort));
    out.cohort.Y = extract_labels(table, cfg.tasks);
    out.cohort.ids = extract_ids(table);
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("failed writing file: " + path);
}

std::string join_cells(const std::vector<std::string>& cells, char delimiter) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) line.push_back(delimiter);
        line += cells[i];
    }
    return line;
}

void run_parallel(std::vector<std::function<void()>>& work, std::size_t jobs) {
    if (jobs <= 1 || work.size() <= 1) {
        for (auto& w : work) w();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= work.size()) return;
            try {
                work[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    std::size_t n = std::min(jobs, work.size());
    threads.reserve(n);
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void eval_cell(FoldEval& cell) {
    bool has_pos = false, has_neg = false;
    for (auto l : cell.labels) (l ? has_pos : has_neg) = true;
    cell.valid = has_pos && has_neg;
    if (!cell.valid) return;
    ScoredSet s{cell.scores, cell.labels};
    cell.auroc_value = auroc(s);
    cell.auprc_value = auprc(s);
}

std::vector<std::uint8_t> test_labels(const Cohort& cohort, const FoldSplit& fold,
                                      std::size_t task) {
    std::vector<std::uint8_t> labels(fold.test_rows.size());
    for (std::size_t i = 0; i < fold.test_rows.size(); ++i) {
        labels[i] = cohort.Y(fold.test_rows[i], task) != 0.0 ? 1 : 0;
    }
    return labels;
}

std::vector<double> train_label_column(const Cohort& cohort, const FoldSplit& fold,
                                       std::size_t task) {
    std::vector<double> y(fold.train_rows.size());
    for (std::size_t i = 0; i < fold.train_rows.size(); ++i) {
        y[i] = cohort.Y(fold.train_rows[i], task);
    }
    return y;
}

// --------------------------------------------------------------------------
// Per-cell trainers
// --------------------------------------------------------------------------

// Single-task cells take the task's own loss weights; distillation is off.
MTLConfig single_task_config(const MTLConfig& base, std::size_t task) {
    MTLConfig out = base;
    out.alpha = {base.alpha_of(task)};
    out.beta = {base.beta_of(task)};
    out.gamma = {0.0};
    return out;
}

void bench_logreg(const RunConfig& cfg, const Cohort& cohort, const FoldSplit& fold,
                  std::size_t task, std::uint64_t cell_seed, FoldEval& cell) {
    MTLConfig mcfg = single_task_config(cfg.mtl, task);
    mcfg.seed = cell_seed;
    Matrix x_train = take_rows(cohort.X, fold.train_rows);
    auto y = train_label_column(cohort, fold, task);
    LinearModel model = train_logreg(x_train, y, mcfg);
    cell.labels = test_labels(cohort, fold, task);
    cell.scores.reserve(fold.test_rows.size());
    for (std::size_t r : fold.test_rows) {
        cell.scores.push_back(logreg_predict(model, cohort.X.row(r)));
    }
    eval_cell(cell);
}

void bench_gbdt(const RunConfig& cfg, const Cohort& cohort, const FoldSplit& fold,
                std::size_t task, std::uint64_t cell_seed, FoldEval& cell) {
    GBDTConfig gcfg = cfg.gbdt;
    gcfg.seed = cell_seed;
    Matrix x_train = take_rows(cohort.X, fold.train_rows);
    auto y = train_label_column(cohort, fold, task);
    GBDTModel model = train_gbdt(x_train, y, gcfg);
    cell.labels = test_labels(cohort, fold, task);
    cell.scores.reserve(fold.test_rows.size());
    for (std::size_t r : fold.test_rows) {
        cell.scores.push_back(predict_proba(model, cohort.X.row(r)));
    }
    eval_cell(cell);
}

void bench_mlp_single(const RunConfig& cfg, const Cohort& cohort,
                      const FoldSplit& fold, std::size_t task,
                      std::uint64_t cell_seed, FoldEval& cell) {
    MTLConfig mcfg = single_task_config(cfg.mtl, task);
    mcfg.seed = cell_seed;
    Matrix x_train = take_rows(cohort.X, fold.train_rows);
    auto y = train_label_column(cohort, fold, task);
    CoDMTLModel model = train_mlp_single(x_train, y, mcfg);
    cell.labels = test_labels(cohort, fold, task);
    cell.scores.reserve(fold.test_rows.size());
    for (std::size_t r : fold.test_rows) {
        cell.scores.push_back(forward_task(model, cohort.X.row(r), 0));
    }
    eval_cell(cell);
}

void bench_mtl_plain(const RunConfig& cfg, const Cohort& cohort, const FoldSplit& fold,
                     std::uint64_t cell_seed, std::vector<FoldEval*> task_cells) {
    MTLConfig mcfg = cfg.mtl;
    mcfg.gamma = {0.0};  // hard sharing only, no distillation term
    mcfg.seed = cell_seed;
    Matrix x_train = take_rows(cohort.X, fold.train_rows);
    Matrix y_train = take_rows(cohort.Y, fold.train_rows);
    CoDMTLModel model = train_mtl_plain(x_train, y_train, mcfg);
    for (std::size_t r_i = 0; r_i < fold.test_rows.size(); ++r_i) {
        auto probs = predict_probs(model, cohort.X.row(fold.test_rows[r_i]));
        for (std::size_t j = 0; j < task_cells.size(); ++j) {
            task_cells[j]->scores.push_back(probs[j]);
        }
    }
    for (std::size_t j = 0; j < task_cells.size(); ++j) {
        task_cells[j]->labels = test_labels(cohort, fold, j);
        eval_cell(*task_cells[j]);
    }
}

struct CodmtlFoldArtifacts {
    std::vector<GBDTModel> gbdts;
    std::vector<LeafEmbeddingModel> embeddings;
    CoDMTLModel model;
    TrainHistory history;
};

CodmtlFoldArtifacts train_codmtl_fold(const RunConfig& cfg, const Cohort& cohort,
                                      const std::vector<std::size_t>& train_rows,
                                      std::uint64_t cell_seed) {
    CodmtlFoldArtifacts art;
    const std::size_t m = cohort.n_tasks();
    Matrix x_train = take_rows(cohort.X, train_rows);

    std::vector<Matrix> targets;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> y(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            y[i] = cohort.Y(train_rows[i], j);
        }
        GBDTConfig gcfg = cfg.gbdt;
        gcfg.seed = mix_seed(cell_seed, kCellGbdtTag + j);
        art.gbdts.push_back(train_gbdt(x_train, y, gcfg));

        auto onehots = make_onehot_batch(art.gbdts.back(), x_train);
        auto q = soft_targets(art.gbdts.back(), x_train);
        EmbedTrainConfig ecfg = cfg.embed;
        ecfg.seed = mix_seed(cell_seed, kCellEmbedTag + j);
        auto trained = train_leaf_embedding(onehots, q, ecfg);
        targets.push_back(distill_targets(trained.model, onehots));
        art.embeddings.push_back(std::move(trained.model));
    }

    MTLConfig mcfg = cfg.mtl;
    mcfg.seed = mix_seed(cell_seed, kCellMtlTag);
    std::size_t top_k =
        cfg.top_k.value_or(std::min<std::size_t>(cohort.n_features(), 64));
    art.model = build_codmtl(art.gbdts, art.embeddings, mcfg, top_k);

    Matrix x_restricted = restrict_columns(x_train, art.model.feature_union);
    Matrix y_train = take_rows(cohort.Y, train_rows);
    art.history = train_mtl_core(art.model, x_restricted, y_train, targets, mcfg);
    return art;
}

void bench_codmtl(const RunConfig& cfg, const Cohort& cohort, const FoldSplit& fold,
                  std::uint64_t cell_seed, std::vector<FoldEval*> task_cells) {
    auto art = train_codmtl_fold(cfg, cohort, fold.train_rows, cell_seed);
    for (std::size_t r : fold.test_rows) {
        auto logits = predict_logits(art.model, cohort.X.row(r));
        for (std::size_t j = 0; j < task_cells.size(); ++j) {
            task_cells[j]->logits.push_back(logits[j]);
            task_cells[j]->scores.push_back(sigmoid(logits[j]));
            task_cells[j]->distill_margins.push_back(
                predict_margin(art.gbdts[j], cohort.X.row(r)));
        }
    }
    for (std::size_t j = 0; j < task_cells.size(); ++j) {
        task_cells[j]->labels = test_labels(cohort, fold, j);
        eval_cell(*task_cells[j]);
    }
}

// --------------------------------------------------------------------------
// Report rendering
// --------------------------------------------------------------------------

json fold_metric_json(const BenchmarkResult& result, const std::string& model,
                      std::size_t task, const std::string& metric) {
    json per_fold = json::array();
    std::vector<double> valid_values;
    for (std::size_t f = 0; f < result.k; ++f) {
        const auto& cell = result.cell(model, task, f);
        if (!cell.valid) {
            per_fold.push_back(nullptr);
            continue;
        }
        double v = metric == "auroc" ? cell.auroc_value : cell.auprc_value;
        per_fold.push_back(v);
        valid_values.push_back(v);
    }
    json out;
    out["per_fold"] = per_fold;
    if (valid_values.empty()) {
        out["mean"] = nullptr;
        out["std"] = nullptr;
    } else {
        auto rep = cv_aggregate(valid_values, metric, result.tasks[task]);
        out["mean"] = rep.mean;
        out["std"] = rep.std_dev;
    }
    return out;
}

std::string format_fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string render_table(const BenchmarkResult& result) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"model"};
    for (const auto& task : result.tasks) {
        header.push_back(task + " AUROC");
        header.push_back(task + " AUPRC");
    }
    grid.push_back(header);
    for (const auto& model : result.models) {
        std::vector<std::string> row{model};
        for (std::size_t t = 0; t < result.tasks.size(); ++t) {
            for (const char* metric : {"auroc", "auprc"}) {
                std::vector<double> values;
                for (std::size_t f = 0; f < result.k; ++f) {
                    const auto& cell = result.cell(model, t, f);
                    if (cell.valid) {
                        values.push_back(std::string(metric) == "auroc"
                                             ? cell.auroc_value
                                             : cell.auprc_value);
                    }
                }
                if (values.empty()) {
                    row.push_back("n/a");
                } else {
                    auto rep = cv_aggregate(values, metric, result.tasks[t]);
                    row.push_back(format_fixed(rep.mean, 3) + " +/- " +
                                  format_fixed(rep.std_dev, 3));
                }
            }
        }
        grid.push_back(row);
    }

    std::vector<std::size_t> widths(grid[0].size(), 0);
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::string out;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t c = 0; c < grid[r].size(); ++c) {
            if (c > 0) out += "  ";
            out += grid[r][c];
            out.append(widths[c] - grid[r][c].size(), ' ');
        }
        out += '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < widths.size(); ++c) {
                total += widths[c] + (c > 0 ? 2 : 0);
            }
            out.append(total, '-');
            out += '\n';
        }
    }
    return out;
}

void write_curves(const BenchmarkResult& result, const std::string& dir) {
    ensure_dir(dir);
    for (const auto& model : result.models) {
        for (std::size_t t = 0; t < result.tasks.size(); ++t) {
            for (std::size_t f = 0; f < result.k; ++f) {
                const auto& cell = result.cell(model, t, f);
                if (!cell.valid) continue;
                ScoredSet s{cell.scores, cell.labels};
                std::string stem = dir + "/" + model + "." + result.tasks[t] +
                                   ".fold" + std::to_string(f);

                std::string roc = "fpr,tpr\n";
                for (const auto& p : roc_points(s)) {
                    roc += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
                }
                write_text_file(stem + ".roc.csv", roc);

                std::string pr = "recall,precision\n";
                for (const auto& p : pr_points(s)) {
                    pr += format_double(p.recall) + "," + format_double(p.precision) +
                          "\n";
                }
                write_text_file(stem + ".pr.csv", pr);

                std::string cal = "mean_predicted,observed_fraction,count\n";
                for (const auto& b : calibration_curve(s).bins) {
                    cal += format_double(b.mean_predicted) + "," +
                           format_double(b.observed_fraction) + "," +
                           std::to_string(b.count) + "\n";
                }
                write_text_file(stem + ".cal.csv", cal);
            }
        }
    }
}

}  // namespace

const std::vector<std::string>& benchmark_models() {
    static const std::vector<std::string> models{"logreg", "gbdt", "mlp_single",
                                                 "mtl_plain", "codmtl"};
    return models;
}

const FoldEval& BenchmarkResult::cell(const std::string& model, std::size_t task,
                                      std::size_t fold) const {
    return cells[model_index(model)][task][fold];
}

CVReport BenchmarkResult::report(const std::string& model, std::size_t task,
                                 const std::string& metric) const {
    std::vector<double> values;
    for (std::size_t f = 0; f < k; ++f) {
        const auto& c = cell(model, task, f);
        if (c.valid) {
            values.push_back(metric == "auroc" ? c.auroc_value : c.auprc_value);
        }
    }
    return cv_aggregate(values, metric, tasks[task]);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }

    try {
        RunConfig cfg;
        cfg.out_dir = root.value("out_dir", cfg.out_dir);
        cfg.seed = root.value("seed", cfg.seed);
        cfg.k = read_count(root, "k", cfg.k);
        if (root.contains("top_k") && !root.at("top_k").is_null()) {
            cfg.top_k = read_count(root, "top_k", 0);
        }
        cfg.jobs = read_count(root, "jobs", cfg.jobs);
        cfg.tasks = root.value("tasks", cfg.tasks);
        if (root.contains("data")) {
            const auto& d = root.at("data");
            cfg.data_path = d.value("data_path", cfg.data_path);
            cfg.schema_path = d.value("schema_path", cfg.schema_path);
            std::string delim = d.value("delimiter", std::string(1, cfg.delimiter));
            if (delim.size() != 1) {
                throw ConfigError("data.delimiter must be a single character");
            }
            cfg.delimiter = delim[0];
        }
        cfg.model_path = root.value("model_path", cfg.model_path);
        if (root.contains("gbdt")) cfg.gbdt = gbdt_config_from(root.at("gbdt"), cfg.gbdt);
        if (root.contains("mtl")) cfg.mtl = mtl_config_from(root.at("mtl"), cfg.mtl);
        if (root.contains("embed")) {
            cfg.embed = embed_config_from(root.at("embed"), cfg.embed);
        }
        if (root.contains("synth")) {
            cfg.synth = synth_config_from(root.at("synth"), cfg.synth);
        }
        if (cfg.tasks.empty()) throw ConfigError("config: tasks must be nonempty");
        {
            std::vector<std::string> sorted = cfg.tasks;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw ConfigError("config: task names must be unique");
            }
        }
        if (cfg.k < 2) throw ConfigError("config: k must be >= 2");
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config is malformed: " + std::string(e.what()));
    }
}

void run_synth(const RunConfig& config) {
    SynthConfig scfg = config.synth;
    scfg.seed = config.seed;
    scfg.task_names = config.tasks;
    scfg.validate();

    SynthOutput out = generate_raw(scfg);
    ensure_dir(config.out_dir);

    std::string csv = join_cells(out.table.header, config.delimiter) + "\n";
    for (const auto& row : out.table.rows) {
        csv += join_cells(row, config.delimiter) + "\n";
    }
    write_text_file(config.out_dir + "/data.csv", csv);
    save_schema(out.schema, config.out_dir + "/schema.txt");

    json manifest;
    manifest["seed"] = scfg.seed;
    manifest["n_rows"] = out.table.rows.size();
    manifest["n_features"] = scfg.n_features;
    manifest["tasks"] = scfg.task_names;
    manifest["n_task1_pos"] = scfg.n_task1_pos;
    manifest["n_task2_pos"] = scfg.n_task2_pos;
    manifest["n_negative"] = scfg.n_negative;
    manifest["overlap_count"] = scfg.overlap_count();
    manifest["n_informative_shared"] = scfg.n_informative_shared;
    manifest["n_informative_per_task"] = scfg.n_informative_per_task;
    manifest["signal_strength"] = scfg.signal_strength;
    manifest["label_overlap_rate"] = scfg.label_overlap_rate;
    manifest["missing_rate"] = scfg.missing_rate;
    manifest["latent_noise_shared"] = scfg.latent_noise_shared;
    manifest["latent_noise_private"] = scfg.latent_noise_private;
    manifest["loading_lo"] = scfg.loading_lo;
    manifest["loading_hi"] = scfg.loading_hi;
    write_text_file(config.out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

BenchmarkResult run_benchmark(const RunConfig& config, bool write_files) {
    auto t_start = std::chrono::steady_clock::now();
    LoadedData data = load_data(config);
    const Cohort& cohort = data.cohort;
    const std::size_t m = cohort.n_tasks();

    auto folds = kfold_split(cohort, config.k, mix_seed(config.seed, kFoldSeedTag));

    BenchmarkResult result;
    result.models = benchmark_models();
    result.tasks = config.tasks;
    result.k = config.k;
    result.cells.assign(result.models.size(),
                        std::vector<std::vector<FoldEval>>(
                            m, std::vector<FoldEval>(config.k)));

    std::vector<std::function<void()>> work;
    std::vector<double> durations;
    std::vector<std::string> duration_names;
    std::mutex timing_mutex;

    auto timed = [&](std::string name, std::function<void()> fn) {
        work.push_back([&, name = std::move(name), fn = std::move(fn)] {
            auto t0 = std::chrono::steady_clock::now();
            fn();
            std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
            std::lock_guard<std::mutex> lock(timing_mutex);
            duration_names.push_back(name);
            durations.push_back(dt.count());
        });
    };

    for (std::size_t f = 0; f < config.k; ++f) {
        for (std::size_t j = 0; j < m; ++j) {
            timed("logreg." + config.tasks[j] + ".fold" + std::to_string(f),
                  [&, f, j] {
                      bench_logreg(config, cohort, folds[f], j,
                                   mix_seed(config.seed, kModelTagBase + 0, j, f),
                                   result.cells[0][j][f]);
                  });
            timed("gbdt." + config.tasks[j] + ".fold" + std::to_string(f), [&, f, j] {
                bench_gbdt(config, cohort, folds[f], j,
                           mix_seed(config.seed, kModelTagBase + 1, j, f),
                           result.cells[1][j][f]);
            });
            timed("mlp_single." + config.tasks[j] + ".fold" + std::to_string(f),
                  [&, f, j] {
                      bench_mlp_single(config, cohort, folds[f], j,
                                       mix_seed(config.seed, kModelTagBase + 2, j, f),
                                       result.cells[2][j][f]);
                  });
        }
        timed("mtl_plain.fold" + std::to_string(f), [&, f] {
            std::vector<FoldEval*> cells;
            for (std::size_t j = 0; j < m; ++j) cells.push_back(&result.cells[3][j][f]);
            bench_mtl_plain(config, cohort, folds[f],
                            mix_seed(config.seed, kModelTagBase + 3, kAllTasks, f),
                            cells);
        });
        timed("codmtl.fold" + std::to_string(f), [&, f] {
            std::vector<FoldEval*> cells;
            for (std::size_t j = 0; j < m; ++j) cells.push_back(&result.cells[4][j][f]);
            bench_codmtl(config, cohort, folds[f],
                         mix_seed(config.seed, kModelTagBase + 4, kAllTasks, f),
                         cells);
        });
    }

    run_parallel(work, std::max<std::size_t>(1, config.jobs));

    std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t_start;
    result.wall_seconds = wall.count();

    if (write_files) {
        ensure_dir(config.out_dir);
        json report;
        report["tasks"] = config.tasks;
        report["k"] = config.k;
        report["seed"] = config.seed;
        report["top_k"] =
            config.top_k.value_or(std::min<std::size_t>(cohort.n_features(), 64));
        report["config"] = json{{"data_path", config.data_path},
                                {"schema_path", config.schema_path},
                                {"gbdt", gbdt_config_echo(config.gbdt)},
                                {"mtl", mtl_config_echo(config.mtl)},
                                {"embed", embed_config_echo(config.embed)}};
        json results = json::object();
        for (const auto& model : result.models) {
            json per_task = json::object();
            for (std::size_t t = 0; t < result.tasks.size(); ++t) {
                json entry;
                std::size_t valid = 0;
                for (std::size_t f = 0; f < result.k; ++f) {
                    if (result.cell(model, t, f).valid) ++valid;
                }
                entry["valid_folds"] = valid;
                entry["auroc"] = fold_metric_json(result, model, t, "auroc");
                entry["auprc"] = fold_metric_json(result, model, t, "auprc");
                per_task[result.tasks[t]] = entry;
            }
            results[model] = per_task;
        }
        report["results"] = results;
        write_text_file(config.out_dir + "/report.json", report.dump(2) + "\n");
        write_text_file(config.out_dir + "/table.txt", render_table(result));
        write_curves(result, config.out_dir + "/curves");

        // Timings live outside the report so reruns stay byte-identical.
        std::vector<std::size_t> order(duration_names.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return duration_names[a] < duration_names[b];
        });
        std::string timings;
        for (std::size_t i : order) {
            timings += duration_names[i] + " " + format_fixed(durations[i], 3) + "s\n";
        }
        timings += "total " + format_fixed(result.wall_seconds, 3) + "s\n";
        write_text_file(config.out_dir + "/timings.txt", timings);
    }
    return result;
}

void run_train(const RunConfig& config) {
    LoadedData data = load_data(config);
    const Cohort& cohort = data.cohort;

    std::vector<std::size_t> all_rows(cohort.n_rows());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    auto art = train_codmtl_fold(config, cohort, all_rows,
                                 mix_seed(config.seed, kModelTagBase + 4, kAllTasks));

    ModelBundle bundle;
    bundle.task_names = config.tasks;
    bundle.schema = cohort.schema;
    bundle.code_maps = data.code_maps;
    bundle.gbdts = std::move(art.gbdts);
    bundle.embeddings = std::move(art.embeddings);
    bundle.mtl = std::move(art.model);
    bundle.gbdt_config = config.gbdt;
    bundle.mtl_config = config.mtl;
    bundle.embed_config = config.embed;
    bundle.top_k = config.top_k;
    bundle.seed = config.seed;

    ensure_dir(config.out_dir);
    save_bundle(bundle, config.out_dir + "/model.json");

    std::string history = "epoch,total";
    for (const auto& task : config.tasks) history += ",ce_" + task;
    for (const auto& task : config.tasks) history += ",distill_" + task;
    history += "\n";
    for (std::size_t e = 0; e < art.history.total.size(); ++e) {
        history += std::to_string(e) + "," + format_double(art.history.total[e]);
        for (std::size_t j = 0; j < config.tasks.size(); ++j) {
            history += "," + format_double(art.history.task_ce(e, j));
        }
        for (std::size_t j = 0; j < config.tasks.size(); ++j) {
            history += "," + format_double(art.history.task_distill(e, j));
        }
        history += "\n";
    }
    write_text_file(config.out_dir + "/history.csv", history);
}

void run_predict(const RunConfig& config) {
    if (config.model_path.empty()) {
        throw ConfigError("config needs model_path for predict");
    }
    if (config.data_path.empty()) {
        throw ConfigError("config needs data.data_path for predict");
    }
    ModelBundle bundle = load_bundle(config.model_path);
    RawTable table = load_table(config.data_path, bundle.schema, config.delimiter);
    Matrix probs = predict_table(bundle, table);
    auto ids = extract_ids(table);

    std::string csv = "id";
    for (const auto& task : bundle.task_names) csv += "," + task;
    csv += "\n";
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        csv += ids[r];
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            csv += "," + format_double(probs(r, j));
        }
        csv += "\n";
    }
    ensure_dir(config.out_dir);
    write_text_file(config.out_dir + "/predictions.csv", csv);
}

void run_export_curves(const RunConfig& config) {
    if (config.model_path.empty()) {
        throw ConfigError("config needs model_path for export-curves");
    }
    ModelBundle bundle = load_bundle(config.model_path);
    if (config.data_path.empty()) {
        throw ConfigError("config needs data.data_path for export-curves");
    }
    RawTable table = load_table(config.data_path, bundle.schema, config.delimiter);
    Matrix labels = extract_labels(table, bundle.task_names);
    Matrix probs = predict_table(bundle, table);

    std::string dir = config.out_dir + "/curves";
    ensure_dir(dir);
    for (std::size_t j = 0; j < bundle.task_names.size(); ++j) {
        ScoredSet s;
        s.scores.reserve(probs.rows());
        s.labels.reserve(probs.rows());
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            s.scores.push_back(probs(r, j));
            s.labels.push_back(labels(r, j) != 0.0 ? 1 : 0);
        }
        std::string stem = dir + "/model." + bundle.task_names[j];

        std::string roc = "fpr,tpr\n";
        for (const auto& p : roc_points(s)) {
            roc += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
        }
        write_text_file(stem + ".roc.csv", roc);

        std::string pr = "recall,precision\n";
        for (const auto& p : pr_points(s)) {
            pr += format_double(p.recall) + "," + format_double(p.precision) + "\n";
        }
        write_text_file(stem + ".pr.csv", pr);

        std::string cal = "mean_predicted,observed_fraction,count\n";
        for (const auto& b : calibration_curve(s).bins) {
            cal += format_double(b.mean_predicted) + "," +
                   format_double(b.observed_fraction) + "," + std::to_string(b.count) +
                   "\n";
        }
        write_text_file(stem + ".cal.csv", cal);
    }
}

}  // namespace codmtl
