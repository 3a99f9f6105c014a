#include "codmtl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace codmtl {

namespace {

std::string kind_name(ColumnKind kind) {
    return kind == ColumnKind::Categorical ? "categorical" : "numerical";
}

std::string role_name(ColumnRole role) {
    switch (role) {
        case ColumnRole::Donor: return "donor";
        case ColumnRole::Recipient: return "recipient";
        default: return "unspecified";
    }
}

ColumnKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "numerical") return ColumnKind::Numerical;
    throw DataError("schema: unknown column kind '" + s + "' (" + where + ")");
}

ColumnRole parse_role(const std::string& s, const std::string& where) {
    if (s == "donor") return ColumnRole::Donor;
    if (s == "recipient") return ColumnRole::Recipient;
    if (s == "unspecified") return ColumnRole::Unspecified;
    throw DataError("schema: unknown column role '" + s + "' (" + where + ")");
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == delimiter) {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    return cells;
}

}  // namespace

void FeatureSchema::validate() const {
    if (columns.empty()) throw DataError("schema has no columns");
    std::set<std::string> seen;
    for (const auto& col : columns) {
        if (!seen.insert(col.name).second) {
            throw DataError("schema: duplicate column name '" + col.name + "'");
        }
    }
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> RawTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);

    FeatureSchema schema;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string name, kind, role;
        if (!(fields >> name)) continue;  // blank/comment line
        if (!(fields >> kind)) {
            throw DataError("schema line " + std::to_string(line_no) +
                            ": expected 'name kind [role]'");
        }
        std::string where = path + ":" + std::to_string(line_no);
        Column col;
        col.name = name;
        col.kind = parse_kind(kind, where);
        col.role = (fields >> role) ? parse_role(role, where) : ColumnRole::Unspecified;
        schema.columns.push_back(std::move(col));
    }
    schema.validate();
    return schema;
}

void save_schema(const FeatureSchema& schema, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema file: " + path);
    out << "# name kind role\n";
    for (const auto& col : schema.columns) {
        out << col.name << ' ' << kind_name(col.kind) << ' ' << role_name(col.role)
            << '\n';
    }
}

RawTable load_table(const std::string& path, const FeatureSchema& schema,
                    char delimiter) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file: " + path);

    RawTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("data file is empty: " + path);
    table.header = split_line(line, delimiter);

    for (const auto& col : schema.columns) {
        if (!table.column(col.name)) {
            throw DataError("data file header lacks schema column '" + col.name + "'");
        }
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line, delimiter);
        if (cells.size() != table.header.size()) {
            throw DataError("row arity mismatch at line " + std::to_string(line_no) +
                            ": expected " + std::to_string(table.header.size()) +
                            " cells, got " + std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

void CodeMaps::fit(const RawTable& table, const FeatureSchema& schema) {
    categories_.clear();
    lookup_.clear();
    for (const auto& col : schema.columns) {
        if (col.kind != ColumnKind::Categorical) continue;
        auto ci = table.column(col.name);
        auto& cats = categories_[col.name];
        auto& look = lookup_[col.name];
        for (const auto& row : table.rows) {
            const std::string& value = row[*ci];
            if (value.empty()) continue;  // missing stays code 0
            if (look.emplace(value, static_cast<int>(cats.size()) + 1).second) {
                cats.push_back(value);
            }
        }
    }
}

int CodeMaps::encode_value(const std::string& column, const std::string& value) const {
    if (value.empty()) return 0;
    auto col = lookup_.find(column);
    if (col == lookup_.end()) return 0;
    auto hit = col->second.find(value);
    return hit == col->second.end() ? 0 : hit->second;
}

const std::string& CodeMaps::decode_value(const std::string& column, int code) const {
    auto col = categories_.find(column);
    if (col == categories_.end() || code < 1 ||
        static_cast<std::size_t>(code) > col->second.size()) {
        throw DataError("code map: no category for code " + std::to_string(code) +
                        " in column '" + column + "'");
    }
    return col->second[static_cast<std::size_t>(code) - 1];
}

void CodeMaps::set_categories(std::map<std::string, std::vector<std::string>> cats) {
    categories_ = std::move(cats);
    lookup_.clear();
    for (const auto& [name, list] : categories_) {
        auto& look = lookup_[name];
        for (std::size_t i = 0; i < list.size(); ++i) {
            look.emplace(list[i], static_cast<int>(i) + 1);
        }
    }
}

namespace {

Cohort encode_impl(const RawTable& table, const FeatureSchema& schema,
                   const CodeMaps& maps) {
    schema.validate();
    Cohort cohort;
    cohort.schema = schema;
    cohort.X = Matrix(table.rows.size(), schema.size());

    std::vector<std::size_t> col_index(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
        auto ci = table.column(schema.columns[f].name);
        if (!ci) {
            throw DataError("table lacks schema column '" + schema.columns[f].name + "'");
        }
        col_index[f] = *ci;
    }

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const auto& col = schema.columns[f];
            const std::string& cell = row[col_index[f]];
            if (col.kind == ColumnKind::Categorical) {
                cohort.X(r, f) = static_cast<double>(maps.encode_value(col.name, cell));
            } else if (cell.empty()) {
                cohort.X(r, f) = std::numeric_limits<double>::quiet_NaN();
            } else {
                double v = parse_double(cell);
                if (!std::isfinite(v)) {
                    throw DataError("non-finite numeric value in column '" + col.name +
                                    "' row " + std::to_string(r + 1));
                }
                cohort.X(r, f) = v;
            }
        }
    }
    return cohort;
}

}  // namespace

EncodeResult encode(const RawTable& table, const FeatureSchema& schema) {
    EncodeResult result;
    result.code_maps.fit(table, schema);
    result.cohort = encode_impl(table, schema, result.code_maps);
    return result;
}

Cohort encode_with(const RawTable& table, const FeatureSchema& schema,
                   const CodeMaps& maps) {
    return encode_impl(table, schema, maps);
}

Cohort impute_zero(Cohort cohort) {
    for (double& v : cohort.X.data()) {
        if (std::isnan(v)) v = 0.0;
    }
    return cohort;
}

Matrix extract_labels(const RawTable& table, const std::vector<std::string>& tasks) {
    Matrix y(table.rows.size(), tasks.size());
    for (std::size_t j = 0; j < tasks.size(); ++j) {
        auto ci = table.column(tasks[j]);
        if (!ci) throw DataError("data file lacks label column '" + tasks[j] + "'");
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const std::string& cell = table.rows[r][*ci];
            if (cell == "0") {
                y(r, j) = 0.0;
            } else if (cell == "1") {
                y(r, j) = 1.0;
            } else {
                throw DataError("label column '" + tasks[j] + "' row " +
                                std::to_string(r + 1) + " is not 0/1: '" + cell + "'");
            }
        }
    }
    return y;
}

std::vector<std::string> extract_ids(const RawTable& table) {
    std::vector<std::string> ids;
    ids.reserve(table.rows.size());
    auto ci = table.column("id");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ids.push_back(ci ? table.rows[r][*ci] : std::to_string(r));
    }
    return ids;
}

std::vector<FoldSplit> kfold_split(const Cohort& cohort, std::size_t k,
                                   std::uint64_t seed) {
    const std::size_t n = cohort.n_rows();
    if (k < 2) throw ConfigError("kfold_split needs K >= 2");
    if (k > n) throw ConfigError("kfold_split: K exceeds row count");

    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    Rng rng(seed);
    rng.shuffle(rows);

    // Group shuffled rows by joint label pattern, then deal each group across
    // folds with one running round-robin counter so totals stay balanced.
    std::map<std::vector<std::uint8_t>, std::vector<std::size_t>> groups;
    for (std::size_t r : rows) {
        std::vector<std::uint8_t> pattern(cohort.n_tasks());
        for (std::size_t j = 0; j < cohort.n_tasks(); ++j) {
            pattern[j] = cohort.Y(r, j) != 0.0 ? 1 : 0;
        }
        groups[pattern].push_back(r);
    }

    std::vector<std::vector<std::size_t>> fold_rows(k);
    std::size_t next_fold = 0;
    for (auto& [pattern, members] : groups) {
        for (std::size_t r : members) {
            fold_rows[next_fold].push_back(r);
            next_fold = (next_fold + 1) % k;
        }
    }

    std::vector<FoldSplit> splits(k);
    for (std::size_t f = 0; f < k; ++f) {
        splits[f].fold_index = f;
        splits[f].test_rows = fold_rows[f];
        std::sort(splits[f].test_rows.begin(), splits[f].test_rows.end());
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            splits[f].train_rows.insert(splits[f].train_rows.end(),
                                        fold_rows[g].begin(), fold_rows[g].end());
        }
        std::sort(splits[f].train_rows.begin(), splits[f].train_rows.end());
    }
    return splits;
}

}  // namespace codmtl
