#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codmtl/common.hpp"

namespace codmtl {

enum class ColumnKind { Categorical, Numerical };
enum class ColumnRole { Donor, Recipient, Unspecified };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numerical;
    ColumnRole role = ColumnRole::Unspecified;
};

// Ordered feature columns; names unique, at least one column.
struct FeatureSchema {
    std::vector<Column> columns;

    std::size_t size() const { return columns.size(); }
    void validate() const;
    std::optional<std::size_t> index_of(const std::string& name) const;
};

// Raw delimited-text table: header plus string cells, empty cell = missing.
struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(const std::string& name) const;
};

// Feature matrix + multi-label targets. Between encode() and impute_zero()
// missing entries are marked NaN; afterwards X is sentinel-free.
struct Cohort {
    Matrix X;
    Matrix Y;
    FeatureSchema schema;
    std::vector<std::string> ids;

    std::size_t n_rows() const { return X.rows(); }
    std::size_t n_features() const { return X.cols(); }
    std::size_t n_tasks() const { return Y.cols(); }
};

struct FoldSplit {
    std::size_t fold_index = 0;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

// First-appearance ordinal codes per categorical column. Code 0 is reserved
// for missing/unknown; seen categories get 1, 2, ... in appearance order.
class CodeMaps {
public:
    void fit(const RawTable& table, const FeatureSchema& schema);

    int encode_value(const std::string& column, const std::string& value) const;
    // Inverse for seen categories (code >= 1).
    const std::string& decode_value(const std::string& column, int code) const;

    const std::map<std::string, std::vector<std::string>>& categories() const {
        return categories_;
    }
    void set_categories(std::map<std::string, std::vector<std::string>> cats);

private:
    // column name -> category list; code = index + 1
    std::map<std::string, std::vector<std::string>> categories_;
    std::map<std::string, std::map<std::string, int>> lookup_;
};

// Schema file: one "name kind role" line per column, '#' comments allowed.
FeatureSchema load_schema(const std::string& path);
void save_schema(const FeatureSchema& schema, const std::string& path);

RawTable load_table(const std::string& path, const FeatureSchema& schema,
                    char delimiter = ',');

// Fits code maps on the table and encodes features in schema order. Missing
// numericals become NaN marks (cleared by impute_zero); missing categoricals
// encode straight to 0.
struct EncodeResult {
    Cohort cohort;  // features only; Y and ids left empty
    CodeMaps code_maps;
};
EncodeResult encode(const RawTable& table, const FeatureSchema& schema);

// Prediction-time encoding with previously fitted maps; unseen categories -> 0.
Cohort encode_with(const RawTable& table, const FeatureSchema& schema,
                   const CodeMaps& maps);

// Replaces every NaN mark in X with 0.0.
Cohort impute_zero(Cohort cohort);

// Label columns must hold 0/1 values; task name order defines Y column order.
Matrix extract_labels(const RawTable& table, const std::vector<std::string>& tasks);

// The "id" column when present, else the 0-based row number as text.
std::vector<std::string> extract_ids(const RawTable& table);

// Shuffles rows with a seeded generator, then stratifies by the joint label
// pattern so each pattern's per-fold test count differs by at most one.
std::vector<FoldSplit> kfold_split(const Cohort& cohort, std::size_t k,
                                   std::uint64_t seed);

}  // namespace codmtl
