#include "doctest.h"

#include <cmath>
#include <set>

#include "codmtl/dataset.hpp"
#include "test_util.hpp"

using namespace codmtl;

namespace {

FeatureSchema two_col_schema() {
    FeatureSchema schema;
    schema.columns = {{"age", ColumnKind::Numerical, ColumnRole::Recipient},
                      {"blood_type", ColumnKind::Categorical, ColumnRole::Donor}};
    return schema;
}

Cohort labeled_cohort(std::size_t n, const std::vector<std::uint8_t>& y1,
                      const std::vector<std::uint8_t>& y2 = {}) {
    Cohort cohort;
    cohort.X = Matrix(n, 1);
    cohort.Y = Matrix(n, y2.empty() ? 1 : 2);
    for (std::size_t r = 0; r < n; ++r) {
        cohort.X(r, 0) = static_cast<double>(r);
        cohort.Y(r, 0) = y1[r];
        if (!y2.empty()) cohort.Y(r, 1) = y2[r];
    }
    cohort.schema.columns = {{"f0", ColumnKind::Numerical, ColumnRole::Unspecified}};
    for (std::size_t r = 0; r < n; ++r) cohort.ids.push_back(std::to_string(r));
    return cohort;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("schema file round trip and validation") {
    testutil::TempDir tmp("schema");
    testutil::write_file(tmp.file("schema.txt"),
                         "# comment line\n"
                         "age numerical recipient\n"
                         "blood_type categorical donor\n"
                         "\n"
                         "misc numerical\n");
    auto schema = load_schema(tmp.file("schema.txt"));
    REQUIRE_EQ(schema.size(), 3u);
    CHECK_EQ(schema.columns[0].name, "age");
    CHECK(schema.columns[0].kind == ColumnKind::Numerical);
    CHECK(schema.columns[1].role == ColumnRole::Donor);
    CHECK(schema.columns[2].role == ColumnRole::Unspecified);

    save_schema(schema, tmp.file("copy.txt"));
    auto reloaded = load_schema(tmp.file("copy.txt"));
    CHECK_EQ(reloaded.size(), schema.size());
    for (std::size_t i = 0; i < schema.size(); ++i) {
        CHECK_EQ(reloaded.columns[i].name, schema.columns[i].name);
        CHECK(reloaded.columns[i].kind == schema.columns[i].kind);
        CHECK(reloaded.columns[i].role == schema.columns[i].role);
    }

    testutil::write_file(tmp.file("dup.txt"), "a numerical\na categorical\n");
    CHECK_THROWS_AS(load_schema(tmp.file("dup.txt")), DataError);
    CHECK_THROWS_AS(load_schema(tmp.file("missing.txt")), DataError);
}

TEST_CASE("load_table happy path, missing cells, and errors") {
    testutil::TempDir tmp("table");
    auto schema = two_col_schema();

    testutil::write_file(tmp.file("data.csv"),
                         "age,blood_type\n"
                         "30,A\n"
                         ",B\n"
                         "41,A\n");
    auto table = load_table(tmp.file("data.csv"), schema);
    REQUIRE_EQ(table.rows.size(), 3u);
    CHECK_EQ(table.rows[1][0], "");  // missing numeric marked, no error
    CHECK_EQ(table.rows[2][1], "A");

    testutil::write_file(tmp.file("badheader.csv"), "age,type\n30,A\n");
    try {
        load_table(tmp.file("badheader.csv"), schema);
        FAIL("expected header mismatch");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("blood_type") != std::string::npos);
    }

    testutil::write_file(tmp.file("arity.csv"), "age,blood_type\n30,A\n31\n");
    try {
        load_table(tmp.file("arity.csv"), schema);
        FAIL("expected arity mismatch");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    CHECK_THROWS_AS(load_table(tmp.file("nope.csv"), schema), DataError);
}

TEST_CASE("encode assigns first-appearance codes and keeps numericals") {
    auto schema = two_col_schema();
    RawTable table;
    table.header = {"age", "blood_type"};
    table.rows = {{"30", "A"}, {"40", "B"}, {"50", "A"}};
    auto enc = encode(table, schema);
    CHECK_EQ(enc.cohort.X(0, 1), 1.0);
    CHECK_EQ(enc.cohort.X(1, 1), 2.0);
    CHECK_EQ(enc.cohort.X(2, 1), 1.0);
    CHECK_EQ(enc.cohort.X(0, 0), 30.0);

    // Unseen category at prediction time encodes to 0.
    RawTable fresh;
    fresh.header = table.header;
    fresh.rows = {{"25", "C"}, {"26", "B"}};
    auto cohort = encode_with(fresh, schema, enc.code_maps);
    CHECK_EQ(cohort.X(0, 1), 0.0);
    CHECK_EQ(cohort.X(1, 1), 2.0);
}

TEST_CASE("all-numerical schema passes values through untouched") {
    FeatureSchema schema;
    schema.columns = {{"a", ColumnKind::Numerical, ColumnRole::Unspecified},
                      {"b", ColumnKind::Numerical, ColumnRole::Unspecified}};
    RawTable table;
    table.header = {"a", "b"};
    table.rows = {{"1.5", "-2"}, {"0.25", "1e3"}};
    auto enc = encode(table, schema);
    CHECK_EQ(enc.cohort.X(0, 0), 1.5);
    CHECK_EQ(enc.cohort.X(0, 1), -2.0);
    CHECK_EQ(enc.cohort.X(1, 1), 1000.0);
}

TEST_CASE("code map decode inverts encode for seen categories") {
    auto schema = two_col_schema();
    RawTable table;
    table.header = {"age", "blood_type"};
    table.rows = {{"1", "O"}, {"2", "AB"}, {"3", "O"}, {"4", "B"}};
    auto enc = encode(table, schema);
    for (const auto& value : {"O", "AB", "B"}) {
        int code = enc.code_maps.encode_value("blood_type", value);
        CHECK(code >= 1);
        CHECK_EQ(enc.code_maps.decode_value("blood_type", code), value);
    }
    CHECK_THROWS_AS(enc.code_maps.decode_value("blood_type", 0), DataError);
    CHECK_THROWS_AS(enc.code_maps.decode_value("blood_type", 9), DataError);
}

TEST_CASE("impute_zero clears exactly the missing marks") {
    auto schema = two_col_schema();
    RawTable table;
    table.header = {"age", "blood_type"};
    table.rows = {{"", "A"}, {"2.5", ""}, {"", ""}};
    auto enc = encode(table, schema);
    CHECK(std::isnan(enc.cohort.X(0, 0)));
    CHECK_EQ(enc.cohort.X(1, 1), 0.0);  // missing categorical is already code 0

    auto imputed = impute_zero(enc.cohort);
    CHECK_EQ(imputed.X(0, 0), 0.0);
    CHECK_EQ(imputed.X(0, 1), 1.0);
    CHECK_EQ(imputed.X(1, 0), 2.5);
    CHECK_EQ(imputed.X(2, 0), 0.0);
    CHECK_EQ(imputed.X(2, 1), 0.0);
    for (double v : imputed.X.data()) CHECK(std::isfinite(v));

    // untouched rows stay identical
    Cohort clean;
    clean.X = Matrix(1, 2);
    clean.X(0, 0) = 7.0;
    clean.X(0, 1) = -1.0;
    auto same = impute_zero(clean);
    CHECK_EQ(same.X(0, 0), 7.0);
    CHECK_EQ(same.X(0, 1), -1.0);
}

TEST_CASE("label and id extraction") {
    RawTable table;
    table.header = {"id", "x", "t1"};
    table.rows = {{"p1", "0.5", "1"}, {"p2", "0.5", "0"}};
    auto y = extract_labels(table, {"t1"});
    CHECK_EQ(y(0, 0), 1.0);
    CHECK_EQ(y(1, 0), 0.0);
    CHECK_THROWS_AS(extract_labels(table, {"t2"}), DataError);

    table.rows.push_back({"p3", "0.5", "yes"});
    CHECK_THROWS_AS(extract_labels(table, {"t1"}), DataError);

    auto ids = extract_ids(table);
    CHECK_EQ(ids[0], "p1");
    RawTable anon;
    anon.header = {"x"};
    anon.rows = {{"1"}, {"2"}};
    CHECK_EQ(extract_ids(anon), std::vector<std::string>{"0", "1"});
}

TEST_CASE("kfold on the 8-row balanced single-label cohort") {
    // Hand-enumerated: 4 positives and 4 negatives dealt over 4 folds give
    // exactly one of each per test fold.
    auto cohort = labeled_cohort(8, {1, 0, 1, 0, 1, 0, 1, 0});
    auto splits = kfold_split(cohort, 4, 7);
    REQUIRE_EQ(splits.size(), 4u);
    for (const auto& split : splits) {
        REQUIRE_EQ(split.test_rows.size(), 2u);
        int pos = 0;
        for (auto r : split.test_rows) pos += cohort.Y(r, 0) != 0.0 ? 1 : 0;
        CHECK_EQ(pos, 1);
        CHECK_EQ(split.train_rows.size(), 6u);
    }
}

TEST_CASE("kfold partitions 100 rows into four disjoint folds of 25") {
    std::vector<std::uint8_t> y(100);
    for (std::size_t i = 0; i < 100; ++i) y[i] = i % 2 == 0 ? 1 : 0;
    auto cohort = labeled_cohort(100, y);
    auto splits = kfold_split(cohort, 4, 3);
    std::set<std::size_t> seen;
    for (const auto& split : splits) {
        CHECK_EQ(split.test_rows.size(), 25u);
        for (auto r : split.test_rows) {
            CHECK(seen.insert(r).second);  // pairwise disjoint
        }
    }
    CHECK_EQ(seen.size(), 100u);
}

TEST_CASE("kfold determinism and errors") {
    auto cohort = labeled_cohort(20, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0,
                                      1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
    auto a = kfold_split(cohort, 4, 99);
    auto b = kfold_split(cohort, 4, 99);
    for (std::size_t f = 0; f < 4; ++f) {
        CHECK_EQ(a[f].test_rows, b[f].test_rows);
        CHECK_EQ(a[f].train_rows, b[f].train_rows);
    }
    auto c = kfold_split(cohort, 4, 100);
    bool any_diff = false;
    for (std::size_t f = 0; f < 4; ++f) {
        if (a[f].test_rows != c[f].test_rows) any_diff = true;
    }
    CHECK(any_diff);

    CHECK_THROWS_AS(kfold_split(cohort, 1, 0), ConfigError);
    CHECK_THROWS_AS(kfold_split(cohort, 21, 0), ConfigError);
}

TEST_CASE("kfold stratifies every joint label pattern within one") {
    Rng rng(5150);
    for (int rep = 0; rep < 20; ++rep) {
        std::size_t n = 30 + rng.below(200);
        std::vector<std::uint8_t> y1(n), y2(n);
        for (std::size_t i = 0; i < n; ++i) {
            y1[i] = rng.uniform() < 0.35 ? 1 : 0;
            y2[i] = rng.uniform() < 0.2 ? 1 : 0;
        }
        auto cohort = labeled_cohort(n, y1, y2);
        std::size_t k = 2 + rng.below(4);
        auto splits = kfold_split(cohort, k, rng.next());

        // fold partition: union is everything, intersections empty
        std::set<std::size_t> seen;
        for (const auto& split : splits) {
            for (auto r : split.test_rows) CHECK(seen.insert(r).second);
        }
        CHECK_EQ(seen.size(), n);

        // per-pattern counts differ by at most one across folds
        for (int pattern = 0; pattern < 4; ++pattern) {
            std::vector<std::size_t> counts;
            for (const auto& split : splits) {
                std::size_t c = 0;
                for (auto r : split.test_rows) {
                    int p = (cohort.Y(r, 0) != 0.0 ? 1 : 0) * 2 +
                            (cohort.Y(r, 1) != 0.0 ? 1 : 0);
                    if (p == pattern) ++c;
                }
                counts.push_back(c);
            }
            auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
            CHECK(*mx - *mn <= 1);
        }
    }
}

}  // TEST_SUITE
