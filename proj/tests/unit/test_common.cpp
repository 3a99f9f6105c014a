#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "codmtl/common.hpp"

using namespace codmtl;

TEST_SUITE("common") {

TEST_CASE("mix_seed derives distinct deterministic streams") {
    CHECK_EQ(mix_seed(42, 1), mix_seed(42, 1));
    CHECK_NE(mix_seed(42, 1), mix_seed(42, 2));
    CHECK_NE(mix_seed(42, 1), mix_seed(43, 1));
    CHECK_NE(mix_seed(42, 1, 2), mix_seed(42, 2, 1));
}

TEST_CASE("rng is reproducible and shuffle is a permutation") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) {
        double u = a.uniform();
        CHECK_EQ(u, b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    Rng c(9);
    c.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK_EQ(sorted, std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("rng normal has sane first moments") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.0, 1.0, -1.5, 0.1, 3.141592653589793, 1e-300, -2.5e17,
                     0.30000000000000004}) {
        CHECK_EQ(parse_double(format_double(v)), v);
    }
    CHECK_THROWS_AS(parse_double("abc"), DataError);
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_double(""), DataError);
}

TEST_CASE("matrix gathers") {
    Matrix m(3, 4);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) m(r, c) = static_cast<double>(10 * r + c);
    }
    std::vector<std::size_t> rows{2, 0};
    Matrix mr = take_rows(m, rows);
    CHECK_EQ(mr.rows(), 2u);
    CHECK_EQ(mr(0, 1), 21.0);
    CHECK_EQ(mr(1, 3), 3.0);

    std::vector<std::size_t> cols{3, 1};
    Matrix mc = restrict_columns(m, cols);
    CHECK_EQ(mc.cols(), 2u);
    CHECK_EQ(mc(1, 0), 13.0);
    CHECK_EQ(mc(2, 1), 21.0);
}

}  // TEST_SUITE
