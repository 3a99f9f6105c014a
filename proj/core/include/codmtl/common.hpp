#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace codmtl {

// ----------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (config -> 1, data -> 2,
// numerical -> 3).
// ----------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// ----------------------------------------------------------------------------
// Dense row-major matrix of doubles.
// ----------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ----------------------------------------------------------------------------
// Seeded RNG. All draws go through hand-rolled transforms of the mt19937_64
// output stream, so values only depend on the seed, never on the standard
// library's distribution implementations.
// ----------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (single value; the pair's sibling is cached).
    double normal();

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Row / column gathers for fold and feature-subset selection.
Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows);
Matrix restrict_columns(const Matrix& m, std::span<const std::size_t> cols);

// Derives independent stream seeds from a master seed and tags (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2,
                       std::uint64_t tag3);

// ----------------------------------------------------------------------------
// Text helpers. Doubles are printed with the shortest representation that
// parses back to the identical bits, so every file format round-trips exactly.
// ----------------------------------------------------------------------------

std::string format_double(double value);
double parse_double(const std::string& text);  // throws DataError on junk

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace codmtl
