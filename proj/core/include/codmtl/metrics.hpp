#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codmtl/common.hpp"

namespace codmtl {

// Scores paired with binary labels, the input to every discrimination and
// calibration metric.
struct ScoredSet {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

struct CalibrationBin {
    double mean_predicted = 0.0;
    double observed_fraction = 0.0;
    std::size_t count = 0;
};

// Nonempty bins only, ordered by mean_predicted; counts sum to N.
struct CalibrationCurve {
    std::vector<CalibrationBin> bins;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

// Per-fold values of one metric for one task, plus their cross-fold summary.
struct CVReport {
    std::string metric;
    std::string task;
    std::vector<double> folds;
    double mean = 0.0;
    double std_dev = 0.0;  // population denominator (divide by K)
};

// Probability that a random positive outranks a random negative; ties count 0.5.
double auroc(const ScoredSet& s);

// Average precision: sum of (R_k - R_{k-1}) * P_k over descending thresholds,
// tied scores grouped into one threshold.
double auprc(const ScoredSet& s);

// ROC staircase from (0,0) to (1,1); trapezoidal area equals auroc.
std::vector<RocPoint> roc_points(const ScoredSet& s);

// Precision-recall curve points at the same grouped thresholds auprc uses.
std::vector<PrPoint> pr_points(const ScoredSet& s);

CalibrationCurve calibration_curve(const ScoredSet& s, std::size_t n_bins = 10);

// Count-weighted least-squares line of observed_fraction on mean_predicted.
// Requires >= 2 nonempty bins with distinct mean_predicted.
struct SlopeIntercept {
    double slope = 0.0;
    double intercept = 0.0;
};
SlopeIntercept calibration_slope_intercept(const CalibrationCurve& curve);

CVReport cv_aggregate(const std::vector<double>& values, const std::string& metric,
                      const std::string& task);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace codmtl
