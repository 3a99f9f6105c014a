#include "codmtl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace codmtl {

namespace {

void check_scored(const ScoredSet& s) {
    if (s.scores.size() != s.labels.size()) {
        throw DataError("scores and labels differ in length");
    }
    if (s.scores.empty()) throw DataError("empty scored set");
}

std::size_t count_positives(const ScoredSet& s) {
    return static_cast<std::size_t>(
        std::count(s.labels.begin(), s.labels.end(), std::uint8_t{1}));
}

// Indices sorted by descending score; equal scores keep input order.
std::vector<std::size_t> order_desc(const ScoredSet& s) {
    std::vector<std::size_t> idx(s.scores.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return s.scores[a] > s.scores[b];
    });
    return idx;
}

}  // namespace

double auroc(const ScoredSet& s) {
    check_scored(s);
    const std::size_t n_pos = count_positives(s);
    const std::size_t n_neg = s.labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("auroc needs at least one positive and one negative");
    }

    auto idx = order_desc(s);
    // Walk ascending so "negatives seen so far" are the strictly lower scores.
    std::reverse(idx.begin(), idx.end());

    double pairs_won = 0.0;
    std::size_t neg_below = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::size_t pos_tied = 0;
        std::size_t neg_tied = 0;
        while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) {
            if (s.labels[idx[j]]) ++pos_tied; else ++neg_tied;
            ++j;
        }
        pairs_won += static_cast<double>(pos_tied) * static_cast<double>(neg_below);
        pairs_won += 0.5 * static_cast<double>(pos_tied) * static_cast<double>(neg_tied);
        neg_below += neg_tied;
        i = j;
    }
    return pairs_won / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auprc(const ScoredSet& s) {
    check_scored(s);
    const std::size_t n_pos = count_positives(s);
    if (n_pos == 0) throw DataError("auprc needs at least one positive");

    auto idx = order_desc(s);
    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0;
    std::size_t predicted = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) {
            if (s.labels[idx[j]]) ++tp;
            ++predicted;
            ++j;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

std::vector<RocPoint> roc_points(const ScoredSet& s) {
    check_scored(s);
    const std::size_t n_pos = count_positives(s);
    const std::size_t n_neg = s.labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_points needs at least one positive and one negative");
    }

    auto idx = order_desc(s);
    std::vector<RocPoint> pts;
    pts.push_back({0.0, 0.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) {
            if (s.labels[idx[j]]) ++tp; else ++fp;
            ++j;
        }
        pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos)});
        i = j;
    }
    return pts;
}

std::vector<PrPoint> pr_points(const ScoredSet& s) {
    check_scored(s);
    const std::size_t n_pos = count_positives(s);
    if (n_pos == 0) throw DataError("pr_points needs at least one positive");

    auto idx = order_desc(s);
    std::vector<PrPoint> pts;
    std::size_t tp = 0;
    std::size_t predicted = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && s.scores[idx[j]] == s.scores[idx[i]]) {
            if (s.labels[idx[j]]) ++tp;
            ++predicted;
            ++j;
        }
        pts.push_back({static_cast<double>(tp) / static_cast<double>(n_pos),
                       static_cast<double>(tp) / static_cast<double>(predicted)});
        i = j;
    }
    return pts;
}

CalibrationCurve calibration_curve(const ScoredSet& s, std::size_t n_bins) {
    check_scored(s);
    if (n_bins < 2) throw ConfigError("calibration_curve needs n_bins >= 2");

    std::vector<double> score_sum(n_bins, 0.0);
    std::vector<std::size_t> pos_count(n_bins, 0);
    std::vector<std::size_t> count(n_bins, 0);
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
        double sc = s.scores[i];
        auto b = static_cast<std::size_t>(sc * static_cast<double>(n_bins));
        if (b >= n_bins) b = n_bins - 1;
        score_sum[b] += sc;
        pos_count[b] += s.labels[i] ? 1u : 0u;
        count[b] += 1;
    }

    CalibrationCurve curve;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (count[b] == 0) continue;
        curve.bins.push_back({score_sum[b] / static_cast<double>(count[b]),
                              static_cast<double>(pos_count[b]) / static_cast<double>(count[b]),
                              count[b]});
    }
    return curve;
}

SlopeIntercept calibration_slope_intercept(const CalibrationCurve& curve) {
    double w_sum = 0.0, x_sum = 0.0, y_sum = 0.0;
    for (const auto& bin : curve.bins) {
        double w = static_cast<double>(bin.count);
        w_sum += w;
        x_sum += w * bin.mean_predicted;
        y_sum += w * bin.observed_fraction;
    }
    if (curve.bins.size() < 2) {
        throw DataError("calibration fit needs >= 2 nonempty bins");
    }
    double x_mean = x_sum / w_sum;
    double y_mean = y_sum / w_sum;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& bin : curve.bins) {
        double w = static_cast<double>(bin.count);
        double dx = bin.mean_predicted - x_mean;
        sxx += w * dx * dx;
        sxy += w * dx * (bin.observed_fraction - y_mean);
    }
    if (sxx == 0.0) {
        throw DataError("calibration fit needs >= 2 bins with distinct mean_predicted");
    }
    double slope = sxy / sxx;
    return {slope, y_mean - slope * x_mean};
}

CVReport cv_aggregate(const std::vector<double>& values, const std::string& metric,
                      const std::string& task) {
    if (values.empty()) throw DataError("cv_aggregate on empty fold list");
    CVReport rep;
    rep.metric = metric;
    rep.task = task;
    rep.folds = values;
    double sum = std::accumulate(values.begin(), values.end(), 0.0);
    rep.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - rep.mean) * (v - rep.mean);
    rep.std_dev = std::sqrt(ss / static_cast<double>(values.size()));
    return rep;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw DataError("pearson size mismatch");
    double n = static_cast<double>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - ma;
        double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace codmtl
