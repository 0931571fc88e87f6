#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "relapse/error.hpp"

namespace relapse {

// Probability a random positive is scored above a random negative; ties get
// half credit. Equals the trapezoidal ROC area. Requires both classes.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Average precision: walking positives in descending-score order, sum of
// precision-at-rank times the recall increment. Tied scores are one block and
// all positives in the block receive the block's precision.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

// Positive prevalence; the random-classifier reference for pr_auc.
double pr_baseline(std::span<const int> labels);

struct BootstrapConfig {
    std::size_t n_resamples = 5000;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

using MetricFn = std::function<double(std::span<const double>, std::span<const int>)>;

// Percentile bootstrap over (score, label) pairs. Single-class resamples are
// redrawn; if more than half of all draws are invalid the interval is
// undefined and an Error is thrown.
std::pair<double, double> bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                       const MetricFn& metric, const BootstrapConfig& config);

struct EvalReport {
    double auc_roc = 0.0;
    double auc_roc_lo = 0.0;
    double auc_roc_hi = 0.0;
    double auc_pr = 0.0;
    double pr_baseline = 0.0;
    std::size_t n_test = 0;
};

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           const BootstrapConfig& config);

}  // namespace relapse
