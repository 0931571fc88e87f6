#include "relapse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relapse/rng.hpp"

namespace relapse {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("scores/labels size mismatch");
    if (scores.empty()) throw Error("empty evaluation set");
    for (double s : scores) {
        if (std::isnan(s)) throw Error("NaN score");
    }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    return {pos, labels.size() - pos};
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto [n_pos, n_neg] = class_counts(labels);
    if (n_pos == 0 || n_neg == 0) throw Error("roc_auc needs both classes");

    // Rank formulation with average ranks for ties; equivalent to pair
    // counting with half credit for equal scores.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;  // 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto [n_pos, n_neg] = class_counts(labels);
    (void)n_neg;
    if (n_pos == 0) throw Error("pr_auc needs at least one positive");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t seen = 0, tp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t block_tp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            block_tp += static_cast<std::size_t>(labels[order[j]]);
            ++j;
        }
        seen += j - i;
        tp += block_tp;
        if (block_tp > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(seen);
            ap += precision * static_cast<double>(block_tp) / static_cast<double>(n_pos);
        }
        i = j;
    }
    return ap;
}

double pr_baseline(std::span<const int> labels) {
    if (labels.empty()) throw Error("pr_baseline on empty labels");
    const auto [pos, neg] = class_counts(labels);
    (void)neg;
    return static_cast<double>(pos) / static_cast<double>(labels.size());
}

std::pair<double, double> bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                       const MetricFn& metric, const BootstrapConfig& config) {
    check_inputs(scores, labels);
    const auto [n_pos, n_neg] = class_counts(labels);
    if (n_pos == 0 || n_neg == 0) throw Error("bootstrap_ci needs both classes");
    if (config.n_resamples < 2) throw Error("bootstrap needs at least 2 resamples");

    Rng rng(config.seed);
    const std::size_t n = scores.size();
    std::vector<double> stats;
    stats.reserve(config.n_resamples);
    std::vector<double> s(n);
    std::vector<int> y(n);

    const std::size_t max_draws = 2 * config.n_resamples;
    std::size_t draws = 0;
    while (stats.size() < config.n_resamples) {
        if (draws >= max_draws) {
            throw Error("bootstrap metric undefined on the majority of resamples");
        }
        ++draws;
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(rng.below(n));
            s[i] = scores[k];
            y[i] = labels[k];
            pos += static_cast<std::size_t>(y[i]);
        }
        if (pos == 0 || pos == n) continue;  // redraw
        stats.push_back(metric(s, y));
    }

    std::sort(stats.begin(), stats.end());
    const auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(stats.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= stats.size()) return stats.back();
        return stats[lo] + frac * (stats[lo + 1] - stats[lo]);
    };
    return {quantile(config.alpha / 2.0), quantile(1.0 - config.alpha / 2.0)};
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           const BootstrapConfig& config) {
    EvalReport report;
    report.auc_roc = roc_auc(scores, labels);
    auto ci = bootstrap_ci(scores, labels, [](auto s, auto y) { return roc_auc(s, y); }, config);
    report.auc_roc_lo = ci.first;
    report.auc_roc_hi = ci.second;
    report.auc_pr = pr_auc(scores, labels);
    report.pr_baseline = pr_baseline(labels);
    report.n_test = labels.size();
    return report;
}

}  // namespace relapse
