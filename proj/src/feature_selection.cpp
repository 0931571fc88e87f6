#include "relapse/feature_selection.hpp"

#include <algorithm>
#include <cmath>

#include "relapse/logistic.hpp"
#include "relapse/metrics.hpp"
#include "relapse/parallel.hpp"

namespace relapse {

std::string_view selection_method_name(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::All: return "all";
        case SelectionMethod::CorrPrune: return "corr_prune";
        case SelectionMethod::Vip: return "vip";
        case SelectionMethod::Bfs: return "bfs";
    }
    return "?";
}

SelectionResult correlation_prune(const DataTable& encoded_train, double threshold,
                                  std::span<const std::string> keep_overrides) {
    std::vector<std::string> candidates;
    for (const auto& spec : encoded_train.schema()) {
        if (spec.category == ColumnCategory::Meta || spec.category == ColumnCategory::Outcome) continue;
        candidates.push_back(spec.name);
    }

    for (const auto& name : keep_overrides) {
        if (std::find(candidates.begin(), candidates.end(), name) == candidates.end()) {
            throw DataError("correlation_prune: override '" + std::string(name) + "' names no known column");
        }
    }

    // visit order: overrides first, then ascending missingness, then name
    std::vector<std::string> order(keep_overrides.begin(), keep_overrides.end());
    std::vector<std::pair<double, std::string>> rest;
    for (const auto& name : candidates) {
        if (std::find(order.begin(), order.end(), name) != order.end()) continue;
        rest.emplace_back(missing_fraction(encoded_train, name), name);
    }
    std::sort(rest.begin(), rest.end());
    for (auto& [frac, name] : rest) {
        (void)frac;
        order.push_back(std::move(name));
    }

    const CorrelationMatrix corr = correlation_matrix(encoded_train, candidates);
    const auto corr_index = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(candidates.begin(), candidates.end(), name) -
                                        candidates.begin());
    };

    SelectionResult result;
    result.method = SelectionMethod::CorrPrune;
    std::vector<std::size_t> accepted;
    for (const auto& name : order) {
        const std::size_t i = corr_index(name);
        const bool ok = std::all_of(accepted.begin(), accepted.end(), [&](std::size_t j) {
            return !corr.defined(i, j) || std::abs(corr.at(i, j)) <= threshold;
        });
        if (ok) {
            accepted.push_back(i);
            result.selected.push_back(name);
        }
    }
    // report in schema order
    std::vector<std::string> in_schema_order;
    for (const auto& name : candidates) {
        if (std::find(result.selected.begin(), result.selected.end(), name) != result.selected.end()) {
            in_schema_order.push_back(name);
        }
    }
    result.selected = std::move(in_schema_order);
    return result;
}

SelectionResult vip_select(std::span<const double> importances, std::span<const std::string> names) {
    if (importances.size() != names.size()) throw Error("vip_select: size mismatch");
    if (importances.empty()) throw Error("vip_select: empty importances");
    double sum = 0.0;
    for (double v : importances) sum += v;
    if (std::abs(sum - 1.0) > 1e-9) throw Error("vip_select: importances must sum to 1");

    const double mean = sum / static_cast<double>(importances.size());
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < importances.size(); ++i) {
        if (importances[i] > mean) picked.push_back(i);
    }
    std::sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
        if (importances[a] != importances[b]) return importances[a] > importances[b];
        return names[a] < names[b];
    });

    SelectionResult result;
    result.method = SelectionMethod::Vip;
    for (std::size_t i : picked) result.selected.push_back(names[i]);
    for (std::size_t i = 0; i < names.size(); ++i) result.scores[names[i]] = importances[i];
    return result;
}

namespace {

// Per-fold fitted preprocessing, reused across every candidate subset: the
// plan depends only on the fold's training rows, never on the subset filter.
struct FoldData {
    PreprocessPlan plan;
    DataTable train_encoded;
    DataTable val_encoded;
    std::vector<int> y_train;
    std::vector<int> y_val;
};

std::vector<FoldData> prepare_folds(const DataTable& train, std::string_view outcome, const CVConfig& cv,
                                    const PreprocessConfig& prep) {
    const std::vector<int> y = outcome_vector(train, outcome);
    const auto folds = kfold_indices(train.n_rows(), y, cv);

    std::vector<FoldData> out(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train_rows;
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
        }
        std::sort(train_rows.begin(), train_rows.end());

        const DataTable fold_train = train.select_rows(train_rows);
        const DataTable fold_val = train.select_rows(folds[f]);
        FoldData data;
        data.plan = fit_preprocessor(fold_train, prep);
        data.train_encoded = apply_preprocessor(data.plan, fold_train);
        data.val_encoded = apply_preprocessor(data.plan, fold_val);
        data.y_train = outcome_vector(data.train_encoded, outcome);
        data.y_val = outcome_vector(data.val_encoded, outcome);
        out[f] = std::move(data);
    }
    return out;
}

// CV score of the logistic pipeline on a feature subset: per fold and per C,
// fit on the fold-train matrix and score the held-out fold; the reported
// value is the best grid mean (ties to the smaller C).
std::pair<double, double> score_subset(const std::vector<FoldData>& folds,
                                       std::span<const std::string> subset,
                                       std::span<const double> lr_grid) {
    double best_mean = -1.0;
    double best_std = 0.0;
    for (const double c : lr_grid) {
        double sum = 0.0, sum2 = 0.0;
        for (const auto& fold : folds) {
            std::vector<std::string> present;
            for (const auto& name : subset) {
                if (fold.train_encoded.find_column(name)) present.push_back(name);
            }
            const Matrix x_train = to_matrix(fold.train_encoded, present);
            const Matrix x_val = to_matrix(fold.val_encoded, present);
            const LogisticModel model = train_logistic(x_train, fold.y_train, c);
            const std::vector<double> probs = predict_proba_logistic(model, x_val);
            const double auc = roc_auc(probs, fold.y_val);
            sum += auc;
            sum2 += auc * auc;
        }
        const double k = static_cast<double>(folds.size());
        const double mean = sum / k;
        const double var = std::max(0.0, sum2 / k - mean * mean);
        if (mean > best_mean) {
            best_mean = mean;
            best_std = std::sqrt(var);
        }
    }
    return {best_mean, best_std};
}

}  // namespace

SelectionResult backward_select(const DataTable& train, std::string_view outcome, const BfsConfig& config) {
    const PreprocessPlan full_plan = fit_preprocessor(train, config.prep);
    std::vector<std::string> current;
    for (const auto& spec : full_plan.encoded_features) current.push_back(spec.name);
    if (current.size() < 2) throw DataError("backward_select needs at least 2 predictors");

    const std::vector<FoldData> folds = prepare_folds(train, outcome, config.cv, config.prep);

    SelectionResult result;
    result.method = SelectionMethod::Bfs;

    const auto full_score = score_subset(folds, current, config.lr_grid);
    result.curve.push_back({current.size(), full_score.first, full_score.second});

    // history of subsets by size, to pick the final winner
    std::vector<std::vector<std::string>> subsets_by_size{current};

    while (current.size() > 1) {
        std::vector<std::pair<double, double>> scores(current.size());
        parallel_for(current.size(), config.threads, [&](std::size_t drop) {
            std::vector<std::string> candidate;
            candidate.reserve(current.size() - 1);
            for (std::size_t j = 0; j < current.size(); ++j) {
                if (j != drop) candidate.push_back(current[j]);
            }
            scores[drop] = score_subset(folds, candidate, config.lr_grid);
        });

        // best removal; ties remove the lexicographically last name
        std::size_t best = 0;
        for (std::size_t j = 1; j < current.size(); ++j) {
            if (scores[j].first > scores[best].first ||
                (scores[j].first == scores[best].first && current[j] > current[best])) {
                best = j;
            }
        }
        result.curve.push_back({current.size() - 1, scores[best].first, scores[best].second});
        current.erase(current.begin() + static_cast<std::ptrdiff_t>(best));
        subsets_by_size.push_back(current);
    }

    // winner: highest mean AUC, ties to the smaller subset
    std::size_t winner = 0;
    for (std::size_t i = 1; i < result.curve.size(); ++i) {
        if (result.curve[i].mean_auc >= result.curve[winner].mean_auc) winner = i;
    }
    result.selected = subsets_by_size[winner];
    return result;
}

}  // namespace relapse
