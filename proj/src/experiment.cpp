#include "relapse/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "relapse/parallel.hpp"

namespace relapse {

std::string_view model_kind_name(ModelKind m) {
    return m == ModelKind::RandomForest ? "rf" : "lr";
}

std::vector<ModelParams> enumerate_grid(ModelKind kind, const GridSpec& grid) {
    std::vector<ModelParams> cells;
    if (kind == ModelKind::LogisticRegression) {
        for (const double c : grid.lr_c) {
            ModelParams p;
            p.kind = kind;
            p.lr_c = c;
            cells.push_back(p);
        }
        return cells;
    }
    for (const bool bootstrap : grid.rf_bootstrap) {
        for (const MaxFeatures mf : grid.rf_max_features) {
            for (const std::size_t leaf : grid.rf_min_samples_leaf) {
                for (const std::size_t trees : grid.rf_n_estimators) {
                    ModelParams p;
                    p.kind = kind;
                    p.rf = {bootstrap, mf, leaf, trees};
                    cells.push_back(p);
                }
            }
        }
    }
    return cells;
}

std::vector<double> FittedPipeline::predict(const DataTable& raw) const {
    const DataTable encoded = apply_preprocessor(plan, raw);
    const Matrix x = to_matrix(encoded, features);
    if (params.kind == ModelKind::LogisticRegression) {
        return predict_proba_logistic(*lr, x);
    }
    return predict_proba_forest(*rf, x);
}

namespace {

std::vector<std::string> filter_features(const PreprocessPlan& plan,
                                         std::span<const std::string> feature_filter) {
    std::vector<std::string> features;
    for (const auto& spec : plan.encoded_features) {
        if (feature_filter.empty() ||
            std::find(feature_filter.begin(), feature_filter.end(), spec.name) != feature_filter.end()) {
            features.push_back(spec.name);
        }
    }
    if (features.empty()) throw DataError("pipeline has no usable feature after filtering");
    return features;
}

}  // namespace

FittedPipeline fit_pipeline(const DataTable& raw_train, std::string_view outcome, const ModelParams& params,
                            std::span<const std::string> feature_filter, const PreprocessConfig& prep,
                            std::uint64_t seed, unsigned threads) {
    FittedPipeline pipe;
    pipe.params = params;
    pipe.plan = fit_preprocessor(raw_train, prep);
    pipe.features = filter_features(pipe.plan, feature_filter);

    const DataTable encoded = apply_preprocessor(pipe.plan, raw_train);
    const Matrix x = to_matrix(encoded, pipe.features);
    const std::vector<int> y = outcome_vector(encoded, outcome);

    if (params.kind == ModelKind::LogisticRegression) {
        pipe.lr = train_logistic(x, y, params.lr_c);
    } else {
        pipe.rf = train_forest(x, y, params.rf, seed, threads);
    }
    return pipe;
}

namespace {

struct PreparedFold {
    PreprocessPlan plan;
    DataTable train_encoded;
    DataTable val_encoded;
    std::vector<int> y_train;
    std::vector<int> y_val;
};

std::vector<PreparedFold> prepare_folds(const DataTable& train, std::string_view outcome, const CVConfig& cv,
                                        const PreprocessConfig& prep) {
    const std::vector<int> y = outcome_vector(train, outcome);
    const auto folds = kfold_indices(train.n_rows(), y, cv);
    std::vector<PreparedFold> out(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> rows;
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            rows.insert(rows.end(), folds[g].begin(), folds[g].end());
        }
        std::sort(rows.begin(), rows.end());
        const DataTable fold_train = train.select_rows(rows);
        const DataTable fold_val = train.select_rows(folds[f]);

        PreparedFold prepared;
        prepared.plan = fit_preprocessor(fold_train, prep);
        prepared.train_encoded = apply_preprocessor(prepared.plan, fold_train);
        prepared.val_encoded = apply_preprocessor(prepared.plan, fold_val);
        prepared.y_train = outcome_vector(prepared.train_encoded, outcome);
        prepared.y_val = outcome_vector(prepared.val_encoded, outcome);
        out[f] = std::move(prepared);
    }
    return out;
}

double score_fold(const PreparedFold& fold, const ModelParams& params,
                  std::span<const std::string> feature_filter, std::uint64_t seed, unsigned threads) {
    std::vector<std::string> features;
    if (feature_filter.empty()) {
        for (const auto& spec : fold.plan.encoded_features) features.push_back(spec.name);
    } else {
        for (const auto& name : feature_filter) {
            if (fold.train_encoded.find_column(name)) features.push_back(name);
        }
    }
    if (features.empty()) throw DataError("fold pipeline has no usable feature");

    const Matrix x_train = to_matrix(fold.train_encoded, features);
    const Matrix x_val = to_matrix(fold.val_encoded, features);

    std::vector<double> probs;
    if (params.kind == ModelKind::LogisticRegression) {
        const LogisticModel model = train_logistic(x_train, fold.y_train, params.lr_c);
        probs = predict_proba_logistic(model, x_val);
    } else {
        const RandomForestModel model = train_forest(x_train, fold.y_train, params.rf, seed, threads);
        probs = predict_proba_forest(model, x_val);
    }
    return roc_auc(probs, fold.y_val);
}

}  // namespace

GridSearchResult grid_search(const DataTable& train, std::string_view outcome, ModelKind kind,
                             const GridSpec& grid, const CVConfig& cv,
                             std::span<const std::string> feature_filter, const PreprocessConfig& prep,
                             std::uint64_t seed, unsigned threads) {
    const std::vector<ModelParams> cells = enumerate_grid(kind, grid);
    if (cells.empty()) throw DataError("grid_search: empty grid");

    const std::vector<PreparedFold> folds = prepare_folds(train, outcome, cv, prep);

    GridSearchResult result;
    result.table.resize(cells.size());
    parallel_for(cells.size(), threads, [&](std::size_t ci) {
        GridCellScore score;
        score.params = cells[ci];
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            // forest seed fixed per (cell, fold) so results are reproducible
            const double auc = score_fold(folds[f], cells[ci], feature_filter,
                                          seed * 1000003ull + ci * 131ull + f, 1);
            score.fold_aucs.push_back(auc);
            sum += auc;
            sum2 += auc * auc;
        }
        const double k = static_cast<double>(folds.size());
        score.mean_auc = sum / k;
        score.std_auc = std::sqrt(std::max(0.0, sum2 / k - score.mean_auc * score.mean_auc));
        result.table[ci] = std::move(score);
    });

    std::size_t best = 0;
    for (std::size_t ci = 1; ci < result.table.size(); ++ci) {
        if (result.table[ci].mean_auc > result.table[best].mean_auc) best = ci;  // ties keep first
    }
    result.best = result.table[best].params;
    result.best_mean = result.table[best].mean_auc;
    result.best_std = result.table[best].std_auc;
    return result;
}

namespace {

CellResult run_cell(const DataTable& train, const DataTable& test, std::string_view outcome,
                    ModelKind model, SelectionMethod setting, std::span<const std::string> feature_filter,
                    const ExperimentConfig& config, const ExperimentHooks& hooks, std::uint64_t cell_index,
                    const GridSearchResult* precomputed_search = nullptr,
                    const FittedPipeline* precomputed_pipeline = nullptr) {
    CellResult cell;
    cell.model = model;
    cell.setting = setting;
    cell.selected_features.assign(feature_filter.begin(), feature_filter.end());
    try {
        const GridSearchResult search =
            precomputed_search != nullptr
                ? *precomputed_search
                : grid_search(train, outcome, model, config.grid, config.cv, feature_filter, config.prep,
                              config.seed + cell_index, config.threads);
        cell.best_params = search.best;
        cell.cv_mean_auc = search.best_mean;
        cell.cv_std_auc = search.best_std;

        const FittedPipeline pipeline =
            precomputed_pipeline != nullptr
                ? *precomputed_pipeline
                : fit_pipeline(train, outcome, search.best, feature_filter, config.prep,
                               config.seed + cell_index, config.threads);

        const std::string cell_name =
            std::string(model_kind_name(model)) + "/" + std::string(selection_method_name(setting));
        if (hooks.on_test_access) hooks.on_test_access(cell_name);
        const std::vector<double> probs = pipeline.predict(test);
        const std::vector<int> y_test = outcome_vector(test, outcome);

        BootstrapConfig boot;
        boot.n_resamples = config.bootstrap_n;
        boot.seed = config.seed * 7919ull + cell_index;
        cell.eval = evaluate_scores(probs, y_test, boot);
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    return cell;
}

}  // namespace

ExperimentReport run_experiment(const DataTable& train, const DataTable& test, std::string_view outcome,
                                const ExperimentConfig& config, const ExperimentHooks& hooks) {
    ExperimentReport report;
    report.seed = config.seed;
    report.n_train = train.n_rows();
    report.n_test = test.n_rows();

    const PreprocessPlan full_plan = fit_preprocessor(train, config.prep);
    for (const auto& spec : full_plan.encoded_features) report.feature_names.push_back(spec.name);
    report.selections["all"] = report.feature_names;

    // Selections are fitted on the training set only.
    std::optional<SelectionResult> corr_selection;
    try {
        const DataTable encoded_raw = encode_features(full_plan, train);
        corr_selection = correlation_prune(encoded_raw, config.corr_threshold, config.selection_overrides);
        report.selections["corr_prune"] = corr_selection->selected;
    } catch (const std::exception& e) {
        report.selections["corr_prune"] = {};
        CellResult failed;
        failed.setting = SelectionMethod::CorrPrune;
        failed.error = e.what();
        report.cells.push_back(failed);
    }

    // VIP: importances from a forest trained on the whole train with the
    // hyperparameters the all-features grid search picks. That search and the
    // refit double as the RF/all cell.
    std::optional<SelectionResult> vip_selection;
    std::optional<GridSearchResult> rf_all_search;
    std::optional<FittedPipeline> rf_all_pipeline;
    try {
        rf_all_search = grid_search(train, outcome, ModelKind::RandomForest, config.grid, config.cv, {},
                                    config.prep, config.seed + 10, config.threads);
        rf_all_pipeline = fit_pipeline(train, outcome, rf_all_search->best, {}, config.prep,
                                       config.seed + 10, config.threads);
        vip_selection = vip_select(rf_all_pipeline->rf->importances, rf_all_pipeline->features);
        report.vip_scores = vip_selection->scores;
        report.selections["vip"] = vip_selection->selected;
    } catch (const std::exception& e) {
        report.selections["vip"] = {};
        CellResult failed;
        failed.setting = SelectionMethod::Vip;
        failed.error = e.what();
        report.cells.push_back(failed);
    }

    std::optional<SelectionResult> bfs_selection;
    try {
        BfsConfig bfs;
        bfs.lr_grid = config.bfs_lr_grid;
        bfs.cv = config.cv;
        bfs.prep = config.prep;
        bfs.threads = config.threads;
        bfs_selection = backward_select(train, outcome, bfs);
        report.bfs_curve = bfs_selection->curve;
        report.selections["bfs"] = bfs_selection->selected;
    } catch (const std::exception& e) {
        report.selections["bfs"] = {};
        CellResult failed;
        failed.model = ModelKind::LogisticRegression;
        failed.setting = SelectionMethod::Bfs;
        failed.error = e.what();
        report.cells.push_back(failed);
    }

    std::uint64_t cell_index = 100;
    const auto add_cell = [&](ModelKind model, SelectionMethod setting,
                              const std::vector<std::string>& features,
                              const GridSearchResult* search = nullptr,
                              const FittedPipeline* pipeline = nullptr) {
        report.cells.push_back(run_cell(train, test, outcome, model, setting, features, config, hooks,
                                        ++cell_index, search, pipeline));
    };

    for (const ModelKind model : {ModelKind::RandomForest, ModelKind::LogisticRegression}) {
        if (model == ModelKind::RandomForest && rf_all_search) {
            add_cell(model, SelectionMethod::All, report.feature_names, &*rf_all_search, &*rf_all_pipeline);
        } else {
            add_cell(model, SelectionMethod::All, report.feature_names);
        }
        if (corr_selection) add_cell(model, SelectionMethod::CorrPrune, corr_selection->selected);
        if (vip_selection) add_cell(model, SelectionMethod::Vip, vip_selection->selected);
    }
    if (bfs_selection) {
        add_cell(ModelKind::LogisticRegression, SelectionMethod::Bfs, bfs_selection->selected);
    }
    return report;
}

}  // namespace relapse
