#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relapse/cv.hpp"
#include "relapse/data_table.hpp"
#include "relapse/feature_selection.hpp"
#include "relapse/forest.hpp"
#include "relapse/logistic.hpp"
#include "relapse/metrics.hpp"
#include "relapse/preprocess.hpp"

namespace relapse {

enum class ModelKind { LogisticRegression, RandomForest };

std::string_view model_kind_name(ModelKind m);

struct GridSpec {
    std::vector<double> lr_c{0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<bool> rf_bootstrap{true, false};
    std::vector<MaxFeatures> rf_max_features{MaxFeatures::Sqrt};
    std::vector<std::size_t> rf_min_samples_leaf{2, 4, 8, 18};
    std::vector<std::size_t> rf_n_estimators{50, 100, 200, 350, 500, 650, 800, 950};
};

// One grid cell.
struct ModelParams {
    ModelKind kind = ModelKind::LogisticRegression;
    double lr_c = 1.0;
    ForestParams rf;
};

// Cells in the documented iteration order: C ascending for LR; the RF axes
// nest as (bootstrap, max_features, min_samples_leaf, n_estimators), each in
// listed order.
std::vector<ModelParams> enumerate_grid(ModelKind kind, const GridSpec& grid);

struct FittedPipeline {
    PreprocessPlan plan;
    std::vector<std::string> features;  // encoded features the model consumes
    ModelParams params;
    std::optional<LogisticModel> lr;
    std::optional<RandomForestModel> rf;

    std::vector<double> predict(const DataTable& raw) const;
};

// Fits preprocessing on the raw training table, filters the encoded features
// (empty filter = all), and trains the model. The forest trains from `seed`.
FittedPipeline fit_pipeline(const DataTable& raw_train, std::string_view outcome, const ModelParams& params,
                            std::span<const std::string> feature_filter, const PreprocessConfig& prep,
                            std::uint64_t seed, unsigned threads = 1);

struct GridCellScore {
    ModelParams params;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::vector<double> fold_aucs;
};

struct GridSearchResult {
    ModelParams best;
    double best_mean = 0.0;
    double best_std = 0.0;
    std::vector<GridCellScore> table;
};

// For every grid cell and fold, fits the full pipeline on the k-1 training
// folds only and scores the held-out fold by AUC-ROC. Equal means keep the
// earlier cell in the iteration order.
GridSearchResult grid_search(const DataTable& train, std::string_view outcome, ModelKind kind,
                             const GridSpec& grid, const CVConfig& cv,
                             std::span<const std::string> feature_filter, const PreprocessConfig& prep,
                             std::uint64_t seed, unsigned threads = 1);

struct CellResult {
    ModelKind model = ModelKind::LogisticRegression;
    SelectionMethod setting = SelectionMethod::All;
    bool ok = false;
    std::string error;
    EvalReport eval;
    ModelParams best_params;
    double cv_mean_auc = 0.0;
    double cv_std_auc = 0.0;
    std::vector<std::string> selected_features;
};

struct ExperimentReport {
    std::vector<CellResult> cells;  // RF/LR x {all, corr_prune, vip} plus LR x bfs
    std::vector<BfsCurvePoint> bfs_curve;
    std::vector<std::string> feature_names;  // encoded features of the full train
    std::map<std::string, double> vip_scores;
    std::map<std::string, std::vector<std::string>> selections;  // setting -> features
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    GridSpec grid;
    CVConfig cv{4, true, 0};
    PreprocessConfig prep;
    double corr_threshold = 0.3;
    std::vector<std::string> selection_overrides;
    std::vector<double> bfs_lr_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::size_t bootstrap_n = 5000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ExperimentHooks {
    // Invoked exactly when a cell materializes the test features for its one
    // final evaluation; lets callers audit test access.
    std::function<void(std::string_view cell)> on_test_access;
};

// The full protocol: selections fitted on train only, grid search per cell,
// refit on the whole train, one evaluation pass on the untouched test with
// bootstrap CIs. A failing cell carries its error and does not abort the
// others.
ExperimentReport run_experiment(const DataTable& train, const DataTable& test, std::string_view outcome,
                                const ExperimentConfig& config, const ExperimentHooks& hooks = {});

}  // namespace relapse
