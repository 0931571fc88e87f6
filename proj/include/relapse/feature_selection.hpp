#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "relapse/cv.hpp"
#include "relapse/data_table.hpp"
#include "relapse/preprocess.hpp"

namespace relapse {

enum class SelectionMethod { All, CorrPrune, Vip, Bfs };

std::string_view selection_method_name(SelectionMethod m);

struct BfsCurvePoint {
    std::size_t size = 0;
    double mean_auc = 0.0;
    double std_auc = 0.0;
};

struct SelectionResult {
    SelectionMethod method = SelectionMethod::All;
    std::vector<std::string> selected;
    std::map<std::string, double> scores;   // vip: importance per feature
    std::vector<BfsCurvePoint> curve;       // bfs only
};

// Greedy pruning against a pairwise |r| threshold. Columns are visited with
// override names first (operator-pinned, in the given order), then by
// ascending missing fraction, then by name; a column is kept when its
// correlation with every already-kept column stays within the threshold.
// Undefined correlations do not block. Candidates default to the table's
// predictor columns.
SelectionResult correlation_prune(const DataTable& encoded_train, double threshold = 0.3,
                                  std::span<const std::string> keep_overrides = {});

// Keeps features whose importance strictly exceeds the mean importance,
// ordered by descending importance. Importances must sum to 1 (±1e-9).
SelectionResult vip_select(std::span<const double> importances, std::span<const std::string> names);

struct BfsConfig {
    std::vector<double> lr_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    CVConfig cv;
    PreprocessConfig prep;
    unsigned threads = 1;
};

// Backward elimination for the logistic pipeline. Starting from the full
// encoded feature set, each step drops the feature whose removal gives the
// highest 4-fold CV mean AUC-ROC (per-fold imputation and scaling, C
// re-optimized over the grid for every candidate; ties drop the
// lexicographically last name). The curve holds one point per subset size
// from p down to 1; the selection is the size with the best mean AUC,
// ties preferring the smaller subset.
SelectionResult backward_select(const DataTable& train, std::string_view outcome, const BfsConfig& config);

}  // namespace relapse
