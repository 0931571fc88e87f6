#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relapse/data_table.hpp"
#include "relapse/linalg.hpp"

namespace relapse {

struct PreprocessConfig {
    double missing_threshold = 0.30;  // drop strictly above this
    std::size_t mice_neighbors = 3;
    std::size_t mice_max_sweeps = 10;
    double mice_tol = 1e-3;  // max cell change, in units of the column's train std
};

struct DropResult {
    std::vector<std::string> dropped;
    DataTable reduced;
};

// Drops columns whose missing fraction strictly exceeds the threshold.
DropResult drop_high_missing(const DataTable& table, double threshold, std::span<const std::string> candidates);

struct DummyEncoding {
    std::string dropped_level;             // the modal level, implied by all-zeros
    std::vector<std::string> kept_levels;  // lexicographic; one 0/1 column each
};
using DummyMap = std::map<std::string, DummyEncoding>;

// One dummy per non-modal level; the most frequent level is dropped (ties:
// lexicographically smallest dropped). Single-level columns are skipped with
// a diagnostic. Unseen levels at apply time encode as all zeros.
DummyMap fit_dummy_encoding(const DataTable& train, std::span<const std::string> columns,
                            std::vector<std::string>* diagnostics = nullptr);

struct ModeMap {
    std::map<std::string, std::string> categorical;  // column -> modal level
    std::map<std::string, double> binary;            // column -> modal 0/1
};

ModeMap fit_modes(const DataTable& train, std::span<const std::string> categorical_columns,
                  std::span<const std::string> binary_columns);

// Fills missing categorical/binary cells with the train mode (ties take the
// lexicographically smallest level; 0 for binary).
DataTable impute_categorical_mode(const ModeMap& modes, const DataTable& table);

struct ScalerEntry {
    double mean = 0.0;
    double stddev = 0.0;  // population (divide by n), over observed train values
};
using Scaler = std::map<std::string, ScalerEntry>;

Scaler fit_standardizer(const DataTable& train, std::span<const std::string> columns,
                        std::vector<std::string>* diagnostics = nullptr);

// z = (x - mean) / std with train statistics; zero-variance columns emit 0.
DataTable apply_standardizer(const Scaler& scaler, const DataTable& table);

struct MiceColumn {
    std::vector<std::string> predictors;  // up to k most |r|-correlated numeric columns
    std::vector<double> coef;             // intercept first; frozen from the final fit sweep
    bool mean_fallback = false;
    double mean = 0.0;    // observed train mean (initialization and fallback)
    double stddev = 1.0;  // observed train std, convergence units
};

struct MiceSpec {
    std::map<std::string, MiceColumn> columns;  // only columns with missing cells at fit time
    std::vector<std::string> sweep_order;       // schema order
    std::map<std::string, double> column_means; // every numeric column, apply-time safety fill
    std::size_t max_sweeps = 10;
    double tol = 1e-3;
    std::size_t sweeps_used = 0;
};

// Chained-equation imputation. Missing cells start at the column mean; each
// sweep re-fits an OLS of the observed target values on its k most correlated
// numeric columns and re-predicts the missing cells, until the largest
// standardized cell change drops below tol. Apply time re-runs the sweeps
// with the frozen final regressions and never touches observed cells.
MiceSpec fit_mice(const DataTable& train, std::span<const std::string> numeric_columns,
                  const PreprocessConfig& config, std::vector<std::string>* diagnostics = nullptr);

DataTable apply_mice(const MiceSpec& spec, const DataTable& table);

// The full fit-on-train / apply-anywhere chain used by every model pipeline:
// drop high-missing predictors, mode-impute categorical and binary, expand
// dummies, MICE the numerics, standardize the numerics. Meta columns are
// dropped from the output; the outcome passes through untouched.
struct PreprocessPlan {
    PreprocessConfig config;
    std::string outcome;  // empty when the input has no outcome column
    std::vector<std::string> dropped;
    ModeMap modes;
    DummyMap dummies;
    std::vector<ColumnSpec> encoded_features;  // post-dummy predictor schema
    MiceSpec mice;
    Scaler scaler;
    std::vector<std::string> diagnostics;
};

PreprocessPlan fit_preprocessor(const DataTable& train, const PreprocessConfig& config = {});

// Drop + dummy expansion only, with missingness preserved (missing source
// cells yield missing dummy cells). Used by selection stages that need the
// encoded feature space before any imputation.
DataTable encode_features(const PreprocessPlan& plan, const DataTable& table);

// The full chain; output has no missing cells.
DataTable apply_preprocessor(const PreprocessPlan& plan, const DataTable& table);

std::string plan_to_json(const PreprocessPlan& plan);

// Feature matrix extraction for the models.
Matrix to_matrix(const DataTable& table, std::span<const std::string> features);
std::vector<int> outcome_vector(const DataTable& table, std::string_view outcome);

}  // namespace relapse
