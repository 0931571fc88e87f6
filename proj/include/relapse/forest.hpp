#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relapse/error.hpp"
#include "relapse/linalg.hpp"
#include "relapse/rng.hpp"

namespace relapse {

enum class MaxFeatures { Sqrt, All };

struct ForestParams {
    bool bootstrap = true;
    MaxFeatures max_features = MaxFeatures::Sqrt;
    std::size_t min_samples_leaf = 1;
    std::size_t n_estimators = 100;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1: leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t n = 0;
    std::uint32_t n_pos = 0;
    double decrease = 0.0;  // weighted Gini decrease of this split
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // root at 0

    // Fraction of positives in the reached leaf.
    double predict(std::span<const double> x) const;
    bool has_split() const { return !nodes.empty() && nodes[0].feature >= 0; }
};

struct RandomForestModel {
    std::vector<DecisionTree> trees;
    ForestParams params;
    std::size_t n_features = 0;
    std::vector<double> importances;  // sums to 1
    std::uint64_t seed = 0;
};

// Recursive Gini splitter. At each node, candidate features are drawn
// without replacement until floor(sqrt(p)) non-constant ones are found (or
// every feature is exhausted); thresholds are midpoints between consecutive
// distinct sorted values; a split must leave min_samples_leaf on both sides.
// Best split by weighted impurity decrease, ties to the lowest feature index
// then lowest threshold.
DecisionTree train_tree(const Matrix& x, std::span<const int> y, const ForestParams& params, Rng& rng);

// n draws with replacement; the first thing a bootstrap tree consumes from
// its substream.
std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng);

// Tree t always trains from Rng::substream(seed, t), so the forest is
// identical for every thread count.
RandomForestModel train_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                               std::uint64_t seed, unsigned threads = 1);

std::vector<double> predict_proba_forest(const RandomForestModel& forest, const Matrix& x);

// Mean over trees of per-tree normalized split contributions
// (n_node/n_root) * decrease, renormalized to sum 1. A forest with no splits
// at all yields the uniform vector plus a diagnostic.
std::vector<double> impurity_importances(const RandomForestModel& forest,
                                         std::vector<std::string>* diagnostics = nullptr);

}  // namespace relapse
