#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "relapse/forest.hpp"

using namespace relapse;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    Matrix x(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) x.at(i, j) = rows[i][j];
    }
    return x;
}

}  // namespace

TEST_CASE("perfectly separable single feature: one split, pure leaves") {
    const Matrix x = to_matrix({{0.1}, {0.2}, {0.3}, {0.8}, {0.9}});
    const std::vector<int> y{0, 0, 0, 1, 1};
    ForestParams params;
    params.min_samples_leaf = 1;
    Rng rng(1);
    const DecisionTree tree = train_tree(x, y, params, rng);

    REQUIRE(tree.has_split());
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == doctest::Approx(0.55));
    const auto& left = tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)];
    const auto& right = tree.nodes[static_cast<std::size_t>(tree.nodes[0].right)];
    CHECK(left.feature == -1);
    CHECK(right.feature == -1);
    CHECK(left.n_pos == 0);
    CHECK(right.n_pos == right.n);

    CHECK(tree.predict(std::vector<double>{0.0}) == 0.0);
    CHECK(tree.predict(std::vector<double>{1.0}) == 1.0);
}

TEST_CASE("min_samples_leaf = n forbids any split") {
    const Matrix x = to_matrix({{0.1}, {0.2}, {0.8}, {0.9}});
    const std::vector<int> y{0, 0, 1, 1};
    ForestParams params;
    params.min_samples_leaf = 4;
    Rng rng(1);
    const DecisionTree tree = train_tree(x, y, params, rng);
    CHECK(tree.nodes.size() == 1);
    CHECK_FALSE(tree.has_split());
    CHECK(tree.predict(std::vector<double>{0.5}) == 0.5);
}

TEST_CASE("root split equals exhaustive brute force on small instances") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng.below(9);  // <= 12
        const std::size_t p = 1 + rng.below(3);
        std::vector<std::vector<double>> rows(n, std::vector<double>(p));
        std::vector<int> y(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : rows[i]) v = static_cast<double>(rng.below(6));
            y[i] = rng.uniform01() < 0.5 ? 1 : 0;
            (y[i] ? pos : neg) = true;
        }
        if (!pos) y[0] = 1;
        if (!neg) y[1] = 0;

        const std::size_t min_leaf = 1 + rng.below(2);
        ForestParams params;
        params.min_samples_leaf = min_leaf;
        params.max_features = MaxFeatures::All;  // deterministic candidate set
        Rng tree_rng(trial);
        const DecisionTree tree = train_tree(to_matrix(rows), y, params, tree_rng);

        const auto oracle = oracles::brute_force_split(rows, y, min_leaf);
        std::size_t n_pos = 0;
        for (int v : y) n_pos += static_cast<std::size_t>(v);
        const bool splittable = n_pos != 0 && n_pos != n && n >= 2 * min_leaf;
        if (!oracle.found || !splittable) continue;
        REQUIRE(tree.has_split());
        CHECK(tree.nodes[0].feature == static_cast<std::int32_t>(oracle.feature));
        CHECK(tree.nodes[0].threshold == oracle.threshold);
        CHECK(tree.nodes[0].decrease == doctest::Approx(oracle.decrease).epsilon(1e-12));
    }
}

TEST_CASE("every leaf respects min_samples_leaf across the leaf-size grid") {
    Rng data_rng(7);
    const std::size_t n = 120, p = 5;
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = data_rng.normal();
        y[i] = data_rng.uniform01() < (1.0 / (1.0 + std::exp(-rows[i][0]))) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const Matrix x = to_matrix(rows);

    for (const std::size_t min_leaf : {2, 4, 8, 18}) {
        ForestParams params;
        params.min_samples_leaf = min_leaf;
        params.n_estimators = 20;
        const RandomForestModel forest = train_forest(x, y, params, 99);
        for (const auto& tree : forest.trees) {
            for (const auto& node : tree.nodes) {
                if (node.feature == -1) CHECK(node.n >= min_leaf);
            }
        }
    }
}

TEST_CASE("children counts sum to the parent") {
    Rng rng(8);
    const std::size_t n = 60;
    std::vector<std::vector<double>> rows(n, std::vector<double>(3));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = rng.normal();
        y[i] = rng.uniform01() < 0.5 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    ForestParams params;
    params.min_samples_leaf = 2;
    Rng tree_rng(3);
    const DecisionTree tree = train_tree(to_matrix(rows), y, params, tree_rng);
    for (const auto& node : tree.nodes) {
        if (node.feature < 0) continue;
        const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
        const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];
        CHECK(left.n + right.n == node.n);
        CHECK(left.n_pos + right.n_pos == node.n_pos);
    }
}

TEST_CASE("forest determinism and bootstrap variation") {
    Rng rng(10);
    const std::size_t n = 100;
    std::vector<std::vector<double>> rows(n, std::vector<double>(4));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = rng.normal();
        y[i] = rng.uniform01() < 0.5 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const Matrix x = to_matrix(rows);
    ForestParams params;
    params.min_samples_leaf = 2;
    params.n_estimators = 10;

    const RandomForestModel f1 = train_forest(x, y, params, 42);
    const RandomForestModel f2 = train_forest(x, y, params, 42);
    const auto p1 = predict_proba_forest(f1, x);
    const auto p2 = predict_proba_forest(f2, x);
    CHECK(p1 == p2);  // bitwise
    CHECK(f1.importances == f2.importances);

    // different seeds draw different bootstrap multisets
    Rng a = Rng::substream(42, 0);
    Rng b = Rng::substream(43, 0);
    auto sample_a = bootstrap_sample(n, a);
    auto sample_b = bootstrap_sample(n, b);
    std::multiset<std::size_t> ma(sample_a.begin(), sample_a.end());
    std::multiset<std::size_t> mb(sample_b.begin(), sample_b.end());
    CHECK(ma != mb);

    // n_estimators=1 without bootstrap equals train_tree on substream(seed, 0)
    params.bootstrap = false;
    params.n_estimators = 1;
    const RandomForestModel single = train_forest(x, y, params, 7);
    Rng solo = Rng::substream(7, 0);
    const DecisionTree direct = train_tree(x, y, params, solo);
    REQUIRE(single.trees.size() == 1);
    CHECK(single.trees[0].nodes.size() == direct.nodes.size());
    const auto ps = predict_proba_forest(single, x);
    for (std::size_t i = 0; i < n; ++i) CHECK(ps[i] == direct.predict(x.row(i)));
}

TEST_CASE("forest is bitwise thread-count invariant") {
    Rng rng(12);
    const std::size_t n = 80;
    std::vector<std::vector<double>> rows(n, std::vector<double>(4));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = rng.normal();
        y[i] = rng.uniform01() < 0.5 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const Matrix x = to_matrix(rows);
    ForestParams params;
    params.min_samples_leaf = 2;
    params.n_estimators = 16;

    const RandomForestModel serial = train_forest(x, y, params, 5, 1);
    const RandomForestModel threaded = train_forest(x, y, params, 5, 4);
    CHECK(predict_proba_forest(serial, x) == predict_proba_forest(threaded, x));
    CHECK(serial.importances == threaded.importances);
}

TEST_CASE("prediction averages leaf fractions") {
    // two stumps trained on different bootstraps can disagree; construct
    // directly instead
    DecisionTree all_pos;
    all_pos.nodes.push_back({-1, 0.0, -1, -1, 4, 4, 0.0});
    DecisionTree all_neg;
    all_neg.nodes.push_back({-1, 0.0, -1, -1, 4, 0, 0.0});
    RandomForestModel forest;
    forest.params.n_estimators = 2;
    forest.n_features = 1;
    forest.trees = {all_pos, all_neg};
    const Matrix x = to_matrix({{0.0}});
    CHECK(predict_proba_forest(forest, x)[0] == 0.5);

    forest.trees = {all_pos, all_pos};
    CHECK(predict_proba_forest(forest, x)[0] == 1.0);
}

TEST_CASE("importances: single splitting feature takes everything, sums to 1") {
    const std::size_t n = 50;
    std::vector<std::vector<double>> rows(n, std::vector<double>(3));
    std::vector<int> y(n);
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i][0] = i < n / 2 ? 0.0 : 1.0;  // only informative feature
        rows[i][1] = 0.5;                    // constant
        rows[i][2] = 0.5;                    // constant
        y[i] = i < n / 2 ? 0 : 1;
    }
    const Matrix x = to_matrix(rows);
    ForestParams params;
    params.min_samples_leaf = 1;
    params.n_estimators = 30;
    const RandomForestModel forest = train_forest(x, y, params, 11);
    REQUIRE(forest.importances.size() == 3);
    CHECK(forest.importances[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(forest.importances[1] == 0.0);
    CHECK(forest.importances[2] == 0.0);

    double sum = 0.0;
    for (double v : forest.importances) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("importances match hand-computed decreases on a fixed 2-split tree") {
    // 8 samples; feature 0 separates {0,1} labels except two rows fixed by
    // feature 1
    const std::vector<std::vector<double>> rows{
        {0.0, 0.0}, {0.0, 0.0}, {0.0, 1.0}, {0.0, 1.0},
        {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}};
    const std::vector<int> y{0, 0, 1, 1, 1, 1, 1, 1};
    ForestParams params;
    params.min_samples_leaf = 1;
    params.max_features = MaxFeatures::All;
    Rng rng(1);
    const DecisionTree tree = train_tree(to_matrix(rows), y, params, rng);

    // root: n=8 pos=6 gini=0.375; best split feature 0 at 0.5:
    //   left n=4 pos=2 gini=0.5, right n=4 pos=4 gini=0 -> decrease 0.125
    // left child splits feature 1 at 0.5: children pure -> decrease 0.5
    REQUIRE(tree.has_split());
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].decrease == doctest::Approx(0.125));
    const auto& left = tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)];
    CHECK(left.feature == 1);
    CHECK(left.decrease == doctest::Approx(0.5));

    RandomForestModel forest;
    forest.trees = {tree};
    forest.n_features = 2;
    forest.params = params;
    forest.params.n_estimators = 1;
    const auto imp = impurity_importances(forest);
    // contributions: f0 (8/8)*0.125 = 0.125; f1 (4/8)*0.5 = 0.25
    CHECK(imp[0] == doctest::Approx(0.125 / 0.375));
    CHECK(imp[1] == doctest::Approx(0.25 / 0.375));
}

TEST_CASE("splitless forest yields uniform importances with a diagnostic") {
    const Matrix x = to_matrix({{1.0}, {1.0}, {1.0}, {1.0}});
    const std::vector<int> y{1, 0, 1, 0};
    ForestParams params;
    params.min_samples_leaf = 4;  // cannot split
    params.n_estimators = 3;
    const RandomForestModel forest = train_forest(x, y, params, 2);
    std::vector<std::string> diagnostics;
    const auto imp = impurity_importances(forest, &diagnostics);
    CHECK(imp == std::vector<double>{1.0});
    CHECK(diagnostics.size() == 1);
}

TEST_CASE("tree memorizes distinct training rows with min_samples_leaf=1") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 24;
        std::vector<std::vector<double>> rows(n, std::vector<double>(4));
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : rows[i]) v = rng.normal();  // almost surely distinct
            y[i] = rng.uniform01() < 0.5 ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        ForestParams params;
        params.min_samples_leaf = 1;
        Rng tree_rng(trial + 100);
        const DecisionTree tree = train_tree(to_matrix(rows), y, params, tree_rng);
        const Matrix x = to_matrix(rows);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(tree.predict(x.row(i)) == static_cast<double>(y[i]));
        }
    }
}

#include "relapse/model_io.hpp"

TEST_CASE("model serialization round-trips with bitwise predictions") {
    Rng rng(55);
    const std::size_t n = 70;
    std::vector<std::vector<double>> rows(n, std::vector<double>(3));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = rng.normal();
        y[i] = rng.uniform01() < 0.5 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const Matrix x = to_matrix(rows);

    ForestParams params;
    params.min_samples_leaf = 2;
    params.n_estimators = 12;
    const RandomForestModel forest = train_forest(x, y, params, 31);
    const RandomForestModel reloaded = forest_from_json(forest_to_json(forest));
    CHECK(predict_proba_forest(forest, x) == predict_proba_forest(reloaded, x));
    CHECK(forest.importances == reloaded.importances);

    LogisticModel lr;
    lr.weights = {0.25, -1.5, 3.0};
    lr.intercept = -0.125;
    lr.c = 10.0;
    const LogisticModel lr2 = logistic_from_json(logistic_to_json(lr));
    CHECK(lr.weights == lr2.weights);
    CHECK(lr.intercept == lr2.intercept);
    CHECK(predict_proba_logistic(lr, x) == predict_proba_logistic(lr2, x));
}
