#include "relapse/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relapse/error.hpp"
#include "relapse/parallel.hpp"

namespace relapse {

double DecisionTree::predict(std::span<const double> x) const {
    std::size_t node = 0;
    for (;;) {
        const TreeNode& cur = nodes[node];
        if (cur.feature < 0) {
            return cur.n == 0 ? 0.0 : static_cast<double>(cur.n_pos) / static_cast<double>(cur.n);
        }
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(cur.feature)] <= cur.threshold ? cur.left
                                                                                                  : cur.right);
    }
}

namespace {

double gini(std::size_t n, std::size_t n_pos) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(n_pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
}

struct BestSplit {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double decrease = 0.0;
};

struct TreeBuilder {
    const Matrix& x;
    std::span<const int> y;
    const ForestParams& params;
    Rng& rng;
    std::vector<std::size_t> samples;  // indices into x, partitioned in place
    std::vector<TreeNode> nodes;
    std::vector<std::size_t> feature_order;       // scratch for per-node draws
    std::vector<std::pair<double, int>> sorted;   // scratch (value, label)

    std::int32_t build(std::size_t begin, std::size_t end) {
        const std::size_t n = end - begin;
        std::size_t n_pos = 0;
        for (std::size_t i = begin; i < end; ++i) n_pos += static_cast<std::size_t>(y[samples[i]]);

        const std::int32_t node_index = static_cast<std::int32_t>(nodes.size());
        nodes.push_back({});
        nodes[node_index].n = static_cast<std::uint32_t>(n);
        nodes[node_index].n_pos = static_cast<std::uint32_t>(n_pos);

        const bool pure = n_pos == 0 || n_pos == n;
        if (pure || n < 2 * params.min_samples_leaf) return node_index;

        const BestSplit best = find_split(begin, end, n, n_pos);
        if (!best.found) return node_index;

        // partition, preserving relative order for determinism
        std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                              samples.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](std::size_t s) { return x.at(s, best.feature) <= best.threshold; });
        std::size_t mid = begin;
        while (mid < end && x.at(samples[mid], best.feature) <= best.threshold) ++mid;

        nodes[node_index].feature = static_cast<std::int32_t>(best.feature);
        nodes[node_index].threshold = best.threshold;
        nodes[node_index].decrease = best.decrease;
        const std::int32_t left = build(begin, mid);
        nodes[node_index].left = left;
        const std::int32_t right = build(mid, end);
        nodes[node_index].right = right;
        return node_index;
    }

    BestSplit find_split(std::size_t begin, std::size_t end, std::size_t n, std::size_t n_pos) {
        const std::size_t p = x.cols();
        std::size_t want = params.max_features == MaxFeatures::All
                               ? p
                               : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(
                                     static_cast<double>(p)))));

        feature_order.resize(p);
        std::iota(feature_order.begin(), feature_order.end(), std::size_t{0});
        rng.shuffle(feature_order);

        BestSplit best;
        const double parent_impurity = gini(n, n_pos);
        std::size_t considered = 0;
        for (const std::size_t feature : feature_order) {
            if (considered >= want) break;

            sorted.clear();
            for (std::size_t i = begin; i < end; ++i) {
                sorted.emplace_back(x.at(samples[i], feature), y[samples[i]]);
            }
            std::sort(sorted.begin(), sorted.end());
            if (sorted.front().first == sorted.back().first) continue;  // constant: does not count as drawn
            ++considered;

            // walk distinct-value boundaries with running positive counts
            std::size_t left_n = 0, left_pos = 0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                left_n += 1;
                left_pos += static_cast<std::size_t>(sorted[i].second);
                if (sorted[i].first == sorted[i + 1].first) continue;
                const std::size_t right_n = n - left_n;
                if (left_n < params.min_samples_leaf || right_n < params.min_samples_leaf) continue;
                const double threshold = sorted[i].first + (sorted[i + 1].first - sorted[i].first) / 2.0;
                const std::size_t right_pos = n_pos - left_pos;
                const double decrease =
                    parent_impurity -
                    (static_cast<double>(left_n) / static_cast<double>(n)) * gini(left_n, left_pos) -
                    (static_cast<double>(right_n) / static_cast<double>(n)) * gini(right_n, right_pos);
                const bool better =
                    !best.found || decrease > best.decrease ||
                    (decrease == best.decrease &&
                     (feature < best.feature || (feature == best.feature && threshold < best.threshold)));
                if (better) {
                    best.found = true;
                    best.feature = feature;
                    best.threshold = threshold;
                    best.decrease = decrease;
                }
            }
        }
        return best;
    }
};

}  // namespace

DecisionTree train_tree(const Matrix& x, std::span<const int> y, const ForestParams& params, Rng& rng) {
    if (x.rows() != y.size() || x.rows() == 0) throw Error("train_tree: bad inputs");
    if (params.min_samples_leaf == 0) throw Error("train_tree: min_samples_leaf must be >= 1");

    TreeBuilder builder{x, y, params, rng, {}, {}, {}, {}};
    builder.samples.resize(x.rows());
    std::iota(builder.samples.begin(), builder.samples.end(), std::size_t{0});
    builder.build(0, builder.samples.size());

    DecisionTree tree;
    tree.nodes = std::move(builder.nodes);
    return tree;
}

std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (auto& v : idx) v = static_cast<std::size_t>(rng.below(n));
    return idx;
}

RandomForestModel train_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                               std::uint64_t seed, unsigned threads) {
    if (x.rows() != y.size() || x.rows() == 0) throw Error("train_forest: bad inputs");
    std::size_t n_pos = 0;
    for (int v : y) n_pos += static_cast<std::size_t>(v);
    if (n_pos == 0 || n_pos == x.rows()) throw Error("train_forest needs both classes present");
    if (params.n_estimators == 0) throw Error("train_forest: n_estimators must be >= 1");

    RandomForestModel model;
    model.params = params;
    model.seed = seed;
    model.n_features = x.cols();
    model.trees.resize(params.n_estimators);

    parallel_for(params.n_estimators, threads, [&](std::size_t t) {
        Rng rng = Rng::substream(seed, t);
        if (params.bootstrap) {
            const std::vector<std::size_t> idx = bootstrap_sample(x.rows(), rng);
            Matrix xb(idx.size(), x.cols());
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                for (std::size_t j = 0; j < x.cols(); ++j) xb.at(i, j) = x.at(idx[i], j);
                yb[i] = y[idx[i]];
            }
            model.trees[t] = train_tree(xb, yb, params, rng);
        } else {
            model.trees[t] = train_tree(x, y, params, rng);
        }
    });

    model.importances = impurity_importances(model);
    return model;
}

std::vector<double> predict_proba_forest(const RandomForestModel& forest, const Matrix& x) {
    if (forest.trees.empty()) throw Error("predict_proba_forest: empty forest");
    if (forest.n_features != 0 && x.cols() != forest.n_features) {
        throw Error("predict_proba_forest: dimension mismatch");
    }
    std::vector<double> probs(x.rows(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double sum = 0.0;
        for (const auto& tree : forest.trees) sum += tree.predict(x.row(r));
        probs[r] = sum / static_cast<double>(forest.trees.size());
    }
    return probs;
}

std::vector<double> impurity_importances(const RandomForestModel& forest,
                                         std::vector<std::string>* diagnostics) {
    std::size_t p = forest.n_features;
    if (p == 0) {
        for (const auto& tree : forest.trees) {
            for (const auto& node : tree.nodes) {
                if (node.feature >= 0) p = std::max(p, static_cast<std::size_t>(node.feature) + 1);
            }
        }
    }
    if (p == 0) p = 1;

    std::vector<double> total(p, 0.0);
    std::size_t contributing = 0;
    for (const auto& tree : forest.trees) {
        if (tree.nodes.empty()) continue;
        std::vector<double> per_tree(p, 0.0);
        const double n_root = static_cast<double>(tree.nodes[0].n);
        double sum = 0.0;
        for (const auto& node : tree.nodes) {
            if (node.feature < 0) continue;
            const double contribution = (static_cast<double>(node.n) / n_root) * node.decrease;
            per_tree[static_cast<std::size_t>(node.feature)] += contribution;
            sum += contribution;
        }
        if (sum <= 0.0) continue;  // splitless tree contributes a zero vector
        for (std::size_t j = 0; j < p; ++j) total[j] += per_tree[j] / sum;
        ++contributing;
    }

    if (contributing == 0) {
        if (diagnostics != nullptr) {
            diagnostics->push_back("forest has no impurity decrease; importances set uniform");
        }
        return std::vector<double>(p, 1.0 / static_cast<double>(p));
    }
    double norm = 0.0;
    for (double v : total) norm += v;
    for (double& v : total) v /= norm;
    return total;
}

}  // namespace relapse
