#include "relapse/model_io.hpp"

#include "relapse/error.hpp"

#include "json.hpp"

namespace relapse {

namespace {

using nlohmann::json;

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad ") + what + " JSON: " + e.what());
    }
}

}  // namespace

std::string logistic_to_json(const LogisticModel& model) {
    json j;
    j["kind"] = "logistic";
    j["weights"] = model.weights;
    j["intercept"] = model.intercept;
    j["c"] = model.c;
    return j.dump(2) + "\n";
}

LogisticModel logistic_from_json(const std::string& text) {
    const json j = parse(text, "logistic model");
    if (j.value("kind", "") != "logistic") throw DataError("not a logistic model file");
    LogisticModel model;
    model.weights = j.at("weights").get<std::vector<double>>();
    model.intercept = j.at("intercept").get<double>();
    model.c = j.at("c").get<double>();
    return model;
}

std::string forest_to_json(const RandomForestModel& model) {
    json j;
    j["kind"] = "random_forest";
    j["bootstrap"] = model.params.bootstrap;
    j["max_features"] = model.params.max_features == MaxFeatures::Sqrt ? "sqrt" : "all";
    j["min_samples_leaf"] = model.params.min_samples_leaf;
    j["n_estimators"] = model.params.n_estimators;
    j["n_features"] = model.n_features;
    j["seed"] = model.seed;
    j["importances"] = model.importances;
    json trees = json::array();
    for (const auto& tree : model.trees) {
        json nodes = json::array();
        for (const auto& node : tree.nodes) {
            nodes.push_back({node.feature, node.threshold, node.left, node.right, node.n, node.n_pos,
                             node.decrease});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump() + "\n";
}

RandomForestModel forest_from_json(const std::string& text) {
    const json j = parse(text, "forest model");
    if (j.value("kind", "") != "random_forest") throw DataError("not a random forest model file");
    RandomForestModel model;
    model.params.bootstrap = j.at("bootstrap").get<bool>();
    model.params.max_features =
        j.at("max_features").get<std::string>() == "all" ? MaxFeatures::All : MaxFeatures::Sqrt;
    model.params.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    model.params.n_estimators = j.at("n_estimators").get<std::size_t>();
    model.n_features = j.at("n_features").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.importances = j.at("importances").get<std::vector<double>>();
    for (const auto& tree_json : j.at("trees")) {
        DecisionTree tree;
        for (const auto& node_json : tree_json) {
            TreeNode node;
            node.feature = node_json.at(0).get<std::int32_t>();
            node.threshold = node_json.at(1).get<double>();
            node.left = node_json.at(2).get<std::int32_t>();
            node.right = node_json.at(3).get<std::int32_t>();
            node.n = node_json.at(4).get<std::uint32_t>();
            node.n_pos = node_json.at(5).get<std::uint32_t>();
            node.decrease = node_json.at(6).get<double>();
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    if (model.trees.size() != model.params.n_estimators) {
        throw DataError("forest model: tree count does not match n_estimators");
    }
    return model;
}

}  // namespace relapse
