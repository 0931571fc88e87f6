#include "relapse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace relapse {

namespace {

bool is_predictor(const ColumnSpec& spec) {
    return spec.category != ColumnCategory::Meta && spec.category != ColumnCategory::Outcome;
}

void push_diag(std::vector<std::string>* diagnostics, std::string message) {
    if (diagnostics != nullptr) diagnostics->push_back(std::move(message));
}

}  // namespace

DropResult drop_high_missing(const DataTable& table, double threshold,
                             std::span<const std::string> candidates) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw DataError("missing threshold must lie in (0,1)");
    std::set<std::string> dropped;
    for (const auto& name : candidates) {
        if (missing_fraction(table, name) > threshold) dropped.insert(name);
    }
    std::vector<std::string> keep;
    for (const auto& spec : table.schema()) {
        if (!dropped.count(spec.name)) keep.push_back(spec.name);
    }
    DropResult out;
    out.dropped.assign(dropped.begin(), dropped.end());
    out.reduced = table.select_columns(keep);
    return out;
}

DummyMap fit_dummy_encoding(const DataTable& train, std::span<const std::string> columns,
                            std::vector<std::string>* diagnostics) {
    DummyMap map;
    for (const auto& name : columns) {
        const std::size_t c = train.column_index(name);
        if (train.spec(c).kind != ColumnKind::Categorical) {
            throw DataError("dummy encoding requires a categorical column, got '" + name + "'");
        }
        std::map<std::string, std::size_t> counts;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            if (!train.is_missing(r, c)) ++counts[train.category_at(r, c)];
        }
        if (counts.size() < 2) {
            push_diag(diagnostics, "column '" + name + "' has fewer than 2 observed levels; dropped");
            continue;
        }
        // modal level; ties take the lexicographically smallest (map order)
        std::string modal;
        std::size_t best = 0;
        for (const auto& [level, count] : counts) {
            if (count > best) {
                best = count;
                modal = level;
            }
        }
        DummyEncoding enc;
        enc.dropped_level = modal;
        for (const auto& [level, count] : counts) {
            (void)count;
            if (level != modal) enc.kept_levels.push_back(level);
        }
        map[name] = std::move(enc);
    }
    return map;
}

ModeMap fit_modes(const DataTable& train, std::span<const std::string> categorical_columns,
                  std::span<const std::string> binary_columns) {
    ModeMap modes;
    for (const auto& name : categorical_columns) {
        const std::size_t c = train.column_index(name);
        std::map<std::string, std::size_t> counts;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            if (!train.is_missing(r, c)) ++counts[train.category_at(r, c)];
        }
        if (counts.empty()) throw DataError("column '" + name + "' has no observed value to take a mode from");
        std::string modal;
        std::size_t best = 0;
        for (const auto& [level, count] : counts) {
            if (count > best) {
                best = count;
                modal = level;
            }
        }
        modes.categorical[name] = modal;
    }
    for (const auto& name : binary_columns) {
        const std::size_t c = train.column_index(name);
        std::size_t ones = 0, zeros = 0;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            if (train.is_missing(r, c)) continue;
            (train.numeric_at(r, c) != 0.0 ? ones : zeros) += 1;
        }
        if (ones + zeros == 0) {
            throw DataError("column '" + name + "' has no observed value to take a mode from");
        }
        modes.binary[name] = ones > zeros ? 1.0 : 0.0;
    }
    return modes;
}

DataTable impute_categorical_mode(const ModeMap& modes, const DataTable& table) {
    std::vector<Column> columns;
    columns.reserve(table.n_cols());
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        Column col = table.column(c);
        const auto& name = table.spec(c).name;
        const auto cat_it = modes.categorical.find(name);
        if (cat_it != modes.categorical.end()) {
            std::int32_t code = -1;
            for (std::size_t i = 0; i < col.levels.size(); ++i) {
                if (col.levels[i] == cat_it->second) code = static_cast<std::int32_t>(i);
            }
            if (code < 0) {
                code = static_cast<std::int32_t>(col.levels.size());
                col.levels.push_back(cat_it->second);
            }
            for (std::size_t r = 0; r < col.missing.size(); ++r) {
                if (col.missing[r]) {
                    col.cat[r] = code;
                    col.missing[r] = 0;
                }
            }
        }
        const auto bin_it = modes.binary.find(name);
        if (bin_it != modes.binary.end()) {
            for (std::size_t r = 0; r < col.missing.size(); ++r) {
                if (col.missing[r]) {
                    col.num[r] = bin_it->second;
                    col.missing[r] = 0;
                }
            }
        }
        columns.push_back(std::move(col));
    }
    return DataTable(table.schema(), std::move(columns));
}

Scaler fit_standardizer(const DataTable& train, std::span<const std::string> columns,
                        std::vector<std::string>* diagnostics) {
    Scaler scaler;
    for (const auto& name : columns) {
        const std::size_t c = train.column_index(name);
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            if (train.is_missing(r, c)) continue;
            const double v = train.numeric_at(r, c);
            sum += v;
            sum2 += v * v;
            ++n;
        }
        if (n < 2) throw DataError("column '" + name + "' needs at least 2 observed values to standardize");
        ScalerEntry entry;
        entry.mean = sum / static_cast<double>(n);
        const double var = sum2 / static_cast<double>(n) - entry.mean * entry.mean;
        entry.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
        if (entry.stddev == 0.0) {
            push_diag(diagnostics, "column '" + name + "' is constant on train; standardized to all zeros");
        }
        scaler[name] = entry;
    }
    return scaler;
}

DataTable apply_standardizer(const Scaler& scaler, const DataTable& table) {
    std::vector<Column> columns;
    columns.reserve(table.n_cols());
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        Column col = table.column(c);
        const auto it = scaler.find(table.spec(c).name);
        if (it != scaler.end()) {
            for (std::size_t r = 0; r < col.missing.size(); ++r) {
                if (col.missing[r]) continue;
                col.num[r] = it->second.stddev == 0.0 ? 0.0 : (col.num[r] - it->second.mean) / it->second.stddev;
            }
        }
        columns.push_back(std::move(col));
    }
    return DataTable(table.schema(), std::move(columns));
}

namespace {

struct ObservedStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};

ObservedStats observed_stats(const DataTable& table, std::size_t c) {
    ObservedStats s;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (table.is_missing(r, c)) continue;
        const double v = table.numeric_at(r, c);
        sum += v;
        sum2 += v * v;
        ++s.n;
    }
    if (s.n > 0) {
        s.mean = sum / static_cast<double>(s.n);
        const double var = sum2 / static_cast<double>(s.n) - s.mean * s.mean;
        s.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return s;
}

// working copy of the numeric columns involved in a MICE pass
struct MiceState {
    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<double>> values;        // current filled values
    std::vector<std::vector<std::uint8_t>> missing; // original mask
};

MiceState make_state(const DataTable& table, std::span<const std::string> columns,
                     const std::map<std::string, double>& init_means) {
    MiceState state;
    for (const auto& name : columns) {
        const std::size_t c = table.column_index(name);
        if (table.spec(c).kind == ColumnKind::Categorical) {
            throw DataError("MICE requires numeric columns, got categorical '" + name + "'");
        }
        state.index[name] = state.names.size();
        state.names.push_back(name);
        const auto& col = table.column(c);
        std::vector<double> vals = col.num;
        const double mean = init_means.count(name) ? init_means.at(name) : 0.0;
        for (std::size_t r = 0; r < vals.size(); ++r) {
            if (col.missing[r]) vals[r] = mean;
        }
        state.values.push_back(std::move(vals));
        state.missing.push_back(col.missing);
    }
    return state;
}

double predict_linear(const MiceState& state, const MiceColumn& mc, std::size_t row, double fallback) {
    if (mc.mean_fallback || mc.coef.empty()) return fallback;
    double z = mc.coef[0];
    for (std::size_t j = 0; j < mc.predictors.size(); ++j) {
        z += mc.coef[j + 1] * state.values[state.index.at(mc.predictors[j])][row];
    }
    return z;
}

}  // namespace

MiceSpec fit_mice(const DataTable& train, std::span<const std::string> numeric_columns,
                  const PreprocessConfig& config, std::vector<std::string>* diagnostics) {
    MiceSpec spec;
    spec.max_sweeps = config.mice_max_sweeps;
    spec.tol = config.mice_tol;

    std::map<std::string, ObservedStats> stats;
    for (const auto& name : numeric_columns) {
        const auto s = observed_stats(train, train.column_index(name));
        stats[name] = s;
        spec.column_means[name] = s.mean;
    }
    spec.sweep_order.assign(numeric_columns.begin(), numeric_columns.end());

    // Correlation neighbors come from the pairwise-complete train matrix,
    // computed once here and frozen.
    const CorrelationMatrix corr = correlation_matrix(train, numeric_columns);

    std::vector<std::string> targets;
    for (const auto& name : numeric_columns) {
        if (missing_fraction(train, name) > 0.0) targets.push_back(name);
    }
    if (targets.empty()) return spec;  // complete table: nothing to fit

    for (const auto& target : targets) {
        MiceColumn mc;
        mc.mean = stats[target].mean;
        mc.stddev = stats[target].stddev > 0.0 ? stats[target].stddev : 1.0;

        const auto ti = static_cast<std::size_t>(
            std::find(spec.sweep_order.begin(), spec.sweep_order.end(), target) - spec.sweep_order.begin());
        std::vector<std::pair<double, std::string>> ranked;  // (|r|, name)
        for (std::size_t j = 0; j < spec.sweep_order.size(); ++j) {
            if (j == ti || !corr.defined(ti, j)) continue;
            ranked.emplace_back(std::abs(corr.at(ti, j)), spec.sweep_order[j]);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t j = 0; j < ranked.size() && j < config.mice_neighbors; ++j) {
            mc.predictors.push_back(ranked[j].second);
        }
        if (mc.predictors.empty()) {
            mc.mean_fallback = true;
            push_diag(diagnostics, "MICE: column '" + target + "' has no usable predictor; mean imputation");
        }
        spec.columns[target] = std::move(mc);
    }

    MiceState state = make_state(train, numeric_columns, spec.column_means);

    for (std::size_t sweep = 0; sweep < spec.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (const auto& name : spec.sweep_order) {
            const auto it = spec.columns.find(name);
            if (it == spec.columns.end()) continue;
            MiceColumn& mc = it->second;
            if (mc.mean_fallback) continue;

            const std::size_t ti = state.index.at(name);
            const std::size_t n_rows = state.values[ti].size();
            std::size_t n_obs = 0;
            for (std::size_t r = 0; r < n_rows; ++r) n_obs += state.missing[ti][r] == 0;

            Matrix x(n_obs, mc.predictors.size());
            std::vector<double> y(n_obs);
            std::size_t k = 0;
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (state.missing[ti][r]) continue;
                for (std::size_t j = 0; j < mc.predictors.size(); ++j) {
                    x.at(k, j) = state.values[state.index.at(mc.predictors[j])][r];
                }
                y[k++] = state.values[ti][r];
            }

            std::vector<double> coef;
            if (!ols_fit(x, y, coef)) {
                mc.mean_fallback = true;
                mc.coef.clear();
                push_diag(diagnostics, "MICE: singular regression for '" + name + "'; mean imputation");
                for (std::size_t r = 0; r < n_rows; ++r) {
                    if (state.missing[ti][r]) state.values[ti][r] = mc.mean;
                }
                continue;
            }
            mc.coef = std::move(coef);
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (!state.missing[ti][r]) continue;
                const double updated = predict_linear(state, mc, r, mc.mean);
                max_change = std::max(max_change, std::abs(updated - state.values[ti][r]) / mc.stddev);
                state.values[ti][r] = updated;
            }
        }
        spec.sweeps_used = sweep + 1;
        if (max_change < spec.tol) break;
    }
    return spec;
}

DataTable apply_mice(const MiceSpec& spec, const DataTable& table) {
    std::vector<std::string> present;
    for (const auto& name : spec.sweep_order) {
        if (table.find_column(name)) present.push_back(name);
    }
    MiceState state = make_state(table, present, spec.column_means);

    for (std::size_t sweep = 0; sweep < std::max<std::size_t>(spec.sweeps_used, 1); ++sweep) {
        double max_change = 0.0;
        for (const auto& name : present) {
            const auto it = spec.columns.find(name);
            if (it == spec.columns.end()) continue;
            const MiceColumn& mc = it->second;
            const std::size_t ti = state.index.at(name);
            for (std::size_t r = 0; r < state.values[ti].size(); ++r) {
                if (!state.missing[ti][r]) continue;
                const double updated = predict_linear(state, mc, r, mc.mean);
                max_change = std::max(max_change, std::abs(updated - state.values[ti][r]) / mc.stddev);
                state.values[ti][r] = updated;
            }
        }
        if (max_change < spec.tol) break;
    }

    std::vector<Column> columns;
    columns.reserve(table.n_cols());
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
        Column col = table.column(c);
        const auto& name = table.spec(c).name;
        const auto si = state.index.find(name);
        if (si != state.index.end()) {
            // imputed values; any numeric cell still unfilled falls back to the
            // train mean (columns complete at fit time but missing at apply)
            for (std::size_t r = 0; r < col.missing.size(); ++r) {
                if (col.missing[r]) {
                    col.num[r] = state.values[si->second][r];
                    col.missing[r] = 0;
                }
            }
        }
        columns.push_back(std::move(col));
    }
    return DataTable(table.schema(), std::move(columns));
}

namespace {

std::vector<std::string> names_of_kind(const DataTable& table, ColumnKind kind, bool predictors_only) {
    std::vector<std::string> names;
    for (const auto& spec : table.schema()) {
        if (predictors_only && !is_predictor(spec)) continue;
        if (spec.kind == kind) names.push_back(spec.name);
    }
    return names;
}

}  // namespace

PreprocessPlan fit_preprocessor(const DataTable& train, const PreprocessConfig& config) {
    PreprocessPlan plan;
    plan.config = config;
    for (const auto& spec : train.schema()) {
        if (spec.category == ColumnCategory::Outcome) plan.outcome = spec.name;
    }

    std::vector<std::string> predictors;
    for (const auto& spec : train.schema()) {
        if (is_predictor(spec)) predictors.push_back(spec.name);
    }
    DropResult drop = drop_high_missing(train, config.missing_threshold, predictors);
    plan.dropped = drop.dropped;
    for (const auto& name : plan.dropped) {
        plan.diagnostics.push_back("dropped '" + name + "': missing fraction exceeds " +
                                   std::to_string(config.missing_threshold));
    }
    const DataTable& reduced = drop.reduced;

    const auto cat_cols = names_of_kind(reduced, ColumnKind::Categorical, true);
    const auto bin_cols = names_of_kind(reduced, ColumnKind::Binary, true);
    plan.modes = fit_modes(reduced, cat_cols, bin_cols);
    const DataTable imputed_cats = impute_categorical_mode(plan.modes, reduced);

    plan.dummies = fit_dummy_encoding(imputed_cats, cat_cols, &plan.diagnostics);
    for (const auto& name : cat_cols) {
        if (!plan.dummies.count(name)) plan.dropped.push_back(name);  // single observed level
    }

    // encoded feature schema, in source order with dummies expanded in place
    for (const auto& spec : imputed_cats.schema()) {
        if (!is_predictor(spec)) continue;
        if (spec.kind == ColumnKind::Categorical) {
            const auto it = plan.dummies.find(spec.name);
            if (it == plan.dummies.end()) continue;
            for (const auto& level : it->second.kept_levels) {
                plan.encoded_features.push_back({spec.name + "_" + level, ColumnKind::Binary, spec.category});
            }
        } else {
            plan.encoded_features.push_back(spec);
        }
    }

    const DataTable encoded = encode_features(plan, imputed_cats);

    std::vector<std::string> numeric_features;
    for (const auto& spec : plan.encoded_features) {
        if (spec.kind == ColumnKind::Numeric) numeric_features.push_back(spec.name);
    }
    plan.mice = fit_mice(encoded, numeric_features, config, &plan.diagnostics);
    plan.scaler = fit_standardizer(encoded, numeric_features, &plan.diagnostics);
    return plan;
}

DataTable encode_features(const PreprocessPlan& plan, const DataTable& table) {
    std::vector<ColumnSpec> schema;
    std::vector<Column> columns;
    const std::size_t n = table.n_rows();

    if (!plan.outcome.empty()) {
        if (auto c = table.find_column(plan.outcome)) {
            schema.push_back(table.spec(*c));
            columns.push_back(table.column(*c));
        }
    }

    for (const auto& feature : plan.encoded_features) {
        Column out;
        out.num.assign(n, 0.0);
        out.missing.assign(n, 0);

        if (auto src = table.find_column(feature.name)) {
            // plain numeric/binary predictor
            const Column& col = table.column(*src);
            out.num = col.num;
            out.missing = col.missing;
        } else {
            // dummy column "<source>_<level>"
            bool resolved = false;
            for (const auto& [source, enc] : plan.dummies) {
                for (const auto& level : enc.kept_levels) {
                    if (feature.name != source + "_" + level) continue;
                    const auto sc = table.find_column(source);
                    if (!sc) throw DataError("encode: source column '" + source + "' absent");
                    const Column& col = table.column(*sc);
                    for (std::size_t r = 0; r < n; ++r) {
                        if (col.missing[r]) {
                            out.missing[r] = 1;
                        } else {
                            // unseen levels encode as all zeros
                            out.num[r] = table.category_at(r, *sc) == level ? 1.0 : 0.0;
                        }
                    }
                    resolved = true;
                    break;
                }
                if (resolved) break;
            }
            if (!resolved) {
                throw DataError("encode: cannot resolve feature '" + feature.name + "'");
            }
        }
        schema.push_back(feature);
        columns.push_back(std::move(out));
    }
    return DataTable(std::move(schema), std::move(columns));
}

DataTable apply_preprocessor(const PreprocessPlan& plan, const DataTable& table) {
    const DataTable imputed_cats = impute_categorical_mode(plan.modes, table);
    const DataTable encoded = encode_features(plan, imputed_cats);
    const DataTable imputed = apply_mice(plan.mice, encoded);
    return apply_standardizer(plan.scaler, imputed);
}

std::string plan_to_json(const PreprocessPlan& plan) {
    nlohmann::json j;
    j["missing_threshold"] = plan.config.missing_threshold;
    j["outcome"] = plan.outcome;
    j["dropped"] = plan.dropped;
    j["modes"]["categorical"] = plan.modes.categorical;
    j["modes"]["binary"] = plan.modes.binary;
    nlohmann::json dummies = nlohmann::json::object();
    for (const auto& [name, enc] : plan.dummies) {
        dummies[name] = {{"dropped_level", enc.dropped_level}, {"kept_levels", enc.kept_levels}};
    }
    j["dummies"] = dummies;
    nlohmann::json features = nlohmann::json::array();
    for (const auto& spec : plan.encoded_features) features.push_back(spec.name);
    j["encoded_features"] = features;
    nlohmann::json scaler = nlohmann::json::object();
    for (const auto& [name, entry] : plan.scaler) {
        scaler[name] = {{"mean", entry.mean}, {"std", entry.stddev}};
    }
    j["scaler"] = scaler;
    nlohmann::json mice = nlohmann::json::object();
    for (const auto& [name, mc] : plan.mice.columns) {
        mice[name] = {{"predictors", mc.predictors},
                      {"coef", mc.coef},
                      {"mean_fallback", mc.mean_fallback},
                      {"mean", mc.mean},
                      {"std", mc.stddev}};
    }
    j["mice"] = {{"columns", mice},
                 {"sweeps_used", plan.mice.sweeps_used},
                 {"tol", plan.mice.tol},
                 {"column_means", plan.mice.column_means}};
    j["diagnostics"] = plan.diagnostics;
    return j.dump(2) + "\n";
}

Matrix to_matrix(const DataTable& table, std::span<const std::string> features) {
    Matrix x(table.n_rows(), features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
        const std::size_t c = table.column_index(features[j]);
        if (table.spec(c).kind == ColumnKind::Categorical) {
            throw DataError("to_matrix: column '" + features[j] + "' is categorical");
        }
        for (std::size_t r = 0; r < table.n_rows(); ++r) {
            if (table.is_missing(r, c)) {
                throw DataError("to_matrix: missing cell in column '" + features[j] + "' row " +
                                std::to_string(r));
            }
            x.at(r, j) = table.numeric_at(r, c);
        }
    }
    return x;
}

std::vector<int> outcome_vector(const DataTable& table, std::string_view outcome) {
    const std::size_t c = table.column_index(outcome);
    std::vector<int> y(table.n_rows());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (table.is_missing(r, c)) throw DataError("outcome missing at row " + std::to_string(r));
        y[r] = table.numeric_at(r, c) != 0.0 ? 1 : 0;
    }
    return y;
}

}  // namespace relapse
