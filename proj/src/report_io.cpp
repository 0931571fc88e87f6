#include "relapse/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace relapse {

namespace {

using nlohmann::json;

json params_to_json(const ModelParams& p) {
    json j;
    j["kind"] = std::string(model_kind_name(p.kind));
    if (p.kind == ModelKind::LogisticRegression) {
        j["c"] = p.lr_c;
    } else {
        j["bootstrap"] = p.rf.bootstrap;
        j["max_features"] = p.rf.max_features == MaxFeatures::Sqrt ? "sqrt" : "all";
        j["min_samples_leaf"] = p.rf.min_samples_leaf;
        j["n_estimators"] = p.rf.n_estimators;
    }
    return j;
}

ModelParams params_from_json(const json& j) {
    ModelParams p;
    p.kind = j.at("kind").get<std::string>() == "rf" ? ModelKind::RandomForest
                                                     : ModelKind::LogisticRegression;
    if (p.kind == ModelKind::LogisticRegression) {
        p.lr_c = j.at("c").get<double>();
    } else {
        p.rf.bootstrap = j.at("bootstrap").get<bool>();
        p.rf.max_features =
            j.at("max_features").get<std::string>() == "all" ? MaxFeatures::All : MaxFeatures::Sqrt;
        p.rf.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
        p.rf.n_estimators = j.at("n_estimators").get<std::size_t>();
    }
    return p;
}

SelectionMethod setting_from_name(const std::string& s) {
    if (s == "all") return SelectionMethod::All;
    if (s == "corr_prune") return SelectionMethod::CorrPrune;
    if (s == "vip") return SelectionMethod::Vip;
    if (s == "bfs") return SelectionMethod::Bfs;
    throw DataError("unknown selection method '" + s + "'");
}

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string params_summary(const ModelParams& p) {
    if (p.kind == ModelKind::LogisticRegression) return "C=" + fmt(p.lr_c, 2);
    std::string s = "trees=" + std::to_string(p.rf.n_estimators);
    s += " leaf=" + std::to_string(p.rf.min_samples_leaf);
    s += p.rf.bootstrap ? " bootstrap" : " no-bootstrap";
    return s;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
    json j;
    j["seed"] = report.seed;
    j["n_train"] = report.n_train;
    j["n_test"] = report.n_test;
    j["feature_names"] = report.feature_names;
    j["vip_scores"] = report.vip_scores;
    j["selections"] = report.selections;

    json cells = json::array();
    for (const auto& cell : report.cells) {
        json c;
        c["model"] = std::string(model_kind_name(cell.model));
        c["setting"] = std::string(selection_method_name(cell.setting));
        c["ok"] = cell.ok;
        c["error"] = cell.error;
        if (cell.ok) {
            c["auc_roc"] = cell.eval.auc_roc;
            c["auc_roc_ci"] = {cell.eval.auc_roc_lo, cell.eval.auc_roc_hi};
            c["auc_pr"] = cell.eval.auc_pr;
            c["pr_baseline"] = cell.eval.pr_baseline;
            c["n_test"] = cell.eval.n_test;
            c["best_params"] = params_to_json(cell.best_params);
            c["cv_mean_auc"] = cell.cv_mean_auc;
            c["cv_std_auc"] = cell.cv_std_auc;
            c["selected_features"] = cell.selected_features;
        }
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);

    json curve = json::array();
    for (const auto& point : report.bfs_curve) {
        curve.push_back({{"size", point.size}, {"mean_auc", point.mean_auc}, {"std_auc", point.std_auc}});
    }
    j["bfs_curve"] = std::move(curve);
    return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad report JSON: ") + e.what());
    }
    ExperimentReport report;
    report.seed = j.at("seed").get<std::uint64_t>();
    report.n_train = j.at("n_train").get<std::size_t>();
    report.n_test = j.at("n_test").get<std::size_t>();
    report.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    report.vip_scores = j.at("vip_scores").get<std::map<std::string, double>>();
    report.selections = j.at("selections").get<std::map<std::string, std::vector<std::string>>>();
    for (const auto& c : j.at("cells")) {
        CellResult cell;
        cell.model = c.at("model").get<std::string>() == "rf" ? ModelKind::RandomForest
                                                              : ModelKind::LogisticRegression;
        cell.setting = setting_from_name(c.at("setting").get<std::string>());
        cell.ok = c.at("ok").get<bool>();
        cell.error = c.at("error").get<std::string>();
        if (cell.ok) {
            cell.eval.auc_roc = c.at("auc_roc").get<double>();
            cell.eval.auc_roc_lo = c.at("auc_roc_ci")[0].get<double>();
            cell.eval.auc_roc_hi = c.at("auc_roc_ci")[1].get<double>();
            cell.eval.auc_pr = c.at("auc_pr").get<double>();
            cell.eval.pr_baseline = c.at("pr_baseline").get<double>();
            cell.eval.n_test = c.at("n_test").get<std::size_t>();
            cell.best_params = params_from_json(c.at("best_params"));
            cell.cv_mean_auc = c.at("cv_mean_auc").get<double>();
            cell.cv_std_auc = c.at("cv_std_auc").get<double>();
            cell.selected_features = c.at("selected_features").get<std::vector<std::string>>();
        }
        report.cells.push_back(std::move(cell));
    }
    for (const auto& point : j.at("bfs_curve")) {
        report.bfs_curve.push_back({point.at("size").get<std::size_t>(), point.at("mean_auc").get<double>(),
                                    point.at("std_auc").get<double>()});
    }
    return report;
}

std::string report_table_text(const ExperimentReport& report) {
    const std::vector<SelectionMethod> settings{SelectionMethod::All, SelectionMethod::CorrPrune,
                                                SelectionMethod::Vip, SelectionMethod::Bfs};
    const auto find_cell = [&](ModelKind model, SelectionMethod setting) -> const CellResult* {
        for (const auto& cell : report.cells) {
            if (cell.model == model && cell.setting == setting && (cell.ok || !cell.error.empty())) {
                return &cell;
            }
        }
        return nullptr;
    };

    std::ostringstream out;
    out << "Model performance on the test set (AUC-ROC [95% CI], AUC-PR)\n";
    out << "n_train=" << report.n_train << "  n_test=" << report.n_test << "\n\n";

    const int col = 28;
    const auto pad = [&](const std::string& s) {
        std::string padded = s;
        if (padded.size() < static_cast<std::size_t>(col)) padded.resize(col, ' ');
        return padded;
    };

    out << pad("") << pad("all") << pad("corr_prune") << pad("vip") << pad("bfs") << "\n";
    double baseline = 0.0;
    for (const ModelKind model : {ModelKind::RandomForest, ModelKind::LogisticRegression}) {
        const std::string label = model == ModelKind::RandomForest ? "random_forest" : "logistic_regression";
        std::string roc_row, pr_row, param_row;
        for (const SelectionMethod setting : settings) {
            if (model == ModelKind::RandomForest && setting == SelectionMethod::Bfs) {
                roc_row += pad("-");
                pr_row += pad("-");
                param_row += pad("-");
                continue;
            }
            const CellResult* cell = find_cell(model, setting);
            if (cell == nullptr) {
                roc_row += pad("(missing)");
                pr_row += pad("");
                param_row += pad("");
            } else if (!cell->ok) {
                roc_row += pad("(failed)");
                pr_row += pad("");
                param_row += pad("");
            } else {
                baseline = cell->eval.pr_baseline;
                roc_row += pad(fmt(cell->eval.auc_roc) + " [" + fmt(cell->eval.auc_roc_lo) + ", " +
                               fmt(cell->eval.auc_roc_hi) + "]");
                pr_row += pad(fmt(cell->eval.auc_pr));
                param_row += pad(params_summary(cell->best_params));
            }
        }
        out << pad(label + " AUC-ROC") << roc_row << "\n";
        out << pad(label + " AUC-PR") << pr_row << "\n";
        out << pad(label + " params") << param_row << "\n";
    }
    out << "\nAUC-PR baseline (test prevalence): " << fmt(baseline) << "\n";
    return out.str();
}

std::string selection_table_text(const ExperimentReport& report) {
    const auto mark = [&](const char* method, const std::string& feature) {
        const auto it = report.selections.find(method);
        if (it == report.selections.end()) return std::string(" ");
        const bool in = std::find(it->second.begin(), it->second.end(), feature) != it->second.end();
        return std::string(in ? "x" : " ");
    };

    std::size_t width = 12;
    for (const auto& name : report.feature_names) width = std::max(width, name.size() + 2);

    std::ostringstream out;
    out << "Features selected by each method\n\n";
    out << std::string(width, ' ') << "corr_prune  vip  importance  bfs\n";
    for (const auto& name : report.feature_names) {
        std::string row = name;
        row.resize(width, ' ');
        out << row << mark("corr_prune", name) << "           " << mark("vip", name) << "    ";
        const auto score = report.vip_scores.find(name);
        if (score != report.vip_scores.end()) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%.6f", score->second);
            out << buf;
        } else {
            out << "        ";
        }
        out << "    " << mark("bfs", name) << "\n";
    }
    return out.str();
}

std::string bfs_curve_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << "size,mean_auc,std_auc\n";
    for (const auto& point : report.bfs_curve) {
        out.precision(17);
        out << point.size << "," << point.mean_auc << "," << point.std_auc << "\n";
    }
    return out.str();
}

std::string bfs_curve_svg(const ExperimentReport& report) {
    const int width = 720, height = 480;
    const int ml = 70, mr = 20, mt = 40, mb = 55;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    std::vector<BfsCurvePoint> points = report.bfs_curve;
    std::sort(points.begin(), points.end(),
              [](const BfsCurvePoint& a, const BfsCurvePoint& b) { return a.size < b.size; });

    double x_min = 1, x_max = 2, y_min = 0.4, y_max = 0.9;
    if (!points.empty()) {
        x_min = static_cast<double>(points.front().size);
        x_max = static_cast<double>(points.back().size);
        y_min = 1.0;
        y_max = 0.0;
        for (const auto& p : points) {
            y_min = std::min(y_min, p.mean_auc - p.std_auc);
            y_max = std::max(y_max, p.mean_auc + p.std_auc);
        }
        const double pad = std::max(0.02, (y_max - y_min) * 0.15);
        y_min = std::max(0.0, y_min - pad);
        y_max = std::min(1.05, y_max + pad);
        if (x_max == x_min) x_max = x_min + 1;
    }

    const auto sx = [&](double size) { return ml + (size - x_min) / (x_max - x_min) * plot_w; };
    const auto sy = [&](double auc) { return mt + (y_max - auc) / (y_max - y_min) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
        << "font-family=\"sans-serif\">Cross-validated AUC-ROC vs number of features</text>\n";

    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w << "\" y2=\""
        << mt + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
        << "\" stroke=\"black\"/>\n";

    const int x_ticks = std::min<int>(10, static_cast<int>(x_max - x_min));
    for (int t = 0; t <= x_ticks; ++t) {
        const double size = x_min + (x_max - x_min) * t / std::max(1, x_ticks);
        const double px = sx(size);
        svg << "<line x1=\"" << px << "\" y1=\"" << mt + plot_h << "\" x2=\"" << px << "\" y2=\""
            << mt + plot_h + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << px << "\" y=\"" << mt + plot_h + 20
            << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
            << static_cast<int>(std::lround(size)) << "</text>\n";
    }
    for (int t = 0; t <= 5; ++t) {
        const double auc = y_min + (y_max - y_min) * t / 5.0;
        const double py = sy(auc);
        svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << py << "\" x2=\"" << ml << "\" y2=\"" << py
            << "\" stroke=\"black\"/>\n";
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", auc);
        svg << "<text x=\"" << ml - 10 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">" << buf << "</text>\n";
    }
    svg << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">number of features</text>\n";
    svg << "<text x=\"18\" y=\"" << mt + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
        << mt + plot_h / 2 << ")\">AUC-ROC</text>\n";

    if (!points.empty()) {
        // std band
        std::ostringstream band;
        for (const auto& p : points) band << sx(p.size) << "," << sy(p.mean_auc + p.std_auc) << " ";
        for (auto it = points.rbegin(); it != points.rend(); ++it) {
            band << sx(it->size) << "," << sy(it->mean_auc - it->std_auc) << " ";
        }
        svg << "<polygon points=\"" << band.str() << "\" fill=\"#4477aa\" opacity=\"0.25\"/>\n";

        std::ostringstream line;
        for (const auto& p : points) line << sx(p.size) << "," << sy(p.mean_auc) << " ";
        svg << "<polyline points=\"" << line.str()
            << "\" fill=\"none\" stroke=\"#4477aa\" stroke-width=\"2\"/>\n";
        for (const auto& p : points) {
            svg << "<circle cx=\"" << sx(p.size) << "\" cy=\"" << sy(p.mean_auc)
                << "\" r=\"2.5\" fill=\"#4477aa\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_report_files(const ExperimentReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "report.json", report_to_json(report));
    write_file_atomic(out_dir / "report.txt", report_table_text(report));
    write_file_atomic(out_dir / "features.txt", selection_table_text(report));
    write_file_atomic(out_dir / "bfs_curve.csv", bfs_curve_csv(report));
    write_file_atomic(out_dir / "bfs_curve.svg", bfs_curve_svg(report));
}

}  // namespace relapse
