#pragma once

#include <filesystem>
#include <string>

#include "relapse/experiment.hpp"

namespace relapse {

// Machine-readable report; round-trips exactly.
std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);

// Aligned results matrix (models x feature settings) for humans.
std::string report_table_text(const ExperimentReport& report);

// Feature-by-method selection table with the importance column.
std::string selection_table_text(const ExperimentReport& report);

std::string bfs_curve_csv(const ExperimentReport& report);

// Line plot of mean CV AUC-ROC vs subset size with a +-1 std band.
std::string bfs_curve_svg(const ExperimentReport& report);

// Temp-file-then-rename write; readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Writes report.json, report.txt, features.txt, bfs_curve.csv, bfs_curve.svg.
void write_report_files(const ExperimentReport& report, const std::filesystem::path& out_dir);

}  // namespace relapse
