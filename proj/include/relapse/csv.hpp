#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "relapse/data_table.hpp"

namespace relapse {

inline const std::set<std::string>& default_missing_tokens() {
    static const std::set<std::string> tokens{"", "NA", "NaN"};
    return tokens;
}

// RFC-4180 CSV with a header row. Header names must match the schema as a
// set (order does not matter); cells equal to a missing token are flagged
// missing. Parse failures name the row and column.
DataTable read_csv_table(std::istream& source, const std::vector<ColumnSpec>& schema,
                         const std::set<std::string>& missing_tokens = default_missing_tokens());

DataTable read_csv_file(const std::filesystem::path& path, const std::vector<ColumnSpec>& schema,
                        const std::set<std::string>& missing_tokens = default_missing_tokens());

// Writes the table in schema order; missing cells become empty fields.
void write_csv(std::ostream& out, const DataTable& table);

// Schema sidecar (JSON), so emitted CSVs can be re-read with full typing.
std::string schema_to_json(const std::vector<ColumnSpec>& schema);
std::vector<ColumnSpec> schema_from_json(const std::string& text);

std::vector<ColumnSpec> load_schema_file(const std::filesystem::path& path);

}  // namespace relapse
