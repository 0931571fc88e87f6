#include "relapse/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace relapse {

namespace {

// One CSV record from an in-memory buffer, honoring quoted fields with ""
// escapes and embedded newlines. Returns false at end of input.
bool read_record(std::string_view buffer, std::size_t& pos, std::vector<std::string>& fields) {
    fields.clear();
    if (pos >= buffer.size()) return false;
    std::string field;
    bool quoted = false;
    while (pos < buffer.size()) {
        const char c = buffer[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < buffer.size() && buffer[pos] == '"') {
                    field.push_back('"');
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(std::move(field));
    return true;
}

double parse_numeric(const std::string& cell, std::size_t row, const std::string& column) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("row " + std::to_string(row) + ", column '" + column + "': cannot parse '" + cell +
                        "' as numeric");
    }
    return value;
}

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

void write_field(std::ostream& out, const std::string& s) {
    if (!needs_quoting(s)) {
        out << s;
        return;
    }
    out << '"';
    for (char c : s) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

// shortest round-trip representation
void write_numeric(std::ostream& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

}  // namespace

DataTable read_csv_table(std::istream& source, const std::vector<ColumnSpec>& schema,
                         const std::set<std::string>& missing_tokens) {
    std::string buffer;
    {
        std::ostringstream slurp;
        slurp << source.rdbuf();
        buffer = std::move(slurp).str();
    }
    std::size_t pos = 0;

    std::vector<std::string> fields;
    if (!read_record(buffer, pos, fields)) {
        throw DataError("empty CSV input: no header row");
    }

    // Map header position -> schema column, order-insensitive.
    std::vector<std::size_t> header_to_schema(fields.size());
    std::vector<std::uint8_t> seen(schema.size(), 0);
    for (std::size_t h = 0; h < fields.size(); ++h) {
        bool found = false;
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (schema[c].name == fields[h]) {
                if (seen[c]) throw DataError("duplicate header '" + fields[h] + "'");
                seen[c] = 1;
                header_to_schema[h] = c;
                found = true;
                break;
            }
        }
        if (!found) throw DataError("unknown header name '" + fields[h] + "'");
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (!seen[c]) throw DataError("header is missing schema column '" + schema[c].name + "'");
    }

    TableBuilder builder(schema);
    std::size_t row = 0;
    while (read_record(buffer, pos, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        if (fields.size() != header_to_schema.size()) {
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header_to_schema.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        builder.begin_row();
        for (std::size_t h = 0; h < fields.size(); ++h) {
            const std::size_t c = header_to_schema[h];
            const std::string& cell = fields[h];
            if (missing_tokens.count(cell)) continue;
            if (schema[c].kind == ColumnKind::Categorical) {
                builder.set_category(c, cell);
            } else {
                const double v = parse_numeric(cell, row, schema[c].name);
                if (schema[c].kind == ColumnKind::Binary && v != 0.0 && v != 1.0) {
                    throw DataError("row " + std::to_string(row) + ", column '" + schema[c].name +
                                    "': binary cell must be 0 or 1, got '" + cell + "'");
                }
                builder.set_numeric(c, v);
            }
        }
        builder.end_row();
        ++row;
    }
    return builder.build();
}

DataTable read_csv_file(const std::filesystem::path& path, const std::vector<ColumnSpec>& schema,
                        const std::set<std::string>& missing_tokens) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
    return read_csv_table(in, schema, missing_tokens);
}

void write_csv(std::ostream& out, const DataTable& table) {
    const auto& schema = table.schema();
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c) out << ',';
        write_field(out, schema[c].name);
    }
    out << '\n';
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (c) out << ',';
            if (table.is_missing(r, c)) continue;
            if (schema[c].kind == ColumnKind::Categorical) {
                write_field(out, table.category_at(r, c));
            } else {
                write_numeric(out, table.numeric_at(r, c));
            }
        }
        out << '\n';
    }
}

std::string schema_to_json(const std::vector<ColumnSpec>& schema) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& spec : schema) {
        arr.push_back({{"name", spec.name},
                       {"kind", std::string(kind_name(spec.kind))},
                       {"category", std::string(category_name(spec.category))}});
    }
    return arr.dump(2) + "\n";
}

std::vector<ColumnSpec> schema_from_json(const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad schema JSON: ") + e.what());
    }
    if (!arr.is_array()) throw DataError("schema JSON must be an array");
    std::vector<ColumnSpec> schema;
    for (const auto& item : arr) {
        ColumnSpec spec;
        spec.name = item.at("name").get<std::string>();
        spec.kind = kind_from_name(item.at("kind").get<std::string>());
        spec.category = category_from_name(item.at("category").get<std::string>());
        schema.push_back(std::move(spec));
    }
    return schema;
}

std::vector<ColumnSpec> load_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return schema_from_json(buf.str());
}

}  // namespace relapse
