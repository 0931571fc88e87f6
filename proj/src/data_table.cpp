#include "relapse/data_table.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "relapse/rng.hpp"

namespace relapse {

std::string_view kind_name(ColumnKind k) {
    switch (k) {
        case ColumnKind::Numeric: return "numeric";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::Binary: return "binary";
    }
    return "?";
}

std::string_view category_name(ColumnCategory c) {
    switch (c) {
        case ColumnCategory::Demographic: return "demographic";
        case ColumnCategory::ClinicalOnset: return "clinical_onset";
        case ColumnCategory::ClinicalRecent: return "clinical_recent";
        case ColumnCategory::ClinicalCurrentWeek: return "clinical_current_week";
        case ColumnCategory::Environmental: return "environmental";
        case ColumnCategory::Meta: return "meta";
        case ColumnCategory::Outcome: return "outcome";
    }
    return "?";
}

ColumnKind kind_from_name(std::string_view s) {
    if (s == "numeric") return ColumnKind::Numeric;
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "binary") return ColumnKind::Binary;
    throw DataError("unknown column kind '" + std::string(s) + "'");
}

ColumnCategory category_from_name(std::string_view s) {
    if (s == "demographic") return ColumnCategory::Demographic;
    if (s == "clinical_onset") return ColumnCategory::ClinicalOnset;
    if (s == "clinical_recent") return ColumnCategory::ClinicalRecent;
    if (s == "clinical_current_week") return ColumnCategory::ClinicalCurrentWeek;
    if (s == "environmental") return ColumnCategory::Environmental;
    if (s == "meta") return ColumnCategory::Meta;
    if (s == "outcome") return ColumnCategory::Outcome;
    throw DataError("unknown column category '" + std::string(s) + "'");
}

DataTable::DataTable(std::vector<ColumnSpec> schema, std::vector<Column> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (schema_.size() != columns_.size()) {
        throw DataError("schema/column count mismatch");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& spec : schema_) {
        if (!seen.insert(spec.name).second) {
            throw DataError("duplicate column name '" + spec.name + "'");
        }
        if (spec.category == ColumnCategory::Outcome && spec.kind != ColumnKind::Binary) {
            throw DataError("outcome column '" + spec.name + "' must be binary");
        }
    }
    n_rows_ = columns_.empty() ? 0 : columns_[0].missing.size();
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        if (col.missing.size() != n_rows_) {
            throw DataError("column '" + schema_[c].name + "' row count mismatch");
        }
        const bool categorical = schema_[c].kind == ColumnKind::Categorical;
        if (categorical ? col.cat.size() != n_rows_ : col.num.size() != n_rows_) {
            throw DataError("column '" + schema_[c].name + "' storage size mismatch");
        }
    }
}

std::optional<std::size_t> DataTable::find_column(std::string_view name) const {
    for (std::size_t c = 0; c < schema_.size(); ++c) {
        if (schema_[c].name == name) return c;
    }
    return std::nullopt;
}

std::size_t DataTable::column_index(std::string_view name) const {
    if (auto c = find_column(name)) return *c;
    throw DataError("unknown column '" + std::string(name) + "'");
}

DataTable DataTable::select_rows(std::span<const std::size_t> rows) const {
    std::vector<Column> cols(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& src = columns_[c];
        auto& dst = cols[c];
        dst.levels = src.levels;
        dst.missing.reserve(rows.size());
        const bool categorical = schema_[c].kind == ColumnKind::Categorical;
        if (categorical) {
            dst.cat.reserve(rows.size());
        } else {
            dst.num.reserve(rows.size());
        }
        for (std::size_t r : rows) {
            dst.missing.push_back(src.missing[r]);
            if (categorical) {
                dst.cat.push_back(src.cat[r]);
            } else {
                dst.num.push_back(src.num[r]);
            }
        }
    }
    return DataTable(schema_, std::move(cols));
}

DataTable DataTable::select_columns(std::span<const std::string> names) const {
    std::vector<ColumnSpec> schema;
    std::vector<Column> cols;
    schema.reserve(names.size());
    cols.reserve(names.size());
    for (const auto& name : names) {
        const std::size_t c = column_index(name);
        schema.push_back(schema_[c]);
        cols.push_back(columns_[c]);
    }
    return DataTable(std::move(schema), std::move(cols));
}

TableBuilder::TableBuilder(std::vector<ColumnSpec> schema)
    : schema_(std::move(schema)), columns_(schema_.size()), row_set_(schema_.size(), 0) {
    std::unordered_set<std::string_view> seen;
    for (const auto& spec : schema_) {
        if (!seen.insert(spec.name).second) {
            throw DataError("duplicate column name '" + spec.name + "'");
        }
    }
}

std::size_t TableBuilder::column_index(std::string_view name) const {
    for (std::size_t c = 0; c < schema_.size(); ++c) {
        if (schema_[c].name == name) return c;
    }
    throw DataError("unknown column '" + std::string(name) + "'");
}

void TableBuilder::begin_row() {
    if (in_row_) throw Error("begin_row called twice");
    std::fill(row_set_.begin(), row_set_.end(), 0);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        auto& col = columns_[c];
        col.missing.push_back(1);
        if (schema_[c].kind == ColumnKind::Categorical) {
            col.cat.push_back(-1);
        } else {
            col.num.push_back(0.0);
        }
    }
    in_row_ = true;
}

void TableBuilder::set_numeric(std::size_t col, double value) {
    if (!in_row_) throw Error("set_numeric outside a row");
    const auto& spec = schema_[col];
    if (spec.kind == ColumnKind::Categorical) {
        throw DataError("column '" + spec.name + "' is categorical");
    }
    if (spec.kind == ColumnKind::Binary && value != 0.0 && value != 1.0) {
        throw DataError("binary column '" + spec.name + "' given value " + std::to_string(value));
    }
    if (!std::isfinite(value)) {
        throw DataError("non-finite value for column '" + spec.name + "'");
    }
    columns_[col].num.back() = value;
    columns_[col].missing.back() = 0;
    row_set_[col] = 1;
}

void TableBuilder::set_category(std::size_t col, std::string_view level) {
    if (!in_row_) throw Error("set_category outside a row");
    const auto& spec = schema_[col];
    if (spec.kind != ColumnKind::Categorical) {
        throw DataError("column '" + spec.name + "' is not categorical");
    }
    auto& column = columns_[col];
    std::int32_t code = -1;
    for (std::size_t i = 0; i < column.levels.size(); ++i) {
        if (column.levels[i] == level) {
            code = static_cast<std::int32_t>(i);
            break;
        }
    }
    if (code < 0) {
        code = static_cast<std::int32_t>(column.levels.size());
        column.levels.emplace_back(level);
    }
    column.cat.back() = code;
    column.missing.back() = 0;
    row_set_[col] = 1;
}

void TableBuilder::end_row() {
    if (!in_row_) throw Error("end_row without begin_row");
    in_row_ = false;
    ++n_rows_;
}

DataTable TableBuilder::build() {
    if (in_row_) throw Error("build called inside an open row");
    return DataTable(std::move(schema_), std::move(columns_));
}

double missing_fraction(const DataTable& table, std::string_view column) {
    const std::size_t c = table.column_index(column);
    if (table.n_rows() == 0) throw DataError("missing_fraction on empty table");
    std::size_t count = 0;
    for (std::size_t r = 0; r < table.n_rows(); ++r) count += table.is_missing(r, c);
    return static_cast<double>(count) / static_cast<double>(table.n_rows());
}

namespace {

std::optional<double> pearson_by_index(const DataTable& table, std::size_t cx, std::size_t cy) {
    if (table.spec(cx).kind == ColumnKind::Categorical || table.spec(cy).kind == ColumnKind::Categorical) {
        throw DataError("correlation requires numeric or binary columns");
    }
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (table.is_missing(r, cx) || table.is_missing(r, cy)) continue;
        const double x = table.numeric_at(r, cx);
        const double y = table.numeric_at(r, cy);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return std::nullopt;
    const double nd = static_cast<double>(n);
    const double vx = sxx - sx * sx / nd;
    const double vy = syy - sy * sy / nd;
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
    const double cov = sxy - sx * sy / nd;
    return cov / std::sqrt(vx * vy);
}

}  // namespace

std::optional<double> pearson_correlation(const DataTable& table, std::string_view x, std::string_view y) {
    return pearson_by_index(table, table.column_index(x), table.column_index(y));
}

CorrelationMatrix::CorrelationMatrix(std::vector<std::string> names)
    : names_(std::move(names)),
      values_(names_.size() * names_.size(), 0.0),
      defined_(names_.size() * names_.size(), 0) {}

void CorrelationMatrix::set(std::size_t i, std::size_t j, double v) {
    values_[i * size() + j] = v;
    defined_[i * size() + j] = 1;
}

void CorrelationMatrix::set_undefined(std::size_t i, std::size_t j) {
    values_[i * size() + j] = 0.0;
    defined_[i * size() + j] = 0;
}

CorrelationMatrix correlation_matrix(const DataTable& table, std::span<const std::string> columns) {
    CorrelationMatrix m(std::vector<std::string>(columns.begin(), columns.end()));
    std::vector<std::size_t> idx;
    idx.reserve(columns.size());
    for (const auto& name : columns) idx.push_back(table.column_index(name));

    for (std::size_t i = 0; i < idx.size(); ++i) {
        m.set(i, i, 1.0);
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
            if (auto r = pearson_by_index(table, idx[i], idx[j])) {
                m.set(i, j, *r);
                m.set(j, i, *r);
            } else {
                m.set_undefined(i, j);
                m.set_undefined(j, i);
            }
        }
    }
    return m;
}

SplitResult stratified_split(const DataTable& table, std::string_view outcome, double test_fraction,
                             std::uint64_t seed) {
    const std::size_t oc = table.column_index(outcome);
    if (table.spec(oc).kind != ColumnKind::Binary) {
        throw DataError("outcome column '" + std::string(outcome) + "' must be binary");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw DataError("test_fraction must lie in (0,1)");
    }

    std::vector<std::size_t> by_class[2];
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (table.is_missing(r, oc)) {
            throw DataError("outcome has a missing value at row " + std::to_string(r));
        }
        by_class[table.numeric_at(r, oc) != 0.0 ? 1 : 0].push_back(r);
    }
    if (by_class[0].empty() || by_class[1].empty()) {
        throw DataError("stratified split needs both outcome classes present");
    }

    Rng rng(seed);
    std::vector<std::size_t> train_rows, test_rows;
    for (auto& rows : by_class) {
        rng.shuffle(rows);
        // round-half-up per class
        const std::size_t test_n =
            static_cast<std::size_t>(std::floor(static_cast<double>(rows.size()) * test_fraction + 0.5));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < test_n ? test_rows : train_rows).push_back(rows[i]);
        }
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    if (train_rows.empty() || test_rows.empty()) {
        throw DataError("split produced an empty train or test set");
    }

    SplitResult out;
    out.train = table.select_rows(train_rows);
    out.test = table.select_rows(test_rows);
    out.train_rows = std::move(train_rows);
    out.test_rows = std::move(test_rows);
    return out;
}

}  // namespace relapse
