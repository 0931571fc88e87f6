#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relapse/error.hpp"

namespace relapse {

enum class ColumnKind { Numeric, Categorical, Binary };

enum class ColumnCategory {
    Demographic,
    ClinicalOnset,
    ClinicalRecent,
    ClinicalCurrentWeek,
    Environmental,
    Meta,
    Outcome,
};

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    ColumnCategory category = ColumnCategory::Meta;

    bool operator==(const ColumnSpec&) const = default;
};

std::string_view kind_name(ColumnKind k);
std::string_view category_name(ColumnCategory c);
ColumnKind kind_from_name(std::string_view s);
ColumnCategory category_from_name(std::string_view s);

// Storage for one column. Numeric and binary columns live in `num`,
// categorical columns as level codes into `levels`. The missing flag is
// authoritative: a flagged cell's stored value is meaningless.
struct Column {
    std::vector<double> num;
    std::vector<std::int32_t> cat;
    std::vector<std::string> levels;
    std::vector<std::uint8_t> missing;
};

// Immutable typed table with an explicit missingness mask; the currency
// between every stage of the pipeline. Safe to share across threads.
class DataTable {
public:
    DataTable() = default;
    DataTable(std::vector<ColumnSpec> schema, std::vector<Column> columns);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return schema_.size(); }

    const std::vector<ColumnSpec>& schema() const { return schema_; }
    const ColumnSpec& spec(std::size_t c) const { return schema_[c]; }
    const Column& column(std::size_t c) const { return columns_[c]; }

    std::optional<std::size_t> find_column(std::string_view name) const;
    std::size_t column_index(std::string_view name) const;  // throws DataError

    bool is_missing(std::size_t r, std::size_t c) const { return columns_[c].missing[r] != 0; }
    double numeric_at(std::size_t r, std::size_t c) const { return columns_[c].num[r]; }
    const std::string& category_at(std::size_t r, std::size_t c) const {
        return columns_[c].levels[static_cast<std::size_t>(columns_[c].cat[r])];
    }

    DataTable select_rows(std::span<const std::size_t> rows) const;
    DataTable select_columns(std::span<const std::string> names) const;

private:
    std::vector<ColumnSpec> schema_;
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

// Row-by-row construction; cells not set in a row are missing.
class TableBuilder {
public:
    explicit TableBuilder(std::vector<ColumnSpec> schema);

    std::size_t column_index(std::string_view name) const;

    void begin_row();
    void set_numeric(std::size_t col, double value);
    void set_category(std::size_t col, std::string_view level);
    void end_row();

    DataTable build();

private:
    std::vector<ColumnSpec> schema_;
    std::vector<Column> columns_;
    std::vector<std::uint8_t> row_set_;
    bool in_row_ = false;
    std::size_t n_rows_ = 0;
};

// Fraction of missing cells in a column; errors on empty table/unknown name.
double missing_fraction(const DataTable& table, std::string_view column);

// Sample Pearson correlation over pairwise-complete rows. Binary columns
// participate as 0/1. Empty when fewer than 2 complete pairs or a side has
// zero variance.
std::optional<double> pearson_correlation(const DataTable& table, std::string_view x, std::string_view y);

class CorrelationMatrix {
public:
    CorrelationMatrix() = default;
    CorrelationMatrix(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    bool defined(std::size_t i, std::size_t j) const { return defined_[i * size() + j] != 0; }
    double at(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }

    void set(std::size_t i, std::size_t j, double v);
    void set_undefined(std::size_t i, std::size_t j);

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
    std::vector<std::uint8_t> defined_;
};

// Pairwise-complete correlation matrix; undefined entries are flagged rather
// than aborting. Diagonal is exactly 1.
CorrelationMatrix correlation_matrix(const DataTable& table, std::span<const std::string> columns);

struct SplitResult {
    DataTable train;
    DataTable test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

// Per-class test count is floor(class_count * test_fraction + 0.5); rows are
// assigned by a seeded shuffle within each class.
SplitResult stratified_split(const DataTable& table, std::string_view outcome, double test_fraction,
                             std::uint64_t seed);

}  // namespace relapse
