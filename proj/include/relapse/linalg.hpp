#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace relapse {

// Dense row-major matrix. Just enough linear algebra for the models in this
// library; not a general-purpose type.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Solves A x = b for symmetric positive definite A by Cholesky, in place.
// Returns false if A is not (numerically) positive definite.
bool cholesky_solve(Matrix a, std::vector<double> b, std::vector<double>& x);

// Ordinary least squares of y on columns of X plus an intercept stored first.
// Returns false when the normal equations are singular.
bool ols_fit(const Matrix& x, std::span<const double> y, std::vector<double>& coef);

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace relapse
