#include "relapse/linalg.hpp"

#include <cmath>

namespace relapse {

bool cholesky_solve(Matrix a, std::vector<double> b, std::vector<double>& x) {
    const std::size_t n = a.rows();
    if (n != a.cols() || b.size() != n) return false;

    // Lower-triangular factorization A = L L^T.
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a.at(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a.at(j, k) * a.at(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double ljj = std::sqrt(diag);
        a.at(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
            a.at(i, j) = s / ljj;
        }
    }

    // Forward then backward substitution.
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a.at(i, k) * b[k];
        b[i] = s / a.at(i, i);
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a.at(k, i) * b[k];
        b[i] = s / a.at(i, i);
    }
    x = std::move(b);
    return true;
}

bool ols_fit(const Matrix& x, std::span<const double> y, std::vector<double>& coef) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols() + 1;  // intercept first
    if (y.size() != n || n == 0) return false;

    Matrix xtx(p, p);
    std::vector<double> xty(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        // augmented row (1, x_r)
        for (std::size_t i = 0; i < p; ++i) {
            const double xi = i == 0 ? 1.0 : x.at(r, i - 1);
            xty[i] += xi * y[r];
            for (std::size_t j = i; j < p; ++j) {
                const double xj = j == 0 ? 1.0 : x.at(r, j - 1);
                xtx.at(i, j) += xi * xj;
            }
        }
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < i; ++j) xtx.at(i, j) = xtx.at(j, i);

    return cholesky_solve(std::move(xtx), std::move(xty), coef);
}

}  // namespace relapse
