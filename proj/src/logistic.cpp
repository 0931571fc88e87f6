#include "relapse/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relapse/error.hpp"

namespace relapse {

namespace {

// log(1 + exp(t)) without overflow
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

void check_inputs(const Matrix& x, std::span<const int> y, double c) {
    if (x.rows() != y.size()) throw Error("X/y size mismatch");
    if (!(c > 0.0) || !std::isfinite(c)) throw Error("C must be positive and finite");
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw Error("non-finite value in X");
    }
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

LogisticObjective logistic_objective(std::span<const double> weights, double intercept, const Matrix& x,
                                     std::span<const int> y, double c) {
    check_inputs(x, y, c);
    if (weights.size() != x.cols()) throw Error("weight dimension mismatch");

    LogisticObjective out;
    out.grad_weights.assign(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double z = dot(weights, x.row(i)) + intercept;
        const double s = y[i] == 1 ? 1.0 : -1.0;
        out.loss += softplus(-s * z);
        const double residual = sigmoid(z) - static_cast<double>(y[i]);
        for (std::size_t j = 0; j < x.cols(); ++j) out.grad_weights[j] += residual * x.at(i, j);
        out.grad_intercept += residual;
    }
    for (std::size_t j = 0; j < weights.size(); ++j) {
        out.loss += weights[j] * weights[j] / (2.0 * c);
        out.grad_weights[j] += weights[j] / c;
    }
    return out;
}

LogisticModel train_logistic(const Matrix& x, std::span<const int> y, double c, double tol,
                             std::size_t max_iter) {
    check_inputs(x, y, c);
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (n < 2) throw Error("train_logistic needs at least 2 rows");
    std::size_t n_pos = 0;
    for (int v : y) n_pos += static_cast<std::size_t>(v);
    if (n_pos == 0 || n_pos == n) throw Error("train_logistic needs both classes present");

    std::vector<double> wb(p + 1, 0.0);  // weights then intercept
    auto objective = [&](const std::vector<double>& v) {
        return logistic_objective({v.data(), p}, v[p], x, y, c);
    };

    LogisticObjective cur = objective(wb);
    bool converged = false;
    std::size_t iterations = 0;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        iterations = iter;
        double grad_inf = std::abs(cur.grad_intercept);
        for (double g : cur.grad_weights) grad_inf = std::max(grad_inf, std::abs(g));
        if (grad_inf < tol) {
            converged = true;
            break;
        }

        // Newton direction from the exact Hessian; the ridge keeps the weight
        // block positive definite, a tiny jitter guards the intercept row when
        // probabilities saturate.
        Matrix hessian(p + 1, p + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = dot({wb.data(), p}, x.row(i)) + wb[p];
            const double prob = sigmoid(z);
            const double w = std::max(prob * (1.0 - prob), 1e-12);
            for (std::size_t a = 0; a <= p; ++a) {
                const double xa = a == p ? 1.0 : x.at(i, a);
                for (std::size_t b = a; b <= p; ++b) {
                    const double xb = b == p ? 1.0 : x.at(i, b);
                    hessian.at(a, b) += w * xa * xb;
                }
            }
        }
        for (std::size_t j = 0; j < p; ++j) hessian.at(j, j) += 1.0 / c;
        for (std::size_t a = 0; a <= p; ++a)
            for (std::size_t b = 0; b < a; ++b) hessian.at(a, b) = hessian.at(b, a);

        std::vector<double> grad(p + 1);
        std::copy(cur.grad_weights.begin(), cur.grad_weights.end(), grad.begin());
        grad[p] = cur.grad_intercept;

        std::vector<double> step;
        if (!cholesky_solve(hessian, grad, step)) {
            for (std::size_t a = 0; a <= p; ++a) hessian.at(a, a) += 1e-8;
            if (!cholesky_solve(hessian, grad, step)) {
                throw Error("train_logistic: Hessian solve failed");
            }
        }

        // The Newton decrement bounds the remaining objective gap by half its
        // value; once that gap falls below the representable resolution of
        // the loss, the optimum is reached to machine precision.
        const double slope = dot(grad, step);
        if (slope / 2.0 < 1e-14 * (1.0 + std::abs(cur.loss))) {
            converged = true;
            break;
        }

        // Backtracking line search on the objective.
        double alpha = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            std::vector<double> cand = wb;
            for (std::size_t j = 0; j <= p; ++j) cand[j] -= alpha * step[j];
            const LogisticObjective cand_obj = objective(cand);
            if (cand_obj.loss <= cur.loss - 1e-4 * alpha * slope) {
                wb = std::move(cand);
                cur = cand_obj;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved) {
            converged = true;  // no representable descent left
            break;
        }
    }

    if (!converged) {
        double grad_inf = std::abs(cur.grad_intercept);
        for (double g : cur.grad_weights) grad_inf = std::max(grad_inf, std::abs(g));
        std::ostringstream msg;
        msg << "train_logistic: no convergence in " << iterations + 1 << " iterations, |grad|_inf=" << grad_inf;
        throw Error(msg.str());
    }

    LogisticModel model;
    model.weights.assign(wb.begin(), wb.begin() + static_cast<std::ptrdiff_t>(p));
    model.intercept = wb[p];
    model.c = c;
    return model;
}

std::vector<double> predict_proba_logistic(const LogisticModel& model, const Matrix& x) {
    if (x.cols() != model.weights.size()) throw Error("predict_proba_logistic: dimension mismatch");
    std::vector<double> probs(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        probs[i] = sigmoid(dot(model.weights, x.row(i)) + model.intercept);
    }
    return probs;
}

}  // namespace relapse
