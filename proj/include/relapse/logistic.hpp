#pragma once

#include <span>
#include <vector>

#include "relapse/error.hpp"
#include "relapse/linalg.hpp"

namespace relapse {

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double c = 1.0;  // inverse regularization strength
};

struct LogisticObjective {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_intercept = 0.0;
};

// Penalized negative log-likelihood: sum_i log(1 + exp(-s_i z_i)) with
// z = Xw + b and s = 2y - 1, plus ||w||^2 / (2C). The intercept is not
// penalized.
LogisticObjective logistic_objective(std::span<const double> weights, double intercept, const Matrix& x,
                                     std::span<const int> y, double c);

// Damped Newton from zero initialization, run to ||grad||_inf < tol or until
// the Newton decrement shows the remaining objective gap is below double
// resolution. Deterministic. Throws on one-class data or non-convergence
// (message carries the iteration count and final gradient norm).
LogisticModel train_logistic(const Matrix& x, std::span<const int> y, double c, double tol = 1e-8,
                             std::size_t max_iter = 1000);

double sigmoid(double z);

std::vector<double> predict_proba_logistic(const LogisticModel& model, const Matrix& x);

}  // namespace relapse
