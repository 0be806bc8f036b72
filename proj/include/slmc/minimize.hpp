#pragma once

#include <cmath>
#include <limits>

#include "slmc/derivatives.hpp"

namespace slmc {

struct MinimizerResult {
    VectorXd argmin;
    double min_value = 0.0;
    double grad_norm_at_argmin = 0.0;
    int iterations = 0;
};

// Gradient descent with backtracking line search. Sufficient for the convex
// potentials handled here; no Hessian requirement, deterministic.
inline MinimizerResult find_minimizer(const ScalarField& f, VectorXd theta_init, double tol,
                                      int max_iterations = 100000) {
    if (tol <= 0.0) throw ValidationError("find_minimizer: tol must be positive");
    VectorXd theta = std::move(theta_init);
    double value = f.value(theta);
    VectorXd grad = f.has_gradient() ? f.gradient(theta) : fd_gradient(f.value, theta);
    double step = 1.0;
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        const double gnorm = grad.norm();
        if (gnorm <= tol) {
            return MinimizerResult{theta, value, gnorm, iter};
        }
        // Armijo backtracking with mild step growth. Once the required
        // decrease falls below the representable resolution of `value`, fall
        // back to accepting steps that strictly shrink the gradient.
        const double ulp =
            4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(value));
        double trial_step = step;
        bool accepted = false;
        VectorXd candidate, candidate_grad;
        double candidate_value = 0.0;
        bool grew = false;
        for (int bt = 0; bt < 60; ++bt) {
            candidate = theta - trial_step * grad;
            candidate_value = f.value(candidate);
            const double needed = 1e-4 * trial_step * gnorm * gnorm;
            if (!std::isfinite(candidate_value)) {
                trial_step *= 0.5;
                continue;
            }
            if (needed >= ulp) {
                if (candidate_value <= value - needed) {
                    candidate_grad = f.has_gradient() ? f.gradient(candidate)
                                                      : fd_gradient(f.value, candidate);
                    accepted = true;
                    grew = true;
                    break;
                }
            } else if (candidate_value <= value + ulp) {
                // Value comparisons are rounding noise down here; progress is
                // measured on the gradient instead.
                candidate_grad =
                    f.has_gradient() ? f.gradient(candidate) : fd_gradient(f.value, candidate);
                if (candidate_grad.norm() < gnorm) {
                    accepted = true;
                    break;
                }
            }
            trial_step *= 0.5;
        }
        if (!accepted) {
            // Stuck below representable progress; report best iterate.
            throw NonConvergence("find_minimizer: line search failed", theta, value, gnorm);
        }
        theta = candidate;
        value = candidate_value;
        grad = candidate_grad;
        step = grew ? trial_step * 2.0 : trial_step;
    }
    const double gnorm = grad.norm();
    throw NonConvergence("find_minimizer: iteration cap exceeded", theta, value, gnorm);
}

}  // namespace slmc
