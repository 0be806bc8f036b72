#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "slmc/common.hpp"

namespace slmc {

// A twice-differentiable scalar field on R^d. `gradient` and `hessian` may be
// empty, in which case finite differences are used where derivatives are
// needed.
struct ScalarField {
    int dim = 0;
    std::function<double(const VectorXd&)> value;
    std::function<VectorXd(const VectorXd&)> gradient;
    std::function<MatrixXd(const VectorXd&)> hessian;

    bool has_gradient() const { return static_cast<bool>(gradient); }
    bool has_hessian() const { return static_cast<bool>(hessian); }
};

inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& theta, double step = 1e-5) {
    VectorXd g(theta.size());
    VectorXd p = theta;
    for (int k = 0; k < theta.size(); ++k) {
        const double saved = p[k];
        p[k] = saved + step;
        const double up = f(p);
        p[k] = saved - step;
        const double dn = f(p);
        p[k] = saved;
        g[k] = (up - dn) / (2.0 * step);
    }
    return g;
}

// Central differences of the gradient when one is available, otherwise second
// differences of the values. Step follows the usual truncation/round-off
// balance eps^(1/3)*(1+|theta|).
inline MatrixXd fd_hessian(const ScalarField& f, const VectorXd& theta) {
    const int d = static_cast<int>(theta.size());
    const double eps = std::numeric_limits<double>::epsilon();
    MatrixXd h(d, d);
    if (f.has_gradient()) {
        const double step = std::cbrt(eps) * (1.0 + theta.norm());
        VectorXd p = theta;
        for (int k = 0; k < d; ++k) {
            const double saved = p[k];
            p[k] = saved + step;
            const VectorXd up = f.gradient(p);
            p[k] = saved - step;
            const VectorXd dn = f.gradient(p);
            p[k] = saved;
            h.col(k) = (up - dn) / (2.0 * step);
        }
    } else {
        // Second differences of values balance at eps^(1/4), not eps^(1/3).
        const double step = std::pow(eps, 0.25) * (1.0 + theta.norm());
        const double f0 = f.value(theta);
        VectorXd p = theta;
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j) {
                if (i == j) {
                    const double saved = p[i];
                    p[i] = saved + step;
                    const double up = f.value(p);
                    p[i] = saved - step;
                    const double dn = f.value(p);
                    p[i] = saved;
                    h(i, i) = (up - 2.0 * f0 + dn) / (step * step);
                } else {
                    const double si = p[i], sj = p[j];
                    p[i] = si + step; p[j] = sj + step;
                    const double pp = f.value(p);
                    p[j] = sj - step;
                    const double pm = f.value(p);
                    p[i] = si - step; p[j] = sj + step;
                    const double mp = f.value(p);
                    p[j] = sj - step;
                    const double mm = f.value(p);
                    p[i] = si; p[j] = sj;
                    h(i, j) = h(j, i) = (pp - pm - mp + mm) / (4.0 * step * step);
                }
            }
        }
    }
    return h;
}

// Smallest eigenvalue of the (symmetrized) Hessian of `f` at `theta`.
// A finite-difference Hessian whose asymmetry exceeds the tolerance signals
// too-coarse differencing and is reported with the asymmetry magnitude.
inline double hessian_min_eig(const ScalarField& f, const VectorXd& theta,
                              double asym_tol = 1e-4) {
    MatrixXd h = f.has_hessian() ? f.hessian(theta) : fd_hessian(f, theta);
    const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
    const double scale = 1.0 + h.cwiseAbs().maxCoeff();
    if (!f.has_hessian() && asym > asym_tol * scale) {
        throw EvaluationError("finite-difference Hessian asymmetry " + std::to_string(asym) +
                                  " exceeds tolerance; differencing too coarse",
                              theta);
    }
    const MatrixXd sym = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw EvaluationError("eigen-decomposition failed for Hessian", theta);
    }
    return es.eigenvalues().minCoeff();
}

}  // namespace slmc
