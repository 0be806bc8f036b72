#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "slmc/derivatives.hpp"
#include "slmc/minimize.hpp"
#include "slmc/model.hpp"

namespace slmc {

// Constants of the weak-convexity (curvature-floor) hypothesis: the floor
// lambda_min(Hess V) >= c * V^(-r), the gradient Lipschitz constant of the
// per-observation term, the prior's gradient Lipschitz constant, and the
// exponent governing how minimizer norms may grow with the sample size.
struct KlParams {
    double c = 1.0;
    double r = 0.0;
    double lipschitz = 1.0;
    double prior_lipschitz = 1.0;
    double beta = 1.0;

    // r = 1 is the limiting heavy-tail case; only c = 0 is consistent there
    // (the Hessian floor decays one power faster than the bound).
    void validate() const {
        if (!(c >= 0.0)) throw ValidationError("KlParams: c must be nonnegative");
        if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("KlParams: r must lie in [0, 1]");
        if (r == 1.0 && c > 0.0)
            throw ValidationError("KlParams: r = 1 requires c = 0");
        if (!(lipschitz > 0.0)) throw ValidationError("KlParams: lipschitz must be positive");
        if (lipschitz > 0.0) {
            const double cap = std::pow(8.0 * lipschitz / (1.0 + r), 1.0 + r);
            if (c > cap * (1.0 + 1e-12))
                throw ValidationError("KlParams: c exceeds the normalization (8L/(1+r))^(1+r)");
        }
        if (!(beta >= 0.0)) throw ValidationError("KlParams: beta must be nonnegative");
    }
};

struct CheckReport {
    bool passed = false;
    double worst_margin = 0.0;
    VectorXd worst_point;
    long points_checked = 0;
};

enum class MarginScale { Absolute, Relative };

// Grid-checks the curvature floor lambda_min(Hess V) >= c * V^(-r).
// Margins are absolute by default; Relative divides each slack by
// max(1, c * V^(-r)).
inline CheckReport check_hkl(const ScalarField& V, const KlParams& params,
                             const std::vector<VectorXd>& grid, double tol,
                             MarginScale scale = MarginScale::Absolute) {
    params.validate();
    CheckReport report;
    report.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& theta : grid) {
        const double value = V.value(theta);
        if (!(value > 0.0)) {
            throw HypothesisViolation("check_hkl: potential not positive (" +
                                      std::to_string(value) + ") at " + format_point(theta));
        }
        const double floor = params.c * std::pow(value, -params.r);
        double margin = hessian_min_eig(V, theta) - floor;
        if (scale == MarginScale::Relative) margin /= std::max(1.0, std::abs(floor));
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_point = theta;
        }
        ++report.points_checked;
    }
    report.passed = report.worst_margin >= -tol;
    return report;
}

// Largest observed gradient difference quotient; a lower bound on the true
// Lipschitz constant. Coincident pairs are skipped.
inline double estimate_lipschitz(const std::function<VectorXd(const VectorXd&)>& gradient,
                                 const std::vector<std::pair<VectorXd, VectorXd>>& pairs) {
    double best = -1.0;
    for (const auto& [a, b] : pairs) {
        const double dist = (a - b).norm();
        if (dist < 1e-12) continue;
        best = std::max(best, (gradient(a) - gradient(b)).norm() / dist);
    }
    if (best < 0.0) throw DegenerateInput("estimate_lipschitz: all pairs coincident");
    return best;
}

// Grid-checks the growth consequences of the curvature floor: the two-sided
// gradient bound, the quadratic envelopes around the minimizer, and the
// power-growth lower bound.
inline CheckReport check_growth_bounds(const ScalarField& V, const KlParams& params,
                                       const MinimizerResult& minimizer,
                                       const std::vector<VectorXd>& grid, double tol) {
    params.validate();
    const double c = params.c, r = params.r, L = params.lipschitz;
    const double vmin = minimizer.min_value;
    if (!(vmin > 0.0))
        throw HypothesisViolation("check_growth_bounds: minimum value must be positive");
    const double grad_coeff = (c == 0.0) ? 0.0 : 2.0 * c / (1.0 - r);
    const double power_coeff = std::pow((1.0 + r) * c / 2.0, 1.0 / (1.0 + r));
    const double damp = std::pow(2.0, -r / (1.0 + r));

    CheckReport report;
    report.worst_margin = std::numeric_limits<double>::infinity();
    auto consider = [&](double margin, const VectorXd& theta) {
        if (margin < report.worst_margin) {
            report.worst_margin = margin;
            report.worst_point = theta;
        }
    };
    for (const auto& theta : grid) {
        const double value = V.value(theta);
        if (!(value > 0.0))
            throw HypothesisViolation("check_growth_bounds: potential not positive at " +
                                      format_point(theta));
        const double grad_sq = V.gradient(theta).squaredNorm();
        const double dist_sq = (theta - minimizer.argmin).squaredNorm();

        const double grad_lower =
            grad_coeff * (std::pow(value, 1.0 - r) - std::pow(vmin, 1.0 - r));
        consider(grad_sq - grad_lower, theta);
        consider(2.0 * L * (value - vmin) - grad_sq, theta);
        consider(std::pow(value, 1.0 + r) - std::pow(vmin, 1.0 + r) -
                     (1.0 + r) * c / 2.0 * dist_sq,
                 theta);
        consider(L / 2.0 * dist_sq - (value - vmin), theta);
        consider(value - damp * (vmin + power_coeff * std::pow(dist_sq, 1.0 / (1.0 + r))),
                 theta);
        ++report.points_checked;
    }
    report.passed = report.worst_margin >= -tol;
    return report;
}

// Constants inherited by the averaged potential: curvature floor c * n^(1+r)
// with the same exponent, gradient Lipschitz constant n*L + prior Lipschitz.
inline KlParams compose_posterior_kl(const KlParams& params, int n) {
    params.validate();
    if (n < 1) throw ValidationError("compose_posterior_kl: n must be >= 1");
    KlParams out = params;
    out.c = params.c * std::pow(static_cast<double>(n), 1.0 + params.r);
    out.lipschitz = n * params.lipschitz + params.prior_lipschitz;
    return out;
}

struct HminOptions {
    double kappa1 = 10.0;  // slack on the minimizer-norm threshold
    double kappa2 = 10.0;  // slack on the minimum-value threshold
    double beta = 1.0;
    double m_nd = 0.0;     // minimum-value scale; 0 means the default n*d
    double minimizer_tol = 1e-8;
};

struct HminReport {
    CheckReport report;
    double max_argmin_norm = 0.0;
    double max_min_value = 0.0;
    double norm_threshold = 0.0;
    double value_threshold = 0.0;
};

// Checks that per-observation minimizers stay in a ball of radius
// kappa1 * sqrt(d) * log^beta(n) and their minima below kappa2 * M_{n,d}.
// The log is clamped at 1 so tiny samples reduce to plain constants.
inline HminReport check_hmin(const PotentialModel& model, const HminOptions& options = {}) {
    const int n = model.n();
    const int d = model.dim;
    HminReport out;
    VectorXd worst_argmin = VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
        const MinimizerResult res =
            find_minimizer(per_obs_potential(model, i), model.observations[i],
                           options.minimizer_tol);
        if (res.argmin.norm() > out.max_argmin_norm) {
            out.max_argmin_norm = res.argmin.norm();
            worst_argmin = res.argmin;
        }
        out.max_min_value = std::max(out.max_min_value, res.min_value);
    }
    const double log_term = std::max(std::log(static_cast<double>(n)), 1.0);
    out.norm_threshold = options.kappa1 * std::sqrt(static_cast<double>(d)) *
                         std::pow(log_term, options.beta);
    const double m_nd = options.m_nd > 0.0 ? options.m_nd : static_cast<double>(n) * d;
    out.value_threshold = options.kappa2 * m_nd;
    out.report.points_checked = n;
    out.report.worst_point = worst_argmin;
    out.report.worst_margin = std::min(out.norm_threshold - out.max_argmin_norm,
                                       out.value_threshold - out.max_min_value);
    out.report.passed = out.report.worst_margin >= 0.0;
    return out;
}

// Verification grid: bulk points from the initial law N(0, sigma2 * I) plus a
// deterministic radial sweep out to radius 10*sqrt(d), so tails are probed too.
inline std::vector<VectorXd> make_check_grid(int dim, int count, double sigma2,
                                             std::uint64_t seed) {
    if (dim < 1 || count < 2) throw ValidationError("make_check_grid: bad dim or count");
    std::vector<VectorXd> grid;
    grid.reserve(static_cast<size_t>(count));
    Rng rng = make_stream(seed, 0);
    const int gaussian_count = count / 2;
    const double sigma = std::sqrt(sigma2);
    for (int k = 0; k < gaussian_count; ++k) grid.push_back(sigma * standard_normal(dim, rng));

    const int radial_count = count - gaussian_count;
    const double max_radius = 10.0 * std::sqrt(static_cast<double>(dim));
    std::vector<VectorXd> directions;
    if (dim == 1) {
        directions.push_back(VectorXd::Constant(1, 1.0));
        directions.push_back(VectorXd::Constant(1, -1.0));
    } else if (dim == 2) {
        const int spokes = 16;
        for (int k = 0; k < spokes; ++k) {
            const double angle = 2.0 * M_PI * k / spokes;
            VectorXd e(2);
            e << std::cos(angle), std::sin(angle);
            directions.push_back(e);
        }
    } else {
        for (int k = 0; k < dim; ++k) {
            VectorXd e = VectorXd::Zero(dim);
            e[k] = 1.0;
            directions.push_back(e);
            directions.push_back(-e);
        }
        Rng dir_rng = make_stream(seed, 1);
        while (static_cast<int>(directions.size()) < 2 * dim + 8) {
            VectorXd e = standard_normal(dim, dir_rng);
            if (e.norm() > 1e-8) directions.push_back(e.normalized());
        }
    }
    const int dirs = static_cast<int>(directions.size());
    const int per_dir = std::max(1, (radial_count + dirs - 1) / dirs);
    int emitted = 0;
    for (int step = 1; step <= per_dir && emitted < radial_count; ++step) {
        for (const auto& e : directions) {
            if (emitted >= radial_count) break;
            grid.push_back((max_radius * step / per_dir) * e);
            ++emitted;
        }
    }
    return grid;
}

}  // namespace slmc
