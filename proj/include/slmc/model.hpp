#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slmc/common.hpp"
#include "slmc/derivatives.hpp"

namespace slmc {

// The sample (X_1,...,X_n). Immutable after construction.
class ObservationSet {
public:
    explicit ObservationSet(std::vector<VectorXd> points) : points_(std::move(points)) {
        if (points_.empty()) throw ValidationError("ObservationSet: need at least one observation");
        const auto m = points_.front().size();
        for (const auto& p : points_) {
            if (p.size() != m)
                throw ValidationError("ObservationSet: observations must share one dimension");
        }
    }

    int count() const { return static_cast<int>(points_.size()); }
    int point_dim() const { return static_cast<int>(points_.front().size()); }
    const VectorXd& operator[](int i) const { return points_[static_cast<size_t>(i)]; }
    const std::vector<VectorXd>& points() const { return points_; }

private:
    std::vector<VectorXd> points_;
};

// Log-concave prior with a positive minimum of -log pi0 and Lipschitz gradient.
struct PriorSpec {
    std::function<double(const VectorXd&)> neg_log_density;
    std::function<VectorXd(const VectorXd&)> gradient;
    std::function<MatrixXd(const VectorXd&)> hessian;  // optional
    double lipschitz = 0.0;  // Lipschitz constant of the prior gradient
    double min_value = 0.0;  // min over theta of -log pi0, must be positive
};

// The statistical model: per-observation potentials
//   U_x(theta) = -log pi0(theta) + n * (-log p_theta(x))
// and their average over the sample.
struct PotentialModel {
    ObservationSet observations;
    PriorSpec prior;
    std::function<double(const VectorXd&, const VectorXd&)> neg_log_lik;         // (theta, x)
    std::function<VectorXd(const VectorXd&, const VectorXd&)> grad_neg_log_lik;  // (theta, x)
    std::function<MatrixXd(const VectorXd&, const VectorXd&)> hess_neg_log_lik;  // optional
    int dim = 0;

    // Lipschitz constant of the per-observation likelihood gradient (the L of
    // the weak-convexity hypotheses); 0 when unknown.
    double obs_lipschitz = 0.0;

    std::string kind = "custom";
    double obs_variance = 1.0;   // gaussian kind
    double power_p = 1.0;        // power kind
    double prior_variance = 1.0;

    int n() const { return observations.count(); }
    bool has_hessian() const {
        return static_cast<bool>(hess_neg_log_lik) && static_cast<bool>(prior.hessian);
    }
};

inline void check_index(const PotentialModel& model, int i) {
    if (i < 0 || i >= model.n())
        throw ValidationError("observation index " + std::to_string(i) + " out of range [0, " +
                              std::to_string(model.n()) + ")");
}

inline double eval_potential(const PotentialModel& model, int i, const VectorXd& theta) {
    check_index(model, i);
    const double v = model.prior.neg_log_density(theta) +
                     model.n() * model.neg_log_lik(theta, model.observations[i]);
    if (!std::isfinite(v)) throw EvaluationError("non-finite potential value", theta);
    return v;
}

inline VectorXd grad_potential(const PotentialModel& model, int i, const VectorXd& theta) {
    check_index(model, i);
    VectorXd g = model.prior.gradient(theta) +
                 model.n() * model.grad_neg_log_lik(theta, model.observations[i]);
    if (!g.allFinite()) throw EvaluationError("non-finite potential gradient", theta);
    return g;
}

inline double eval_mean_potential(const PotentialModel& model, const VectorXd& theta) {
    double lik = 0.0;  // sum of -log p equals n times the average
    for (int i = 0; i < model.n(); ++i) lik += model.neg_log_lik(theta, model.observations[i]);
    const double v = model.prior.neg_log_density(theta) + lik;
    if (!std::isfinite(v)) throw EvaluationError("non-finite mean potential value", theta);
    return v;
}

inline VectorXd grad_mean_potential(const PotentialModel& model, const VectorXd& theta) {
    VectorXd g = model.prior.gradient(theta);
    for (int i = 0; i < model.n(); ++i) g += model.grad_neg_log_lik(theta, model.observations[i]);
    if (!g.allFinite()) throw EvaluationError("non-finite mean potential gradient", theta);
    return g;
}

inline MatrixXd hess_mean_potential(const PotentialModel& model, const VectorXd& theta) {
    MatrixXd h = model.prior.hessian(theta);
    for (int i = 0; i < model.n(); ++i) h += model.hess_neg_log_lik(theta, model.observations[i]);
    return h;
}

// Scalar-field views. `per_obs_potential` is the potential of one observation,
// `mean_potential` their average, `likelihood_field` the bare -log p_theta(X_i)
// that the per-observation curvature hypothesis speaks about.
inline ScalarField per_obs_potential(const PotentialModel& model, int i) {
    check_index(model, i);
    ScalarField f;
    f.dim = model.dim;
    f.value = [&model, i](const VectorXd& t) { return eval_potential(model, i, t); };
    f.gradient = [&model, i](const VectorXd& t) { return grad_potential(model, i, t); };
    if (model.has_hessian()) {
        f.hessian = [&model, i](const VectorXd& t) {
            return MatrixXd(model.prior.hessian(t) +
                            model.n() * model.hess_neg_log_lik(t, model.observations[i]));
        };
    }
    return f;
}

inline ScalarField mean_potential(const PotentialModel& model) {
    ScalarField f;
    f.dim = model.dim;
    f.value = [&model](const VectorXd& t) { return eval_mean_potential(model, t); };
    f.gradient = [&model](const VectorXd& t) { return grad_mean_potential(model, t); };
    if (model.has_hessian()) {
        f.hessian = [&model](const VectorXd& t) { return hess_mean_potential(model, t); };
    }
    return f;
}

inline ScalarField likelihood_field(const PotentialModel& model, int i) {
    check_index(model, i);
    ScalarField f;
    f.dim = model.dim;
    f.value = [&model, i](const VectorXd& t) {
        return model.neg_log_lik(t, model.observations[i]);
    };
    f.gradient = [&model, i](const VectorXd& t) {
        return VectorXd(model.grad_neg_log_lik(t, model.observations[i]));
    };
    if (model.hess_neg_log_lik) {
        f.hessian = [&model, i](const VectorXd& t) {
            return MatrixXd(model.hess_neg_log_lik(t, model.observations[i]));
        };
    }
    return f;
}

// Smallest Hessian eigenvalue of one per-observation potential (index given)
// or of the average potential (nullopt).
inline double hessian_min_eig(const PotentialModel& model, std::optional<int> obs,
                              const VectorXd& theta) {
    const ScalarField f = obs ? per_obs_potential(model, *obs) : mean_potential(model);
    return hessian_min_eig(f, theta);
}

// ---------------------------------------------------------------------------
// Built-in models
// ---------------------------------------------------------------------------

inline PriorSpec gaussian_prior(int dim, double variance) {
    if (variance <= 1.0 / (2.0 * M_PI)) {
        // min of -log pi0 is (d/2) log(2 pi s^2), which must stay positive
        throw ValidationError("gaussian prior variance must exceed 1/(2*pi)");
    }
    PriorSpec prior;
    const double inv_var = 1.0 / variance;
    const double log_norm = 0.5 * dim * std::log(2.0 * M_PI * variance);
    prior.neg_log_density = [inv_var, log_norm](const VectorXd& t) {
        return 0.5 * inv_var * t.squaredNorm() + log_norm;
    };
    prior.gradient = [inv_var](const VectorXd& t) { return VectorXd(inv_var * t); };
    prior.hessian = [inv_var, dim](const VectorXd&) {
        return MatrixXd(inv_var * MatrixXd::Identity(dim, dim));
    };
    prior.lipschitz = inv_var;
    prior.min_value = log_norm;
    return prior;
}

// Gaussian location model: p_theta(x) = N(x; theta, obs_variance * I),
// pi0 = N(0, prior_variance * I). Conjugate, closed-form posterior.
inline PotentialModel make_gaussian_model(std::vector<VectorXd> points, double obs_variance = 1.0,
                                          double prior_variance = 1.0) {
    ObservationSet obs(std::move(points));
    const int d = obs.point_dim();
    if (obs_variance <= 1.0 / (2.0 * M_PI)) {
        // keeps min -log p positive so per-observation potentials stay positive
        throw ValidationError("gaussian observation variance must exceed 1/(2*pi)");
    }
    const double inv_var = 1.0 / obs_variance;
    const double log_norm = 0.5 * d * std::log(2.0 * M_PI * obs_variance);
    PotentialModel model{std::move(obs), gaussian_prior(d, prior_variance),
                         nullptr, nullptr, nullptr, d};
    model.neg_log_lik = [inv_var, log_norm](const VectorXd& t, const VectorXd& x) {
        return 0.5 * inv_var * (x - t).squaredNorm() + log_norm;
    };
    model.grad_neg_log_lik = [inv_var](const VectorXd& t, const VectorXd& x) {
        return VectorXd(inv_var * (t - x));
    };
    model.hess_neg_log_lik = [inv_var, d](const VectorXd&, const VectorXd&) {
        return MatrixXd(inv_var * MatrixXd::Identity(d, d));
    };
    model.obs_lipschitz = inv_var;
    model.kind = "gaussian";
    model.obs_variance = obs_variance;
    model.prior_variance = prior_variance;
    return model;
}

struct GaussianPosterior {
    VectorXd mean;
    MatrixXd cov;
};

inline GaussianPosterior gaussian_posterior(const PotentialModel& model) {
    if (model.kind != "gaussian")
        throw ValidationError("closed-form posterior requires the gaussian model");
    const int d = model.dim;
    const int n = model.n();
    const double precision = 1.0 / model.prior_variance + n / model.obs_variance;
    VectorXd sum = VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) sum += model.observations[i];
    GaussianPosterior post;
    post.mean = (sum / model.obs_variance) / precision;
    post.cov = MatrixXd::Identity(d, d) / precision;
    return post;
}

// Power model: -log p_theta(x) = (1 + |theta - x|^2)^p with p in [1/2, 1].
// Weakly convex; the curvature floor holds with r = (1-p)/p, c = 2p(2p-1).
inline PotentialModel make_power_model(std::vector<VectorXd> points, double p,
                                       double prior_variance = 1.0) {
    if (p < 0.5 || p > 1.0) throw ValidationError("power model requires p in [1/2, 1]");
    ObservationSet obs(std::move(points));
    const int d = obs.point_dim();
    PotentialModel model{std::move(obs), gaussian_prior(d, prior_variance),
                         nullptr, nullptr, nullptr, d};
    model.neg_log_lik = [p](const VectorXd& t, const VectorXd& x) {
        return std::pow(1.0 + (t - x).squaredNorm(), p);
    };
    model.grad_neg_log_lik = [p](const VectorXd& t, const VectorXd& x) {
        const VectorXd diff = t - x;
        return VectorXd(2.0 * p * std::pow(1.0 + diff.squaredNorm(), p - 1.0) * diff);
    };
    model.hess_neg_log_lik = [p, d](const VectorXd& t, const VectorXd& x) {
        const VectorXd diff = t - x;
        const double s = diff.squaredNorm();
        MatrixXd h = 2.0 * p * std::pow(1.0 + s, p - 1.0) * MatrixXd::Identity(d, d);
        h += 4.0 * p * (p - 1.0) * std::pow(1.0 + s, p - 2.0) * (diff * diff.transpose());
        return h;
    };
    model.obs_lipschitz = 2.0 * p;  // sup over theta of the likelihood Hessian norm
    model.kind = "power";
    model.power_p = p;
    model.prior_variance = prior_variance;
    return model;
}

}  // namespace slmc
