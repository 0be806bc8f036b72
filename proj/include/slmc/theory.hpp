#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "slmc/common.hpp"

namespace slmc {

// Undetermined universal constants of the bounds. Everything defaults to 1
// except the WLSI pair (a, log c_univ), which the Poincare-to-WLSI statement
// pins explicitly.
struct TheoryConstants {
    double kappa = 1.0;  // Poincare floor prefactor
    double a = 32.0;     // WLSI rate prefactor
    double C1 = 1.0;
    double C2 = 1.0;
    double C3 = 1.0;
    double C = 1.0;      // generic envelope prefactor
};

inline double wlsi_log_c_univ() {
    const double e = std::exp(1.0);
    return 3.0 / (14.0 * e * e) * (1.0 / e + 0.5) + 1.0 + std::log(14.0 / 3.0);
}

struct TheoryInputs {
    int n = 2;
    int d = 1;
    double r = 0.0;
    double beta = 1.0;
    double c = 1.0;
    double L = 1.0;
    double prior_lipschitz = 1.0;
    std::optional<double> poincare_override;
    TheoryConstants constants;

    void validate() const {
        if (n < 2) throw ValidationError("TheoryInputs: n must be >= 2");
        if (d < 1) throw ValidationError("TheoryInputs: d must be >= 1");
        if (!(r >= 0.0 && r < 1.0)) throw ValidationError("TheoryInputs: r must lie in [0, 1)");
        if (!(beta >= 0.0)) throw ValidationError("TheoryInputs: beta must be nonnegative");
        if (!(c > 0.0 && L > 0.0)) throw ValidationError("TheoryInputs: c, L must be positive");
    }
};

// The recurring complexity factor d * log^2(n). Natural log throughout.
inline double d_log2_n(int n, int d) {
    const double ln = std::log(static_cast<double>(n));
    return d * ln * ln;
}

// Prescribed jump intensity 1 / (n * (d log^2 n)^(1+r)).
inline double default_alpha(int n, int d, double r) {
    if (n < 2) throw ValidationError("default_alpha: n must be >= 2");
    if (d < 1) throw ValidationError("default_alpha: d must be >= 1");
    return 1.0 / (n * std::pow(d_log2_n(n, d), 1.0 + r));
}

// WLSI rate function implied by a Poincare constant: 0 above the threshold
// 1/e + 1/2, else (32 / C_P) * log(c_univ / s).
inline double wlsi_phi(double s, double poincare) {
    if (!(s > 0.0)) throw ValidationError("wlsi_phi: s must be positive");
    if (!(poincare > 0.0)) throw ValidationError("wlsi_phi: C_P must be positive");
    const double threshold = std::exp(-1.0) + 0.5;
    if (s > threshold) return 0.0;
    return 32.0 / poincare * (wlsi_log_c_univ() - std::log(s));
}

// Display-only readability form a * (1 + log(1/s)) / C_P.
inline double wlsi_phi_readable(double s, double poincare, double a = 32.0) {
    const double threshold = std::exp(-1.0) + 0.5;
    if (s > threshold) return 0.0;
    return a * (1.0 + std::log(1.0 / s)) / poincare;
}

// Sample-independent Poincare floor kappa / (d log^2 n)^((1+r)^2).
inline double poincare_lower_bound(const TheoryInputs& in) {
    in.validate();
    const double e = 1.0 + in.r;
    return in.constants.kappa / std::pow(d_log2_n(in.n, in.d), e * e);
}

// On-average floor kappa * (n / (L d log n))^alpha, alpha the user-supplied
// identifiability exponent.
inline double poincare_avg_lower_bound(int n, int d, double L, double alpha_exp,
                                       double kappa = 1.0) {
    if (n < 2) throw ValidationError("poincare_avg_lower_bound: n must be >= 2");
    if (!(alpha_exp >= 0.0))
        throw ValidationError("poincare_avg_lower_bound: exponent must be nonnegative");
    return kappa * std::pow(n / (L * d * std::log(static_cast<double>(n))), alpha_exp);
}

// Prefactor of the exponential forcing term in the entropy decay bound:
// n^4 * (d log^2 n)^(1+r).
inline double cnd(const TheoryInputs& in) {
    in.validate();
    return std::pow(static_cast<double>(in.n), 4.0) * std::pow(d_log2_n(in.n, in.d), 1.0 + in.r);
}

// Log of the initial density-ratio bound (it overflows doubles at realistic
// sizes): (d r / 2) log(C1 d / n) + C2 n d^(1+r) log^(2 beta (1+r))(n).
inline double osc_bound_log(const TheoryInputs& in) {
    in.validate();
    const double ln_n = std::log(static_cast<double>(in.n));
    const double first = in.d * in.r / 2.0 *
                         std::log(in.constants.C1 * in.d / static_cast<double>(in.n));
    const double second = in.constants.C2 * in.n * std::pow(static_cast<double>(in.d), 1.0 + in.r) *
                          std::pow(ln_n, 2.0 * in.beta * (1.0 + in.r));
    return first + second;
}

// Initial-entropy bound C * (n d^(1+r) log^(2 beta (1+r))(n) + d log(d/n)).
inline double j0_bound(const TheoryInputs& in) {
    in.validate();
    const double ln_n = std::log(static_cast<double>(in.n));
    const double main = in.n * std::pow(static_cast<double>(in.d), 1.0 + in.r) *
                        std::pow(ln_n, 2.0 * in.beta * (1.0 + in.r));
    const double tail = in.d * std::log(static_cast<double>(in.d) / in.n);
    return in.constants.C * (main + tail);
}

inline double poincare_in_use(const TheoryInputs& in) {
    return in.poincare_override ? *in.poincare_override : poincare_lower_bound(in);
}

// Entropy envelope
//   C (J0 + c_nd/alpha [1 + (C_P/alpha + sqrt(C_P)) e^(sqrt(C_P)/sqrt(a) + C_P/(3 alpha))]
//        + O_nd) * (1+t)^(1/4) * e^(-sqrt(C_P)/sqrt(a) (sqrt(1+t)-1)),
// evaluated in log space and exponentiated.
inline double entropy_envelope_log(double t, double j0, const TheoryInputs& in, double alpha_n) {
    if (!(t >= 0.0)) throw ValidationError("entropy_envelope: t must be nonnegative");
    if (!(alpha_n > 0.0)) throw ValidationError("entropy_envelope: alpha_n must be positive");
    in.validate();
    const double cp = poincare_in_use(in);
    const double a = in.constants.a;
    const double root = std::sqrt(cp) / std::sqrt(a);

    // log(1 + x e^E) without forming e^E
    const double log_bracket_tail =
        std::log(cp / alpha_n + std::sqrt(cp)) + root + cp / (3.0 * alpha_n);
    const double softplus =
        log_bracket_tail > 36.0 ? log_bracket_tail : std::log1p(std::exp(log_bracket_tail));
    const double log_cnd_term = std::log(cnd(in) / alpha_n) + softplus;
    const double log_osc = osc_bound_log(in);
    // log(J0 + cnd-term + O_nd) via log-sum-exp
    double m = std::max(log_cnd_term, log_osc);
    if (j0 > 0.0) m = std::max(m, std::log(j0));
    double sum = std::exp(log_cnd_term - m) + std::exp(log_osc - m);
    if (j0 > 0.0) sum += std::exp(std::log(j0) - m);
    const double log_prefactor = std::log(in.constants.C) + m + std::log(sum);
    return log_prefactor + 0.25 * std::log1p(t) - root * (std::sqrt(1.0 + t) - 1.0);
}

inline double entropy_envelope(double t, double j0, const TheoryInputs& in, double alpha_n) {
    return std::exp(entropy_envelope_log(t, j0, in, alpha_n));
}

// Horizon guaranteeing entropy below eps:
// C (d log^2 n)^((1+r)^2) [log^2(1/eps) + n^2 (d log^2 n)^(2(1+r)) + d^2 log^2 d].
inline double mixing_time(double eps, const TheoryInputs& in) {
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("mixing_time: eps must lie in (0, 1)");
    in.validate();
    const double lnb = d_log2_n(in.n, in.d);
    const double e = 1.0 + in.r;
    const double ln_eps = std::log(1.0 / eps);
    const double ln_d = in.d == 1 ? 0.0 : std::log(static_cast<double>(in.d));
    return in.constants.C * std::pow(lnb, e * e) *
           (ln_eps * ln_eps + in.n * static_cast<double>(in.n) * std::pow(lnb, 2.0 * e) +
            in.d * static_cast<double>(in.d) * ln_d * ln_d);
}

// Stationary moment bound C * n^alpha * (d log^2 n)^(alpha (1+r)).
inline double moment_bound(const TheoryInputs& in, double alpha_mom) {
    if (!(alpha_mom >= 1.0)) throw ValidationError("moment_bound: alpha must be >= 1");
    in.validate();
    return in.constants.C * std::pow(static_cast<double>(in.n), alpha_mom) *
           std::pow(d_log2_n(in.n, in.d), alpha_mom * (1.0 + in.r));
}

// Log of the exponential-moment bound
//   C1 (d log^2 n)^(r/(1+r)) e^(C2 n d log^2 n) + C3^d e^((1+r) n c^(1/(1+r)) / 16).
inline double exp_moment_bound_log(const TheoryInputs& in) {
    in.validate();
    const double lnb = d_log2_n(in.n, in.d);
    const double first = std::log(in.constants.C1) + in.r / (1.0 + in.r) * std::log(lnb) +
                         in.constants.C2 * in.n * lnb;
    const double second = in.d * std::log(in.constants.C3) +
                          (1.0 + in.r) * in.n * std::pow(in.c, 1.0 / (1.0 + in.r)) / 16.0;
    const double m = std::max(first, second);
    return m + std::log(std::exp(first - m) + std::exp(second - m));
}

struct TheoryReport {
    double alpha_n = 0.0;
    double poincare_floor = 0.0;
    double c_nd = 0.0;
    double osc_log = 0.0;
    double j0 = 0.0;
    double t_eps = 0.0;
    double eps = 0.0;
    TheoryInputs inputs;
};

inline TheoryReport make_theory_report(const TheoryInputs& in, double eps) {
    TheoryReport rep;
    rep.alpha_n = default_alpha(in.n, in.d, in.r);
    rep.poincare_floor = poincare_in_use(in);
    rep.c_nd = cnd(in);
    rep.osc_log = osc_bound_log(in);
    rep.j0 = j0_bound(in);
    rep.t_eps = mixing_time(eps, in);
    rep.eps = eps;
    rep.inputs = in;
    return rep;
}

}  // namespace slmc
