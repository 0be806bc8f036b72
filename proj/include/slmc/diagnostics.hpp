#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "slmc/common.hpp"
#include "slmc/model.hpp"
#include "slmc/sampler.hpp"

namespace slmc {

struct ConditionalL2Estimate {
    double value = 0.0;
    int bins = 0;
    std::vector<long> per_bin_counts;
    double standard_error = 0.0;
    double plug_in_bias = 0.0;  // (n-1) * bins / R under an independent limit
};

namespace detail {

// Equal-probability bin index per replica from marginal empirical quantiles
// (d = 1) or their product (d = 2).
inline std::vector<int> quantile_bins(const std::vector<ReplicaDraw>& pairs, int dim,
                                      int& bins_per_dim, int dims_used) {
    const int R = static_cast<int>(pairs.size());
    std::vector<int> assignment(static_cast<size_t>(R), 0);
    std::vector<double> coord(static_cast<size_t>(R));
    for (int axis = 0; axis < dims_used; ++axis) {
        for (int rrep = 0; rrep < R; ++rrep)
            coord[static_cast<size_t>(rrep)] = pairs[static_cast<size_t>(rrep)].theta[axis];
        std::vector<double> sorted = coord;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> edges;  // interior edges
        edges.reserve(static_cast<size_t>(bins_per_dim - 1));
        for (int k = 1; k < bins_per_dim; ++k)
            edges.push_back(sorted[static_cast<size_t>(
                std::min<long>(R - 1, static_cast<long>(k) * R / bins_per_dim))]);
        for (int rrep = 0; rrep < R; ++rrep) {
            const int cell = static_cast<int>(
                std::lower_bound(edges.begin(), edges.end(), coord[static_cast<size_t>(rrep)]) -
                edges.begin());
            assignment[static_cast<size_t>(rrep)] =
                assignment[static_cast<size_t>(rrep)] * bins_per_dim + cell;
        }
    }
    (void)dim;
    return assignment;
}

inline double conditional_chi_square(const std::vector<int>& bin_of, const std::vector<int>& obs_of,
                                     int total_bins, int n_obs, std::vector<long>* counts_out) {
    const int R = static_cast<int>(bin_of.size());
    std::vector<long> counts(static_cast<size_t>(total_bins), 0);
    std::vector<long> table(static_cast<size_t>(total_bins) * n_obs, 0);
    for (int rrep = 0; rrep < R; ++rrep) {
        const int b = bin_of[static_cast<size_t>(rrep)];
        ++counts[static_cast<size_t>(b)];
        ++table[static_cast<size_t>(b) * n_obs + obs_of[static_cast<size_t>(rrep)]];
    }
    // Single final division keeps degenerate cases (point-mass conditionals)
    // exact in floating point.
    double weighted = 0.0;
    const double uniform = 1.0 / n_obs;
    for (int b = 0; b < total_bins; ++b) {
        const long cb = counts[static_cast<size_t>(b)];
        if (cb == 0) continue;
        double inner = 0.0;
        for (int i = 0; i < n_obs; ++i) {
            const double p = static_cast<double>(table[static_cast<size_t>(b) * n_obs + i]) / cb;
            inner += n_obs * (p - uniform) * (p - uniform);
        }
        weighted += static_cast<double>(cb) * inner;
    }
    if (counts_out) *counts_out = std::move(counts);
    return weighted / R;
}

}  // namespace detail

// Plug-in estimate of the conditional chi-square distance of the active
// observation's law given theta from uniform: quantile-bins theta, measures
// the per-bin conditional frequencies, bootstraps the standard error over
// replicas. Restricted to d <= 2.
inline ConditionalL2Estimate estimate_It(const EnsembleSnapshot& snap, int n_obs, int bins,
                                         std::uint64_t bootstrap_seed = 7,
                                         int bootstrap_resamples = 200) {
    const int R = static_cast<int>(snap.pairs.size());
    if (R < 2) throw DegenerateInput("estimate_It: need at least two replicas");
    const int dim = static_cast<int>(snap.pairs.front().theta.size());
    if (dim > 2) throw ValidationError("estimate_It: binned estimator supports d <= 2 only");
    if (bins < 1) throw DegenerateInput("estimate_It: need at least one bin");

    ConditionalL2Estimate out;
    if (n_obs == 1) {  // single observation: the conditional law is uniform by construction
        out.bins = 1;
        out.per_bin_counts = {R};
        return out;
    }

    const int dims_used = dim;
    int bins_per_dim = dim == 1 ? bins : std::max(1, static_cast<int>(std::sqrt(bins)));
    std::vector<int> bin_of;
    int total_bins = 0;
    for (;;) {
        total_bins = 1;
        for (int a = 0; a < dims_used; ++a) total_bins *= bins_per_dim;
        bin_of = detail::quantile_bins(snap.pairs, dim, bins_per_dim, dims_used);
        std::vector<long> counts(static_cast<size_t>(total_bins), 0);
        for (int b : bin_of) ++counts[static_cast<size_t>(b)];
        const bool any_empty = std::any_of(counts.begin(), counts.end(),
                                           [](long c) { return c == 0; });
        if (!any_empty) break;
        if (bins_per_dim == 1)
            throw DegenerateInput("estimate_It: could not build a nonempty binning");
        bins_per_dim = std::max(1, bins_per_dim / 2);  // ties collapsed a bin; coarsen and retry
    }

    std::vector<int> obs_of(static_cast<size_t>(R));
    for (int rrep = 0; rrep < R; ++rrep)
        obs_of[static_cast<size_t>(rrep)] = snap.pairs[static_cast<size_t>(rrep)].active_obs;

    out.bins = total_bins;
    out.value = detail::conditional_chi_square(bin_of, obs_of, total_bins, n_obs,
                                               &out.per_bin_counts);
    out.plug_in_bias = static_cast<double>(n_obs - 1) * total_bins / R;

    // Nonparametric bootstrap over replicas, keeping the fitted partition.
    Rng rng = make_stream(bootstrap_seed, 0);
    std::uniform_int_distribution<int> pick(0, R - 1);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<int> boot_bin(static_cast<size_t>(R)), boot_obs(static_cast<size_t>(R));
    for (int b = 0; b < bootstrap_resamples; ++b) {
        for (int rrep = 0; rrep < R; ++rrep) {
            const int j = pick(rng);
            boot_bin[static_cast<size_t>(rrep)] = bin_of[static_cast<size_t>(j)];
            boot_obs[static_cast<size_t>(rrep)] = obs_of[static_cast<size_t>(j)];
        }
        const double v =
            detail::conditional_chi_square(boot_bin, boot_obs, total_bins, n_obs, nullptr);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / bootstrap_resamples;
    out.standard_error = std::sqrt(std::max(0.0, sum_sq / bootstrap_resamples - mean * mean));
    return out;
}

struct EntropyEstimate {
    double value = 0.0;
    double bandwidth = 0.0;
    double z_n_used = 0.0;
    double standard_error = 0.0;
};

struct BandwidthRule {
    enum class Kind { Silverman, Fixed };
    Kind kind = Kind::Silverman;
    double scale = 1.0;        // multiplier on the Silverman bandwidth
    double fixed_value = 0.0;  // used when kind == Fixed
};

// Plug-in entropy estimate (1/R) sum_r [log kde(theta_r) + U_mean(theta_r) + log Z],
// with a leave-one-out Gaussian product-kernel density over the replicas.
inline EntropyEstimate estimate_Jt(const EnsembleSnapshot& snap, const PotentialModel& model,
                                   double z_n, BandwidthRule rule = {}) {
    const int R = static_cast<int>(snap.pairs.size());
    if (R < 2) throw DegenerateInput("estimate_Jt: need at least two replicas");
    const int d = model.dim;
    if (d > 3) throw ValidationError("estimate_Jt: kernel estimator supports d <= 3 only");
    if (!(z_n > 0.0)) throw ValidationError("estimate_Jt: Z_n must be positive");

    // Per-dimension Silverman bandwidths.
    std::vector<double> bw(static_cast<size_t>(d));
    for (int a = 0; a < d; ++a) {
        double mean = 0.0, sq = 0.0;
        for (const auto& p : snap.pairs) {
            mean += p.theta[a];
            sq += p.theta[a] * p.theta[a];
        }
        mean /= R;
        const double sd = std::sqrt(std::max(1e-300, sq / R - mean * mean));
        if (rule.kind == BandwidthRule::Kind::Fixed) {
            bw[static_cast<size_t>(a)] = rule.fixed_value;
        } else {
            const double factor = std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0));
            bw[static_cast<size_t>(a)] =
                rule.scale * factor * sd * std::pow(static_cast<double>(R), -1.0 / (d + 4.0));
        }
        if (!(bw[static_cast<size_t>(a)] > 0.0))
            throw ValidationError("estimate_Jt: bandwidth must be positive");
    }

    // Pairwise kernel sums, accumulated symmetrically.
    std::vector<double> ksum(static_cast<size_t>(R), 0.0);
    std::vector<double> coords(static_cast<size_t>(R) * d);
    for (int rrep = 0; rrep < R; ++rrep)
        for (int a = 0; a < d; ++a)
            coords[static_cast<size_t>(rrep) * d + a] = snap.pairs[static_cast<size_t>(rrep)].theta[a] /
                                                        bw[static_cast<size_t>(a)];
    for (int i = 0; i < R; ++i) {
        const double* xi = &coords[static_cast<size_t>(i) * d];
        for (int j = i + 1; j < R; ++j) {
            const double* xj = &coords[static_cast<size_t>(j) * d];
            double q = 0.0;
            for (int a = 0; a < d; ++a) {
                const double diff = xi[a] - xj[a];
                q += diff * diff;
            }
            if (q < 1600.0) {  // exp(-800) underflows anyway
                const double k = std::exp(-0.5 * q);
                ksum[static_cast<size_t>(i)] += k;
                ksum[static_cast<size_t>(j)] += k;
            }
        }
    }
    double log_norm = 0.5 * d * std::log(2.0 * M_PI) + std::log(static_cast<double>(R - 1));
    for (int a = 0; a < d; ++a) log_norm += std::log(bw[static_cast<size_t>(a)]);

    double sum = 0.0, sum_sq = 0.0;
    const double log_z = std::log(z_n);
    for (int rrep = 0; rrep < R; ++rrep) {
        const double k = ksum[static_cast<size_t>(rrep)];
        if (!(k > 0.0))
            throw DegenerateInput(
                "estimate_Jt: zero leave-one-out density; increase the bandwidth rule");
        const double summand = std::log(k) - log_norm +
                               eval_mean_potential(model, snap.pairs[static_cast<size_t>(rrep)].theta) +
                               log_z;
        sum += summand;
        sum_sq += summand * summand;
    }
    EntropyEstimate out;
    out.value = sum / R;
    out.standard_error = std::sqrt(std::max(0.0, sum_sq / R - out.value * out.value) /
                                   static_cast<double>(R));
    out.z_n_used = z_n;
    double geo = 0.0;
    for (int a = 0; a < d; ++a) geo += std::log(bw[static_cast<size_t>(a)]);
    out.bandwidth = std::exp(geo / d);
    return out;
}

// Empirical alpha-th moment of the average potential over the snapshot.
inline std::pair<double, double> estimate_moments(const EnsembleSnapshot& snap,
                                                  const PotentialModel& model, double alpha_mom) {
    if (!(alpha_mom >= 1.0)) throw ValidationError("estimate_moments: alpha must be >= 1");
    const int R = static_cast<int>(snap.pairs.size());
    if (R < 1) throw DegenerateInput("estimate_moments: empty snapshot");
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& p : snap.pairs) {
        const double v = std::pow(eval_mean_potential(model, p.theta), alpha_mom);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / R;
    const double var = std::max(0.0, sum_sq / R - mean * mean);
    return {mean, std::sqrt(var / R)};
}

struct GeneratorCheck {
    double residual = 0.0;
    double scale = 0.0;
    double quotient = 0.0;        // (E f_{t+dt} - E f_t) / dt
    double generator_mean = 0.0;  // E (L f)_t
    double se_quotient = 0.0;
    double se_generator = 0.0;
};

// Compares the finite-difference time derivative of E[f(theta_t, X_t)] with
// E[(L f)(theta_t, X_t)] using common random numbers (both snapshots come
// from the same paths).
inline GeneratorCheck generator_consistency(const PotentialModel& model, SamplerConfig config,
                                            const ObsFunction& f, double t, double dt,
                                            int replicas, int workers = 1) {
    if (!(dt >= 10.0 * config.h))
        throw ValidationError("generator_consistency: require dt >= 10 h");
    if (!(t >= 0.0)) throw ValidationError("generator_consistency: t must be nonnegative");
    config.T = t + dt;
    const std::vector<double> record{t, t + dt};
    const Ensemble ens =
        run_ensemble(model, config, record, replicas, Drift::Subsampled, workers);

    const auto& at_t = ens.snapshots[0].pairs;
    const auto& at_td = ens.snapshots[1].pairs;
    double diff_sum = 0.0, diff_sq = 0.0, gen_sum = 0.0, gen_sq = 0.0;
    for (int rrep = 0; rrep < replicas; ++rrep) {
        const auto& a = at_t[static_cast<size_t>(rrep)];
        const auto& b = at_td[static_cast<size_t>(rrep)];
        const double diff = f.value(b.theta, b.active_obs) - f.value(a.theta, a.active_obs);
        const double gen = apply_generator(model, config.alpha_n, f, a.theta, a.active_obs);
        diff_sum += diff;
        diff_sq += diff * diff;
        gen_sum += gen;
        gen_sq += gen * gen;
    }
    const double diff_mean = diff_sum / replicas;
    const double diff_var = std::max(0.0, diff_sq / replicas - diff_mean * diff_mean);
    const double gen_mean = gen_sum / replicas;
    const double gen_var = std::max(0.0, gen_sq / replicas - gen_mean * gen_mean);

    GeneratorCheck out;
    out.quotient = diff_mean / dt;
    out.generator_mean = gen_mean;
    out.se_quotient = std::sqrt(diff_var / replicas) / dt;
    out.se_generator = std::sqrt(gen_var / replicas);
    out.residual = std::abs(out.quotient - out.generator_mean);
    out.scale = std::abs(out.generator_mean) + out.se_quotient + out.se_generator;
    return out;
}

}  // namespace slmc
