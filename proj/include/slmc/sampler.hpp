#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "slmc/common.hpp"
#include "slmc/model.hpp"
#include "slmc/theory.hpp"

namespace slmc {

enum class InitX { Uniform, Fixed };

struct SamplerConfig {
    double alpha_n = 0.0;  // jump intensity; 0 disables switching
    double h = 1e-3;       // Euler step
    double T = 1.0;        // horizon
    double sigma2 = 1.0;   // initial-law variance
    std::uint64_t seed = 0;
    InitX init_x_mode = InitX::Uniform;
    int fixed_obs = 0;        // active observation when init_x_mode == Fixed
    bool zero_noise = false;  // testing hook: suppresses the Brownian term

    void validate(int n_obs) const {
        if (!(h > 0.0)) throw ValidationError("SamplerConfig: h must be positive");
        if (!(T > 0.0)) throw ValidationError("SamplerConfig: T must be positive");
        if (!(sigma2 > 0.0)) throw ValidationError("SamplerConfig: sigma2 must be positive");
        if (alpha_n < 0.0) throw ValidationError("SamplerConfig: alpha_n must be nonnegative");
        if (alpha_n > 0.0 && h > 1.0 / (10.0 * alpha_n))
            throw ValidationError(
                "SamplerConfig: h must allow >= 10 Euler steps per expected jump interval");
        if (init_x_mode == InitX::Fixed && (fixed_obs < 0 || fixed_obs >= n_obs))
            throw ValidationError("SamplerConfig: fixed_obs out of range");
    }
};

struct SamplerState {
    double t = 0.0;
    VectorXd theta;
    int active_obs = 0;
    double next_jump_t = std::numeric_limits<double>::infinity();
};

struct Trajectory {
    std::vector<double> times;
    std::vector<VectorXd> thetas;
    std::vector<int> active_obs_seq;
    std::vector<double> jump_times;
    long gradient_evals = 0;
};

struct ReplicaDraw {
    VectorXd theta;
    int active_obs = 0;
};

struct EnsembleSnapshot {
    double time = 0.0;
    std::vector<ReplicaDraw> pairs;
};

struct Ensemble {
    std::vector<EnsembleSnapshot> snapshots;
    int replicas = 0;
    SamplerConfig config;
};

struct ReplicaStart {
    VectorXd theta;
    int active_obs = 0;
    double t = 0.0;
};

// Midpoint of the admissible initial-variance interval [c1, c2] / (n L + prior L).
inline double init_sigma(int n, double L, double prior_lipschitz, double c1, double c2) {
    if (!(c1 > 0.0 && c1 <= c2 && c2 < 1.0))
        throw ValidationError("init_sigma: need 0 < c1 <= c2 < 1");
    if (!(L > 0.0) || !(prior_lipschitz > 0.0))
        throw ValidationError("init_sigma: L and the prior Lipschitz constant must be positive");
    return 0.5 * (c1 + c2) / (n * L + prior_lipschitz);
}

// Cumulative sums of iid Exponential(mean 1/alpha) waiting times, truncated at T.
inline std::vector<double> sample_jump_schedule(double alpha_n, double T, Rng& rng) {
    if (!(alpha_n > 0.0)) throw ValidationError("sample_jump_schedule: alpha_n must be positive");
    std::vector<double> jumps;
    if (T <= 0.0) return jumps;
    std::exponential_distribution<double> exp_dist(alpha_n);
    double t = exp_dist(rng);
    while (t < T) {
        jumps.push_back(t);
        t += exp_dist(rng);
    }
    return jumps;
}

namespace detail {

inline void divergence_guard(double t, const VectorXd& theta, double h) {
    if (!theta.allFinite() || theta.norm() > 1e6 * std::sqrt(static_cast<double>(theta.size())))
        throw DivergenceError(t, theta, h);
}

// In-place drift evaluation. The gaussian model's gradients are affine, so the
// long runs avoid the generic callback path entirely.
struct DriftEval {
    const PotentialModel* model;
    bool gaussian = false;
    double curvature = 0.0;   // 1/prior_var + n/obs_var
    double obs_weight = 0.0;  // n/obs_var
    VectorXd data_mean_term;  // (1/obs_var) * sum_i X_i

    explicit DriftEval(const PotentialModel& m) : model(&m) {
        if (m.kind == "gaussian") {
            gaussian = true;
            const double inv_obs = 1.0 / m.obs_variance;
            curvature = 1.0 / m.prior_variance + m.n() * inv_obs;
            obs_weight = m.n() * inv_obs;
            data_mean_term = VectorXd::Zero(m.dim);
            for (int i = 0; i < m.n(); ++i) data_mean_term += inv_obs * m.observations[i];
        }
    }

    void subsampled(int active, const VectorXd& theta, VectorXd& out) const {
        if (gaussian) {
            out = curvature * theta - obs_weight * model->observations[active];
        } else {
            out = grad_potential(*model, active, theta);
        }
    }

    void full(const VectorXd& theta, VectorXd& out) const {
        if (gaussian) {
            out = curvature * theta - data_mean_term;
        } else {
            out = grad_mean_potential(*model, theta);
        }
    }
};

}  // namespace detail

// One Euler-Maruyama step of the subsampled dynamics:
// theta <- theta - h grad U_{X_active}(theta) + sqrt(2h) xi. A zero step
// consumes no randomness and leaves the state unchanged.
inline void step_euler(const PotentialModel& model, SamplerState& state, double h, Rng& rng,
                       bool zero_noise = false) {
    if (h < 0.0) throw ValidationError("step_euler: h must be nonnegative");
    if (h == 0.0) return;
    const VectorXd drift = grad_potential(model, state.active_obs, state.theta);
    if (zero_noise) {
        state.theta -= h * drift;
    } else {
        state.theta += -h * drift + std::sqrt(2.0 * h) * standard_normal(model.dim, rng);
    }
    state.t += h;
    detail::divergence_guard(state.t, state.theta, h);
}

enum class Drift { Subsampled, FullGradient };

// Simulates one path on [start.t, T], recording the state at each requested
// time. The Euler grid is aligned to land exactly on jump and record times;
// jumps redraw the active observation uniformly. Gradient evaluations count 1
// per step for the subsampled drift and n per step for the full gradient.
inline Trajectory simulate_path(const PotentialModel& model, const SamplerConfig& config,
                                std::vector<double> record_times, Drift drift_mode, Rng& rng,
                                std::optional<ReplicaStart> start = std::nullopt) {
    config.validate(model.n());
    std::sort(record_times.begin(), record_times.end());
    const double t0 = start ? start->t : 0.0;
    for (double rt : record_times) {
        if (rt < t0 - 1e-12 || rt > config.T + 1e-12)
            throw ValidationError("simulate_path: record_times must lie within the horizon");
    }

    SamplerState state;
    if (start) {
        state.t = start->t;
        state.theta = start->theta;
        state.active_obs = start->active_obs;
    } else {
        state.t = 0.0;
        state.theta = std::sqrt(config.sigma2) * standard_normal(model.dim, rng);
        if (config.init_x_mode == InitX::Uniform) {
            std::uniform_int_distribution<int> pick_init(0, model.n() - 1);
            state.active_obs = pick_init(rng);
        } else {
            state.active_obs = config.fixed_obs;
        }
    }

    std::exponential_distribution<double> exp_dist(config.alpha_n > 0.0 ? config.alpha_n : 1.0);
    state.next_jump_t = config.alpha_n > 0.0 ? state.t + exp_dist(rng)
                                             : std::numeric_limits<double>::infinity();

    Trajectory traj;
    const int n = model.n();
    const int d = model.dim;
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    const detail::DriftEval drift_eval(model);
    VectorXd drift(d);

    size_t rec = 0;
    auto record_now = [&]() {
        traj.times.push_back(record_times[rec]);
        traj.thetas.push_back(state.theta);
        traj.active_obs_seq.push_back(state.active_obs);
        ++rec;
    };
    // Records requested at (or before) the start refer to the initial state.
    while (rec < record_times.size() && record_times[rec] <= state.t) record_now();

    long steps = 0;
    int guard_countdown = 0;
    while (state.t < config.T) {
        double target = config.T;
        if (rec < record_times.size()) target = std::min(target, record_times[rec]);
        const bool jump_next = state.next_jump_t <= target;
        if (jump_next) target = state.next_jump_t;

        const double span = target - state.t;
        if (span > 0.0) {
            const long k = std::max<long>(1, static_cast<long>(std::ceil(span / config.h - 1e-12)));
            const double dt = span / k;
            const double noise_scale = config.zero_noise ? 0.0 : std::sqrt(2.0 * dt);
            for (long s = 0; s < k; ++s) {
                if (drift_mode == Drift::Subsampled) {
                    drift_eval.subsampled(state.active_obs, state.theta, drift);
                } else {
                    drift_eval.full(state.theta, drift);
                }
                state.theta -= dt * drift;
                if (noise_scale != 0.0) {
                    for (int c = 0; c < d; ++c) state.theta[c] += noise_scale * normal(rng);
                }
                if (--guard_countdown <= 0) {
                    detail::divergence_guard(state.t + (s + 1) * dt, state.theta, dt);
                    guard_countdown = 64;
                }
            }
            steps += k;
        }
        state.t = target;
        if (jump_next && state.t >= state.next_jump_t) {
            state.active_obs = pick(rng);
            traj.jump_times.push_back(state.next_jump_t);
            state.next_jump_t += exp_dist(rng);
        }
        while (rec < record_times.size() && record_times[rec] <= state.t) record_now();
    }
    detail::divergence_guard(state.t, state.theta, config.h);
    traj.gradient_evals = drift_mode == Drift::Subsampled ? steps : steps * n;
    return traj;
}

inline Trajectory run_slmc(const PotentialModel& model, const SamplerConfig& config,
                           const std::vector<double>& record_times) {
    Rng rng = make_stream(config.seed, 0);
    return simulate_path(model, config, record_times, Drift::Subsampled, rng);
}

inline Trajectory run_full_lmc(const PotentialModel& model, const SamplerConfig& config,
                               const std::vector<double>& record_times) {
    Rng rng = make_stream(config.seed, 0);
    return simulate_path(model, config, record_times, Drift::FullGradient, rng);
}

namespace detail {

template <class Body>
inline void parallel_replicas(int replicas, int workers, Body&& body) {
    workers = std::max(1, std::min(workers, replicas));
    if (workers == 1) {
        for (int rep = 0; rep < replicas; ++rep) body(rep);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            try {
                for (int rep = next.fetch_add(1); rep < replicas; rep = next.fetch_add(1)) {
                    body(rep);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(replicas);
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

// R independent replicas with reproducibly derived streams; the result does
// not depend on worker scheduling. Total gradient evaluations are summed.
inline Ensemble run_ensemble(const PotentialModel& model, const SamplerConfig& config,
                             const std::vector<double>& record_times, int replicas,
                             Drift drift_mode = Drift::Subsampled, int workers = 1,
                             const std::vector<ReplicaStart>* starts = nullptr,
                             long* gradient_evals = nullptr) {
    if (replicas < 1) throw ValidationError("run_ensemble: need at least one replica");
    if (starts && static_cast<int>(starts->size()) != replicas)
        throw ValidationError("run_ensemble: starts must match the replica count");
    std::vector<double> sorted_times = record_times;
    std::sort(sorted_times.begin(), sorted_times.end());

    Ensemble ens;
    ens.replicas = replicas;
    ens.config = config;
    ens.snapshots.resize(sorted_times.size());
    for (size_t k = 0; k < sorted_times.size(); ++k) {
        ens.snapshots[k].time = sorted_times[k];
        ens.snapshots[k].pairs.resize(static_cast<size_t>(replicas));
    }
    std::vector<long> evals(static_cast<size_t>(replicas), 0);

    detail::parallel_replicas(replicas, workers, [&](int rep) {
        Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(rep));
        std::optional<ReplicaStart> start;
        if (starts) start = (*starts)[static_cast<size_t>(rep)];
        Trajectory traj = simulate_path(model, config, sorted_times, drift_mode, rng, start);
        if (traj.times.size() != sorted_times.size())
            throw ValidationError("run_ensemble: trajectory missed a record time");
        for (size_t k = 0; k < sorted_times.size(); ++k) {
            ens.snapshots[k].pairs[static_cast<size_t>(rep)] =
                ReplicaDraw{traj.thetas[k], traj.active_obs_seq[k]};
        }
        evals[static_cast<size_t>(rep)] = traj.gradient_evals;
    });
    if (gradient_evals) {
        long total = 0;
        for (long e : evals) total += e;
        *gradient_evals = total;
    }
    return ens;
}

// Test function on (theta, observation-index) with the theta-derivatives the
// generator needs.
struct ObsFunction {
    std::function<double(const VectorXd&, int)> value;
    std::function<VectorXd(const VectorXd&, int)> grad;
    std::function<double(const VectorXd&, int)> laplacian;
};

// Full generator of the pair process: diffusion part driven by the active
// observation's potential plus the uniform-redraw jump part at rate alpha_n.
inline double apply_generator(const PotentialModel& model, double alpha_n, const ObsFunction& f,
                              const VectorXd& theta, int i) {
    check_index(model, i);
    const double diffusion =
        -grad_potential(model, i, theta).dot(f.grad(theta, i)) + f.laplacian(theta, i);
    double jump = 0.0;
    const double f_here = f.value(theta, i);
    for (int j = 0; j < model.n(); ++j) jump += f.value(theta, j) - f_here;
    return diffusion + alpha_n / model.n() * jump;
}

}  // namespace slmc
