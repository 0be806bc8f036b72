#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "slmc/model.hpp"
#include "slmc/sampler.hpp"

using namespace slmc;

namespace {

VectorXd vec1(double x) {
    VectorXd v(1);
    v << x;
    return v;
}

PotentialModel small_gaussian(int n = 4) {
    std::vector<VectorXd> obs;
    for (int i = 0; i < n; ++i) obs.push_back(vec1(0.05 * (i - (n - 1) / 2.0)));
    return make_gaussian_model(obs);
}

TEST(Sampler, JumpScheduleEmptyAtZeroHorizon) {
    Rng rng = make_stream(1, 0);
    EXPECT_TRUE(sample_jump_schedule(2.0, 0.0, rng).empty());
}

TEST(Sampler, JumpCountMatchesPoissonMean) {
    // 10^3 schedules at alpha T = 2000: the mean count sits within 3 standard
    // errors of 2000 (se = sqrt(2000/1000))
    const double alpha = 2.0, horizon = 1000.0;
    const int schedules = 1000;
    double total = 0.0;
    for (int k = 0; k < schedules; ++k) {
        Rng rng = make_stream(99, static_cast<std::uint64_t>(k));
        total += static_cast<double>(sample_jump_schedule(alpha, horizon, rng).size());
    }
    const double mean = total / schedules;
    const double se = std::sqrt(alpha * horizon / schedules);
    EXPECT_NEAR(mean, alpha * horizon, 3.0 * se);
}

TEST(Sampler, InterArrivalMean) {
    Rng rng = make_stream(5, 0);
    const double alpha = 2.0;
    const int draws = 100000;
    std::exponential_distribution<double> exp_dist(alpha);
    double total = 0.0;
    for (int k = 0; k < draws; ++k) total += exp_dist(rng);
    EXPECT_NEAR(total / draws, 1.0 / alpha, 0.01 / alpha);
}

TEST(Sampler, StepEulerPureDiffusionVariance) {
    // flat potential: increments are N(0, 2h)
    PotentialModel model = small_gaussian(1);
    model.grad_neg_log_lik = [](const VectorXd& t, const VectorXd&) {
        return VectorXd::Zero(t.size());
    };
    model.prior.gradient = [](const VectorXd& t) { return VectorXd::Zero(t.size()); };
    model.kind = "custom";
    Rng rng = make_stream(11, 0);
    const double h = 0.05;
    const int steps = 100000;
    double sum_sq = 0.0;
    SamplerState state;
    for (int k = 0; k < steps; ++k) {
        state.t = 0.0;
        state.theta = vec1(0.0);
        state.active_obs = 0;
        step_euler(model, state, h, rng);
        sum_sq += state.theta.squaredNorm();
    }
    EXPECT_NEAR(sum_sq / steps, 2.0 * h, 0.02 * 2.0 * h);
}

TEST(Sampler, StepEulerZeroNoiseGradientStep) {
    // quadratic potential with gradient 2 theta: theta' = theta (1 - 2h)
    std::vector<VectorXd> obs{vec1(0.0)};
    PotentialModel model = make_gaussian_model(obs);
    model.prior.gradient = [](const VectorXd& t) { return VectorXd(t); };
    model.grad_neg_log_lik = [](const VectorXd& t, const VectorXd&) { return VectorXd(t); };
    model.kind = "custom";  // gradient of U_0 is theta + 1 * theta = 2 theta
    Rng rng = make_stream(0, 0);
    SamplerState state;
    state.theta = vec1(1.0);
    state.active_obs = 0;
    step_euler(model, state, 0.1, rng, /*zero_noise=*/true);
    EXPECT_NEAR(state.theta[0], 0.8, 1e-15);
}

TEST(Sampler, StepEulerNullStepConsumesNothing) {
    PotentialModel model = small_gaussian();
    Rng rng = make_stream(3, 0);
    Rng witness = rng;
    SamplerState state;
    state.theta = vec1(0.5);
    state.active_obs = 1;
    step_euler(model, state, 0.0, rng);
    EXPECT_EQ(state.theta[0], 0.5);
    EXPECT_EQ(rng(), witness());  // same stream position
}

TEST(Sampler, ConfigValidation) {
    const PotentialModel model = small_gaussian();
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 0.2;  // too coarse for the jump rate
    config.T = 1.0;
    EXPECT_THROW(config.validate(model.n()), ValidationError);
    config.h = 1e-3;
    EXPECT_NO_THROW(config.validate(model.n()));
    config.init_x_mode = InitX::Fixed;
    config.fixed_obs = 9;
    EXPECT_THROW(config.validate(model.n()), ValidationError);
}

TEST(Sampler, DeterministicTrajectories) {
    const PotentialModel model = small_gaussian();
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 1e-3;
    config.T = 0.5;
    config.sigma2 = 0.1;
    config.seed = 42;
    const std::vector<double> record{0.0, 0.25, 0.5};
    const Trajectory a = run_slmc(model, config, record);
    const Trajectory b = run_slmc(model, config, record);
    ASSERT_EQ(a.times.size(), b.times.size());
    for (size_t k = 0; k < a.times.size(); ++k) {
        EXPECT_EQ(a.times[k], b.times[k]);
        EXPECT_EQ(a.thetas[k][0], b.thetas[k][0]);  // bitwise
        EXPECT_EQ(a.active_obs_seq[k], b.active_obs_seq[k]);
    }
    EXPECT_EQ(a.jump_times, b.jump_times);
    EXPECT_EQ(a.gradient_evals, b.gradient_evals);
}

TEST(Sampler, NoJumpsZeroNoiseIsGradientFlow) {
    const PotentialModel model = small_gaussian();
    SamplerConfig config;
    config.alpha_n = 0.0;  // no switching
    config.h = 1e-3;
    config.T = 1.0;
    config.sigma2 = 0.1;
    config.seed = 7;
    config.init_x_mode = InitX::Fixed;
    config.fixed_obs = 0;
    config.zero_noise = true;
    const Trajectory traj = run_slmc(model, config, {1.0});
    // Euler gradient flow computed independently
    Rng rng = make_stream(config.seed, 0);
    VectorXd theta = std::sqrt(config.sigma2) * standard_normal(1, rng);
    for (int k = 0; k < 1000; ++k) theta -= config.h * grad_potential(model, 0, theta);
    EXPECT_NEAR(traj.thetas.back()[0], theta[0], 1e-12);
    EXPECT_TRUE(traj.jump_times.empty());
}

TEST(Sampler, SingleObservationSamplersCoincide) {
    const PotentialModel model = small_gaussian(1);
    SamplerConfig config;
    config.alpha_n = 1.0;
    config.h = 1e-2;
    config.T = 1.0;
    config.sigma2 = 0.2;
    config.seed = 9;
    const std::vector<double> record{0.5, 1.0};
    const Trajectory a = run_slmc(model, config, record);
    const Trajectory b = run_full_lmc(model, config, record);
    for (size_t k = 0; k < record.size(); ++k)
        EXPECT_NEAR(a.thetas[k][0], b.thetas[k][0], 1e-14);
    EXPECT_EQ(b.gradient_evals, a.gradient_evals);  // n = 1
}

TEST(Sampler, GradientEvalAccounting) {
    const PotentialModel model = small_gaussian(4);
    SamplerConfig config;
    config.alpha_n = 0.5;
    config.h = 1e-2;
    config.T = 1.0;
    config.sigma2 = 0.2;
    config.seed = 1;
    const Trajectory slmc = run_slmc(model, config, {1.0});
    const Trajectory lmc = run_full_lmc(model, config, {1.0});
    EXPECT_EQ(lmc.gradient_evals, 4 * slmc.gradient_evals);
    // at least T/h steps, plus the shortened event-landing steps
    EXPECT_GE(slmc.gradient_evals, 100);

    // counted evaluations match actual drift computations
    PotentialModel counted = small_gaussian(4);
    counted.kind = "custom";  // force the generic path
    long calls = 0;
    auto base = counted.grad_neg_log_lik;
    counted.grad_neg_log_lik = [&calls, base](const VectorXd& t, const VectorXd& x) {
        ++calls;
        return base(t, x);
    };
    Rng rng = make_stream(config.seed, 0);
    const Trajectory traj = simulate_path(counted, config, {1.0}, Drift::Subsampled, rng);
    EXPECT_EQ(traj.gradient_evals, calls);
}

TEST(Sampler, StationaryMeanMatchesConjugatePosterior) {
    const PotentialModel model = small_gaussian(4);
    const GaussianPosterior post = gaussian_posterior(model);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 2e-3;
    config.T = 40.0;
    config.sigma2 = 0.1;
    config.seed = 2024;
    std::vector<double> record;
    for (double t = 20.0; t <= 40.0; t += 0.5) record.push_back(t);
    const Trajectory traj = run_slmc(model, config, record);
    double mean = 0.0;
    for (const auto& th : traj.thetas) mean += th[0];
    mean /= static_cast<double>(traj.thetas.size());
    // autocorrelation time ~ 1/(2 lambda) = 0.1; samples 0.5 apart are nearly
    // independent, so se ~ sd/sqrt(count)
    const double se = std::sqrt(post.cov(0, 0) / static_cast<double>(record.size()));
    EXPECT_NEAR(mean, post.mean[0], 3.5 * se);
}

TEST(Sampler, ActiveObservationMarginalIsUniform) {
    const PotentialModel model = small_gaussian(4);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 1e-3;
    config.T = 3.0;
    config.sigma2 = 0.1;
    config.seed = 77;
    config.init_x_mode = InitX::Fixed;
    config.fixed_obs = 0;
    const int replicas = 4000;
    const Ensemble ens = run_ensemble(model, config, {3.0}, replicas);
    std::vector<int> counts(4, 0);
    for (const auto& p : ens.snapshots[0].pairs) ++counts[static_cast<size_t>(p.active_obs)];
    double chi_sq = 0.0;
    for (int c : counts) {
        const double expectation = replicas / 4.0;
        chi_sq += (c - expectation) * (c - expectation) / expectation;
    }
    EXPECT_LT(chi_sq, 11.34);  // chi-square(3) at level 0.01
}

TEST(Sampler, EnsembleIndependentOfWorkerCount) {
    const PotentialModel model = small_gaussian(3);
    SamplerConfig config;
    config.alpha_n = 1.0;
    config.h = 1e-2;
    config.T = 0.5;
    config.sigma2 = 0.1;
    config.seed = 5;
    const Ensemble a = run_ensemble(model, config, {0.5}, 64, Drift::Subsampled, 1);
    const Ensemble b = run_ensemble(model, config, {0.5}, 64, Drift::Subsampled, 4);
    for (int rep = 0; rep < 64; ++rep) {
        EXPECT_EQ(a.snapshots[0].pairs[rep].theta[0], b.snapshots[0].pairs[rep].theta[0]);
        EXPECT_EQ(a.snapshots[0].pairs[rep].active_obs, b.snapshots[0].pairs[rep].active_obs);
    }
}

TEST(Sampler, DivergenceGuardFires) {
    // explosive drift (wrong-sign gradient) blows up under a large step
    PotentialModel model = small_gaussian(1);
    model.kind = "custom";
    model.grad_neg_log_lik = [](const VectorXd& t, const VectorXd&) { return VectorXd(-50.0 * t); };
    model.prior.gradient = [](const VectorXd& t) { return VectorXd(-50.0 * t); };
    SamplerConfig config;
    config.alpha_n = 0.0;
    config.h = 1.0;
    config.T = 400.0;
    config.sigma2 = 1.0;
    config.seed = 3;
    EXPECT_THROW(run_slmc(model, config, {400.0}), DivergenceError);
}

TEST(Sampler, GeneratorOnConstantsIsZero) {
    const PotentialModel model = small_gaussian(4);
    ObsFunction ones;
    ones.value = [](const VectorXd&, int) { return 1.0; };
    ones.grad = [](const VectorXd& t, int) { return VectorXd::Zero(t.size()); };
    ones.laplacian = [](const VectorXd&, int) { return 0.0; };
    EXPECT_EQ(apply_generator(model, 2.0, ones, vec1(0.7), 1), 0.0);
}

TEST(Sampler, GeneratorOnSquaredNorm) {
    const PotentialModel model = small_gaussian(4);
    ObsFunction sq;
    sq.value = [](const VectorXd& t, int) { return t.squaredNorm(); };
    sq.grad = [](const VectorXd& t, int) { return VectorXd(2.0 * t); };
    sq.laplacian = [](const VectorXd& t, int) { return 2.0 * static_cast<double>(t.size()); };
    const VectorXd theta = vec1(0.7);
    const int i = 2;
    const double expected = -2.0 * theta.dot(grad_potential(model, i, theta)) + 2.0;
    EXPECT_NEAR(apply_generator(model, 2.0, sq, theta, i), expected, 1e-14);
}

TEST(Sampler, GeneratorOnIndicator) {
    const PotentialModel model = small_gaussian(4);
    const int k = 3, i = 1;  // f = 1{x = X_k}, evaluated at x = X_i, k != i
    ObsFunction ind;
    ind.value = [k](const VectorXd&, int obs) { return obs == k ? 1.0 : 0.0; };
    ind.grad = [](const VectorXd& t, int) { return VectorXd::Zero(t.size()); };
    ind.laplacian = [](const VectorXd&, int) { return 0.0; };
    const double alpha = 2.0;
    EXPECT_NEAR(apply_generator(model, alpha, ind, vec1(0.0), i), alpha / 4.0, 1e-15);
}

TEST(Sampler, DiscretizationBiasShrinksWithStep) {
    // stationary second moment of the conjugate case: Euler inflates the
    // variance by about lambda h / 2; halving h must cut the inflation
    const PotentialModel model = small_gaussian(4);
    const GaussianPosterior post = gaussian_posterior(model);
    const double target = post.cov(0, 0) + post.mean[0] * post.mean[0];
    auto second_moment = [&](double h, std::uint64_t seed) {
        SamplerConfig config;
        config.alpha_n = 2.0;
        config.h = h;
        config.T = 30.0;
        config.sigma2 = 0.1;
        config.seed = seed;
        std::vector<double> record;
        for (double t = 10.0; t <= 30.0; t += 0.05) record.push_back(t);
        double m2 = 0.0;
        long count = 0;
        for (std::uint64_t rep = 0; rep < 40; ++rep) {
            Rng rng = make_stream(seed, rep);
            const Trajectory traj =
                simulate_path(model, config, record, Drift::Subsampled, rng);
            for (const auto& th : traj.thetas) {
                m2 += th.squaredNorm();
                ++count;
            }
        }
        return m2 / static_cast<double>(count);
    };
    const double coarse = second_moment(0.04, 10);
    const double fine = second_moment(0.02, 11);
    EXPECT_GT(coarse - target, 0.0);
    EXPECT_LT(fine - target, 0.8 * (coarse - target));
}

}  // namespace
