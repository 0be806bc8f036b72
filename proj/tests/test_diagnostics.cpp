#include <gtest/gtest.h>

#include <cmath>

#include "slmc/diagnostics.hpp"
#include "slmc/model.hpp"
#include "slmc/quadrature.hpp"
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

EnsembleSnapshot snapshot_from(const std::vector<double>& thetas, const std::vector<int>& obs,
                               double t = 0.0) {
    EnsembleSnapshot snap;
    snap.time = t;
    for (size_t k = 0; k < thetas.size(); ++k)
        snap.pairs.push_back({vec1(thetas[k]), obs[k]});
    return snap;
}

TEST(ConditionalL2, PointMassStartIsExactlyNMinusOne) {
    Rng rng = make_stream(1, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> thetas;
    std::vector<int> obs;
    for (int k = 0; k < 5000; ++k) {
        thetas.push_back(normal(rng));
        obs.push_back(0);  // everyone still on the first observation
    }
    const ConditionalL2Estimate est = estimate_It(snapshot_from(thetas, obs), 4, 20);
    EXPECT_DOUBLE_EQ(est.value, 3.0);
    // independent of the binning
    EXPECT_DOUBLE_EQ(estimate_It(snapshot_from(thetas, obs), 4, 5).value, 3.0);
}

TEST(ConditionalL2, IndependentUniformMatchesPlugInBias) {
    Rng rng = make_stream(2, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<double> thetas;
    std::vector<int> obs;
    const int replicas = 20000;
    for (int k = 0; k < replicas; ++k) {
        thetas.push_back(normal(rng));
        obs.push_back(pick(rng));
    }
    const ConditionalL2Estimate est = estimate_It(snapshot_from(thetas, obs), 4, 20);
    // mean of the chi-square statistic under independence is the plug-in bias
    EXPECT_NEAR(est.value, est.plug_in_bias, 4.0 * est.standard_error + est.plug_in_bias);
    EXPECT_LT(est.value, 0.05);
}

TEST(ConditionalL2, SingleObservationIsZero) {
    std::vector<double> thetas{0.1, -0.2, 0.4, 0.6};
    std::vector<int> obs{0, 0, 0, 0};
    const ConditionalL2Estimate est = estimate_It(snapshot_from(thetas, obs), 1, 2);
    EXPECT_EQ(est.value, 0.0);
    EXPECT_EQ(est.standard_error, 0.0);
}

TEST(ConditionalL2, TwoDimensionalBinning) {
    Rng rng = make_stream(31, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, 2);
    EnsembleSnapshot snap;
    for (int k = 0; k < 8000; ++k) {
        VectorXd th(2);
        th << normal(rng), normal(rng);
        snap.pairs.push_back({th, pick(rng)});
    }
    const ConditionalL2Estimate est = estimate_It(snap, 3, 16);
    EXPECT_EQ(est.bins, 16);  // 4 x 4 marginal-quantile grid
    EXPECT_LT(est.value, 0.05);
}

TEST(ConditionalL2, CountsSumToReplicas) {
    Rng rng = make_stream(4, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> thetas;
    std::vector<int> obs;
    for (int k = 0; k < 1000; ++k) {
        thetas.push_back(normal(rng));
        obs.push_back(k % 3);
    }
    const ConditionalL2Estimate est = estimate_It(snapshot_from(thetas, obs), 3, 10);
    long total = 0;
    for (long c : est.per_bin_counts) total += c;
    EXPECT_EQ(total, 1000);
}

TEST(Entropy, DirectPosteriorSamplesGiveNearZero) {
    const PotentialModel model = small_gaussian(4);
    const GaussianPosterior post = gaussian_posterior(model);
    const double z_n = normalize_posterior(model).z_n;
    Rng rng = make_stream(6, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    EnsembleSnapshot snap;
    const int replicas = 20000;
    for (int k = 0; k < replicas; ++k)
        snap.pairs.push_back(
            {post.mean + std::sqrt(post.cov(0, 0)) * vec1(normal(rng)), k % 4});
    const EntropyEstimate est = estimate_Jt(snap, model, z_n);
    // KDE bias bound from a bandwidth-halving proxy
    BandwidthRule narrower;
    narrower.scale = 1.0 / std::sqrt(2.0);
    const EntropyEstimate est2 = estimate_Jt(snap, model, z_n, narrower);
    const double bias_proxy = 2.5 * std::abs(est.value - est2.value);
    EXPECT_LE(std::abs(est.value), 3.0 * (est.standard_error + bias_proxy) + 2e-3);
}

TEST(Entropy, GaussianVsGaussianMatchesClosedForm) {
    // samples from N(0, sigma2) against the conjugate target: closed-form KL
    const PotentialModel model = small_gaussian(4);
    const GaussianPosterior post = gaussian_posterior(model);
    const double z_n = normalize_posterior(model).z_n;
    const double sigma2 = 0.05;
    Rng rng = make_stream(8, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    EnsembleSnapshot snap;
    for (int k = 0; k < 20000; ++k)
        snap.pairs.push_back({std::sqrt(sigma2) * vec1(normal(rng)), 0});
    const EntropyEstimate est = estimate_Jt(snap, model, z_n);
    const double v = post.cov(0, 0);
    const double kl = 0.5 * (sigma2 / v + post.mean[0] * post.mean[0] / v - 1.0 +
                             std::log(v / sigma2));
    BandwidthRule narrower;
    narrower.scale = 1.0 / std::sqrt(2.0);
    const double bias_proxy =
        2.5 * std::abs(est.value - estimate_Jt(snap, model, z_n, narrower).value);
    EXPECT_NEAR(est.value, kl, 3.0 * (est.standard_error + bias_proxy) + 5e-3);
}

TEST(Entropy, ShrinkingBandwidthWithMoreSamplesConverges) {
    const PotentialModel model = small_gaussian(4);
    const GaussianPosterior post = gaussian_posterior(model);
    const double z_n = normalize_posterior(model).z_n;
    const double sigma2 = 0.08;
    auto estimate_with = [&](int replicas, std::uint64_t seed) {
        Rng rng = make_stream(seed, 0);
        std::normal_distribution<double> normal(0.0, 1.0);
        EnsembleSnapshot snap;
        for (int k = 0; k < replicas; ++k)
            snap.pairs.push_back({std::sqrt(sigma2) * vec1(normal(rng)), 0});
        return estimate_Jt(snap, model, z_n).value;
    };
    const double v = post.cov(0, 0);
    const double kl = 0.5 * (sigma2 / v + post.mean[0] * post.mean[0] / v - 1.0 +
                             std::log(v / sigma2));
    const double small_err = std::abs(estimate_with(2000, 12) - kl);
    const double large_err = std::abs(estimate_with(32000, 13) - kl);
    EXPECT_LT(large_err, small_err);
}

TEST(Entropy, BandwidthUnderflowError) {
    const PotentialModel model = small_gaussian(4);
    EnsembleSnapshot snap;
    snap.pairs.push_back({vec1(-40.0), 0});
    snap.pairs.push_back({vec1(40.0), 1});
    BandwidthRule tiny;
    tiny.kind = BandwidthRule::Kind::Fixed;
    tiny.fixed_value = 1e-3;
    EXPECT_THROW(estimate_Jt(snap, model, 1.0, tiny), DegenerateInput);
}

TEST(Moments, ConstantPotentialIsExact) {
    PotentialModel model = small_gaussian(2);
    model.kind = "custom";
    model.neg_log_lik = [](const VectorXd&, const VectorXd&) { return 1.5; };
    model.prior.neg_log_density = [](const VectorXd&) { return 1.0; };
    // U == 1 + 2 * 1.5 == 4 everywhere
    EnsembleSnapshot snap;
    for (int k = 0; k < 50; ++k) snap.pairs.push_back({vec1(0.1 * k), 0});
    const auto [mean, se] = estimate_moments(snap, model, 2.0);
    EXPECT_DOUBLE_EQ(mean, 16.0);
    EXPECT_DOUBLE_EQ(se, 0.0);
}

TEST(Moments, StationaryQuadratureOracle) {
    // E[U(theta)] under the conjugate posterior, by direct sampling vs
    // Gauss-grid quadrature
    const PotentialModel model = small_gaussian(4);
    const GaussianPosterior post = gaussian_posterior(model);
    Rng rng = make_stream(14, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    EnsembleSnapshot snap;
    for (int k = 0; k < 40000; ++k)
        snap.pairs.push_back({post.mean + std::sqrt(post.cov(0, 0)) * vec1(normal(rng)), 0});
    const auto [mean, se] = estimate_moments(snap, model, 1.0);
    // quadrature of U against the posterior density
    const double sd = std::sqrt(post.cov(0, 0));
    double target = 0.0;
    const int grid = 20001;
    double weight = 0.0;
    for (int k = 0; k < grid; ++k) {
        const double x = post.mean[0] + sd * (-8.0 + 16.0 * k / (grid - 1));
        const double w = std::exp(-0.5 * (x - post.mean[0]) * (x - post.mean[0]) /
                                  post.cov(0, 0));
        target += w * eval_mean_potential(model, vec1(x));
        weight += w;
    }
    target /= weight;
    EXPECT_NEAR(mean, target, 3.0 * se);
}

TEST(Moments, StationaryTimeStability) {
    const PotentialModel model = small_gaussian(4);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 2e-3;
    config.T = 8.0;
    config.sigma2 = 0.1;
    config.seed = 99;
    const Ensemble ens = run_ensemble(model, config, {6.0, 8.0}, 2000);
    const auto [m1, se1] = estimate_moments(ens.snapshots[0], model, 1.0);
    const auto [m2, se2] = estimate_moments(ens.snapshots[1], model, 1.0);
    EXPECT_LE(std::abs(m1 - m2), 3.0 * (se1 + se2));
}

TEST(GeneratorConsistency, ConstantsAreExact) {
    const PotentialModel model = small_gaussian(4);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 1e-3;
    config.T = 1.0;
    config.sigma2 = 0.1;
    config.seed = 5;
    ObsFunction ones;
    ones.value = [](const VectorXd&, int) { return 1.0; };
    ones.grad = [](const VectorXd& t, int) { return VectorXd::Zero(t.size()); };
    ones.laplacian = [](const VectorXd&, int) { return 0.0; };
    const GeneratorCheck check = generator_consistency(model, config, ones, 0.05, 0.01, 2000);
    EXPECT_EQ(check.residual, 0.0);
}

TEST(GeneratorConsistency, IndicatorMasterEquation) {
    // f = 1{x = X_k} from a deterministic start: both sides track
    // alpha (1/n - P(X_t = k))
    const PotentialModel model = small_gaussian(4);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 1e-3;
    config.T = 1.0;
    config.sigma2 = 0.1;
    config.seed = 21;
    config.init_x_mode = InitX::Fixed;
    config.fixed_obs = 0;
    ObsFunction ind;
    ind.value = [](const VectorXd&, int obs) { return obs == 0 ? 1.0 : 0.0; };
    ind.grad = [](const VectorXd& t, int) { return VectorXd::Zero(t.size()); };
    ind.laplacian = [](const VectorXd&, int) { return 0.0; };
    const GeneratorCheck check = generator_consistency(model, config, ind, 0.01, 0.01, 50000);
    EXPECT_LE(check.residual, 0.1 * check.scale);
}

TEST(GeneratorConsistency, SquaredNormWithCommonRandomNumbers) {
    std::vector<VectorXd> obs;
    for (int i = 0; i < 4; ++i) {
        VectorXd x = VectorXd::Zero(4);
        x[i] = (i % 2 ? 0.1 : -0.1);
        obs.push_back(x);
    }
    const PotentialModel model = make_gaussian_model(obs, 4.0, 1.0);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 1e-3;
    config.T = 1.0;
    config.sigma2 = init_sigma(model.n(), model.obs_lipschitz, model.prior.lipschitz, 0.1, 0.1);
    config.seed = 23;
    ObsFunction sq;
    sq.value = [](const VectorXd& t, int) { return t.squaredNorm(); };
    sq.grad = [](const VectorXd& t, int) { return VectorXd(2.0 * t); };
    sq.laplacian = [](const VectorXd& t, int) { return 2.0 * static_cast<double>(t.size()); };
    const GeneratorCheck check = generator_consistency(model, config, sq, 0.01, 0.01, 50000);
    EXPECT_LE(check.residual, 0.1 * check.scale);
}

TEST(GeneratorConsistency, RequiresResolvedTimeStep) {
    const PotentialModel model = small_gaussian(4);
    SamplerConfig config;
    config.alpha_n = 2.0;
    config.h = 5e-3;
    config.T = 1.0;
    ObsFunction ones;
    ones.value = [](const VectorXd&, int) { return 1.0; };
    ones.grad = [](const VectorXd& t, int) { return VectorXd::Zero(t.size()); };
    ones.laplacian = [](const VectorXd&, int) { return 0.0; };
    EXPECT_THROW(generator_consistency(model, config, ones, 0.1, 0.01, 100), ValidationError);
}

}  // namespace
