#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "slmc/diagnostics.hpp"
#include "slmc/io.hpp"
#include "slmc/klcheck.hpp"
#include "slmc/model.hpp"
#include "slmc/quadrature.hpp"
#include "slmc/sampler.hpp"
#include "slmc/theory.hpp"

namespace slmc {

inline constexpr const char* kCodeVersion = "slmc-0.1.0";
inline constexpr int kConfigVersion = 1;

using nlohmann::json;

// Unknown keys in a config are errors, not warnings.
inline void expect_keys(const json& j, const std::vector<std::string>& allowed,
                        const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ValidationError("unknown key \"" + it.key() + "\" in " + context);
    }
}

struct ModelConfig {
    std::string kind = "gaussian";
    std::vector<VectorXd> observations;  // explicit, or generated below
    struct Generate {
        int count = 0;
        int dimension = 1;
        std::uint64_t seed = 0;
        double scale = 1.0;
    };
    std::optional<Generate> generate;
    double obs_variance = 1.0;
    double power_p = 0.75;
    double prior_variance = 1.0;
};

struct DiagnosticsConfig {
    bool conditional_l2 = false;
    int bins = 20;
    bool entropy = false;
    bool moments = false;
    double moment_alpha = 1.0;
    std::uint64_t bootstrap_seed = 7;
};

struct VerifyConfig {
    int grid_points = 1000;
    double tol = 1e-8;
    std::uint64_t grid_seed = 1;
    double kappa1 = 10.0;
    double kappa2 = 10.0;
};

struct ExperimentConfig {
    int version = kConfigVersion;
    ModelConfig model;
    SamplerConfig sampler;
    bool alpha_is_default = false;   // alpha_n = "default" in the file
    bool sigma2_is_auto = false;     // sigma2 = "auto" in the file
    double c1 = 0.5, c2 = 0.5;       // initial-variance interval when auto
    int replicas = 100;
    std::vector<double> record_times;
    DiagnosticsConfig diagnostics;
    TheoryInputs theory;
    double eps = 0.1;
    VerifyConfig verify;
    std::string output_dir = "out";
    bool theory_c_explicit = false;
    bool theory_l_explicit = false;
    bool theory_r_explicit = false;
};

inline std::vector<VectorXd> generate_observations(const ModelConfig::Generate& g) {
    Rng rng = make_stream(g.seed, 0);
    std::vector<VectorXd> points;
    points.reserve(static_cast<size_t>(g.count));
    for (int i = 0; i < g.count; ++i) points.push_back(g.scale * standard_normal(g.dimension, rng));
    return points;
}

inline PotentialModel build_model(const ModelConfig& mc) {
    std::vector<VectorXd> points =
        mc.generate ? generate_observations(*mc.generate) : mc.observations;
    if (points.empty()) throw ValidationError("model: no observations given or generated");
    if (mc.kind == "gaussian") return make_gaussian_model(points, mc.obs_variance, mc.prior_variance);
    if (mc.kind == "power") return make_power_model(points, mc.power_p, mc.prior_variance);
    throw ValidationError("model: unknown kind \"" + mc.kind + "\"");
}

// Fills n, d and the weak-convexity constants the built-in models satisfy,
// unless the config pinned them explicitly.
inline void complete_theory_inputs(TheoryInputs& t, const PotentialModel& model, bool c_set,
                                   bool l_set, bool r_set) {
    t.n = model.n();
    t.d = model.dim;
    t.prior_lipschitz = model.prior.lipschitz;
    if (model.kind == "gaussian") {
        if (!r_set) t.r = 0.0;
        if (!c_set) t.c = 1.0 / model.obs_variance;
        if (!l_set) t.L = model.obs_lipschitz;
    } else if (model.kind == "power") {
        const double p = model.power_p;
        if (!r_set) t.r = (1.0 - p) / p;
        if (!c_set) t.c = 2.0 * p * (2.0 * p - 1.0);
        if (!l_set) t.L = model.obs_lipschitz;
    }
}

// ---------------------------------------------------------------------------
// JSON parsing (strict)
// ---------------------------------------------------------------------------

inline ModelConfig parse_model_config(const json& j) {
    expect_keys(j, {"kind", "observations", "generate", "obs_variance", "power_p",
                    "prior_variance"},
                "model");
    ModelConfig mc;
    mc.kind = j.at("kind").get<std::string>();
    if (j.contains("observations") == j.contains("generate"))
        throw ValidationError("model: give exactly one of observations/generate");
    if (j.contains("observations")) {
        for (const auto& row : j.at("observations")) {
            VectorXd v(row.size());
            for (size_t k = 0; k < row.size(); ++k) v[static_cast<int>(k)] = row[k].get<double>();
            mc.observations.push_back(v);
        }
    } else {
        const json& g = j.at("generate");
        expect_keys(g, {"count", "dimension", "seed", "scale"}, "model.generate");
        ModelConfig::Generate gen;
        gen.count = g.at("count").get<int>();
        gen.dimension = g.at("dimension").get<int>();
        gen.seed = g.value("seed", 0ULL);
        gen.scale = g.value("scale", 1.0);
        mc.generate = gen;
    }
    mc.obs_variance = j.value("obs_variance", 1.0);
    mc.power_p = j.value("power_p", 0.75);
    mc.prior_variance = j.value("prior_variance", 1.0);
    return mc;
}

inline ExperimentConfig parse_experiment_config(const json& j) {
    expect_keys(j,
                {"version", "model", "sampler", "replicas", "record_times", "diagnostics",
                 "theory", "verify", "output_dir"},
                "config");
    ExperimentConfig cfg;
    cfg.version = j.at("version").get<int>();
    if (cfg.version != kConfigVersion)
        throw ValidationError("config: unsupported version " + std::to_string(cfg.version));
    cfg.model = parse_model_config(j.at("model"));

    const json& s = j.at("sampler");
    expect_keys(s, {"alpha_n", "h", "T", "sigma2", "c1", "c2", "seed", "init_x_mode",
                    "zero_noise"},
                "sampler");
    if (s.at("alpha_n").is_string()) {
        if (s.at("alpha_n").get<std::string>() != "default")
            throw ValidationError("sampler.alpha_n: number or \"default\"");
        cfg.alpha_is_default = true;
    } else {
        cfg.sampler.alpha_n = s.at("alpha_n").get<double>();
    }
    cfg.sampler.h = s.at("h").get<double>();
    cfg.sampler.T = s.at("T").get<double>();
    if (s.contains("sigma2") && s.at("sigma2").is_string()) {
        if (s.at("sigma2").get<std::string>() != "auto")
            throw ValidationError("sampler.sigma2: number or \"auto\"");
        cfg.sigma2_is_auto = true;
    } else if (s.contains("sigma2")) {
        cfg.sampler.sigma2 = s.at("sigma2").get<double>();
    } else {
        cfg.sigma2_is_auto = true;
    }
    cfg.c1 = s.value("c1", 0.5);
    cfg.c2 = s.value("c2", 0.5);
    cfg.sampler.seed = s.value("seed", 0ULL);
    if (s.contains("init_x_mode")) {
        if (s.at("init_x_mode").is_string()) {
            if (s.at("init_x_mode").get<std::string>() != "uniform")
                throw ValidationError("sampler.init_x_mode: \"uniform\" or an index");
            cfg.sampler.init_x_mode = InitX::Uniform;
        } else {
            cfg.sampler.init_x_mode = InitX::Fixed;
            cfg.sampler.fixed_obs = s.at("init_x_mode").get<int>();
        }
    }
    cfg.sampler.zero_noise = s.value("zero_noise", false);

    cfg.replicas = j.value("replicas", 100);
    if (j.contains("record_times"))
        for (const auto& t : j.at("record_times")) cfg.record_times.push_back(t.get<double>());

    if (j.contains("diagnostics")) {
        const json& dg = j.at("diagnostics");
        expect_keys(dg, {"conditional_l2", "bins", "entropy", "moments", "moment_alpha",
                         "bootstrap_seed"},
                    "diagnostics");
        cfg.diagnostics.conditional_l2 = dg.value("conditional_l2", false);
        cfg.diagnostics.bins = dg.value("bins", 20);
        cfg.diagnostics.entropy = dg.value("entropy", false);
        cfg.diagnostics.moments = dg.value("moments", false);
        cfg.diagnostics.moment_alpha = dg.value("moment_alpha", 1.0);
        cfg.diagnostics.bootstrap_seed = dg.value("bootstrap_seed", 7ULL);
    }

    bool c_set = false, l_set = false, r_set = false;
    if (j.contains("theory")) {
        const json& t = j.at("theory");
        expect_keys(t, {"r", "beta", "c", "L", "prior_lipschitz", "eps", "poincare_override",
                        "constants", "alpha_exp"},
                    "theory");
        if (t.contains("r")) {
            cfg.theory.r = t.at("r").get<double>();
            r_set = true;
        }
        cfg.theory.beta = t.value("beta", 1.0);
        if (t.contains("c")) {
            cfg.theory.c = t.at("c").get<double>();
            c_set = true;
        }
        if (t.contains("L")) {
            cfg.theory.L = t.at("L").get<double>();
            l_set = true;
        }
        if (t.contains("prior_lipschitz"))
            cfg.theory.prior_lipschitz = t.at("prior_lipschitz").get<double>();
        cfg.eps = t.value("eps", 0.1);
        if (t.contains("poincare_override"))
            cfg.theory.poincare_override = t.at("poincare_override").get<double>();
        if (t.contains("constants")) {
            const json& c = t.at("constants");
            expect_keys(c, {"kappa", "a", "C1", "C2", "C3", "C"}, "theory.constants");
            cfg.theory.constants.kappa = c.value("kappa", 1.0);
            cfg.theory.constants.a = c.value("a", 32.0);
            cfg.theory.constants.C1 = c.value("C1", 1.0);
            cfg.theory.constants.C2 = c.value("C2", 1.0);
            cfg.theory.constants.C3 = c.value("C3", 1.0);
            cfg.theory.constants.C = c.value("C", 1.0);
        }
    }
    if (j.contains("verify")) {
        const json& v = j.at("verify");
        expect_keys(v, {"grid_points", "tol", "grid_seed", "kappa1", "kappa2"}, "verify");
        cfg.verify.grid_points = v.value("grid_points", 1000);
        cfg.verify.tol = v.value("tol", 1e-8);
        cfg.verify.grid_seed = v.value("grid_seed", 1ULL);
        cfg.verify.kappa1 = v.value("kappa1", 10.0);
        cfg.verify.kappa2 = v.value("kappa2", 10.0);
    }
    cfg.output_dir = j.value("output_dir", std::string("out"));

    // Stash which theory fields were explicit, for completion after the model
    // is built.
    cfg.theory_c_explicit = c_set;
    cfg.theory_l_explicit = l_set;
    cfg.theory_r_explicit = r_set;
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    json j;
    in >> j;
    return parse_experiment_config(j);
}

// ---------------------------------------------------------------------------
// Canonical serialization (the hash input and the manifest echo)
// ---------------------------------------------------------------------------

inline json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["version"] = cfg.version;
    json m;
    m["kind"] = cfg.model.kind;
    if (cfg.model.generate) {
        m["generate"] = {{"count", cfg.model.generate->count},
                         {"dimension", cfg.model.generate->dimension},
                         {"seed", cfg.model.generate->seed},
                         {"scale", cfg.model.generate->scale}};
    } else {
        json rows = json::array();
        for (const auto& p : cfg.model.observations) {
            json row = json::array();
            for (int k = 0; k < p.size(); ++k) row.push_back(p[k]);
            rows.push_back(row);
        }
        m["observations"] = rows;
    }
    m["obs_variance"] = cfg.model.obs_variance;
    m["power_p"] = cfg.model.power_p;
    m["prior_variance"] = cfg.model.prior_variance;
    j["model"] = m;

    json s;
    s["alpha_n"] = cfg.sampler.alpha_n;
    s["alpha_is_default"] = cfg.alpha_is_default;
    s["h"] = cfg.sampler.h;
    s["T"] = cfg.sampler.T;
    s["sigma2"] = cfg.sampler.sigma2;
    s["sigma2_is_auto"] = cfg.sigma2_is_auto;
    s["c1"] = cfg.c1;
    s["c2"] = cfg.c2;
    s["seed"] = cfg.sampler.seed;
    s["init_x_mode"] = cfg.sampler.init_x_mode == InitX::Uniform
                           ? json("uniform")
                           : json(cfg.sampler.fixed_obs);
    s["zero_noise"] = cfg.sampler.zero_noise;
    j["sampler"] = s;

    j["replicas"] = cfg.replicas;
    j["record_times"] = cfg.record_times;
    j["diagnostics"] = {{"conditional_l2", cfg.diagnostics.conditional_l2},
                        {"bins", cfg.diagnostics.bins},
                        {"entropy", cfg.diagnostics.entropy},
                        {"moments", cfg.diagnostics.moments},
                        {"moment_alpha", cfg.diagnostics.moment_alpha},
                        {"bootstrap_seed", cfg.diagnostics.bootstrap_seed}};
    j["theory"] = {{"r", cfg.theory.r},
                   {"beta", cfg.theory.beta},
                   {"c", cfg.theory.c},
                   {"L", cfg.theory.L},
                   {"prior_lipschitz", cfg.theory.prior_lipschitz},
                   {"eps", cfg.eps},
                   {"constants",
                    {{"kappa", cfg.theory.constants.kappa},
                     {"a", cfg.theory.constants.a},
                     {"C1", cfg.theory.constants.C1},
                     {"C2", cfg.theory.constants.C2},
                     {"C3", cfg.theory.constants.C3},
                     {"C", cfg.theory.constants.C}}}};
    if (cfg.theory.poincare_override) j["theory"]["poincare_override"] = *cfg.theory.poincare_override;
    // output_dir intentionally omitted: the hash identifies the experiment,
    // not where its files land
    return j;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    return hex64(fnv1a(config_to_json(cfg).dump()));
}

inline json report_to_json(const CheckReport& rep) {
    json j;
    j["passed"] = rep.passed;
    j["worst_margin"] = rep.worst_margin;
    json point = json::array();
    for (int k = 0; k < rep.worst_point.size(); ++k) point.push_back(rep.worst_point[k]);
    j["worst_point"] = point;
    j["points_checked"] = rep.points_checked;
    return j;
}

inline json theory_report_to_json(const TheoryReport& rep) {
    json j;
    j["alpha_n"] = rep.alpha_n;
    j["poincare_floor"] = rep.poincare_floor;
    j["c_nd"] = rep.c_nd;
    j["osc_log"] = rep.osc_log;
    j["j0_bound"] = rep.j0;
    j["t_eps"] = rep.t_eps;
    j["eps"] = rep.eps;
    j["inputs"] = {{"n", rep.inputs.n},
                   {"d", rep.inputs.d},
                   {"r", rep.inputs.r},
                   {"beta", rep.inputs.beta},
                   {"c", rep.inputs.c},
                   {"L", rep.inputs.L},
                   {"prior_lipschitz", rep.inputs.prior_lipschitz}};
    return j;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

// Resolves "default"/"auto" placeholders against the built model.
inline void resolve_run_parameters(ExperimentConfig& cfg, const PotentialModel& model) {
    complete_theory_inputs(cfg.theory, model, cfg.theory_c_explicit, cfg.theory_l_explicit,
                           cfg.theory_r_explicit);
    if (cfg.alpha_is_default)
        cfg.sampler.alpha_n = default_alpha(model.n(), model.dim, cfg.theory.r);
    if (cfg.sigma2_is_auto)
        cfg.sampler.sigma2 =
            init_sigma(model.n(), cfg.theory.L, model.prior.lipschitz, cfg.c1, cfg.c2);
}

inline void validate_experiment(const ExperimentConfig& cfg, const PotentialModel& model) {
    std::vector<std::string> violations;
    for (double t : cfg.record_times)
        if (t < 0.0 || t > cfg.sampler.T + 1e-12) {
            violations.push_back("record_times: entry " + fmt_double(t) +
                                 " outside [0, T=" + fmt_double(cfg.sampler.T) + "]");
            break;
        }
    const bool any_estimator = cfg.diagnostics.conditional_l2 || cfg.diagnostics.entropy ||
                               cfg.diagnostics.moments;
    if (any_estimator && cfg.replicas < 100)
        violations.push_back("replicas: need >= 100 when any estimator is selected");
    if (cfg.diagnostics.conditional_l2 && model.dim > 2)
        violations.push_back("diagnostics.conditional_l2: requires model dimension <= 2");
    if (cfg.diagnostics.entropy && model.dim > 3)
        violations.push_back("diagnostics.entropy: requires model dimension <= 3");
    try {
        cfg.sampler.validate(model.n());
    } catch (const ValidationError& e) {
        violations.push_back(e.what());
    }
    if (!violations.empty()) {
        std::string msg = "experiment config invalid:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ValidationError(msg);
    }
}

struct ExperimentOutputs {
    std::filesystem::path ensemble_csv;
    std::filesystem::path diagnostics_csv;
    std::filesystem::path theory_json;
    std::filesystem::path manifest_json;
};

inline std::string ensemble_to_csv(const Ensemble& ens, const std::string& hash, int dim) {
    std::ostringstream os;
    os << "# config_hash=" << hash << " code_version=" << kCodeVersion << "\n";
    os << "replica,time";
    for (int k = 0; k < dim; ++k) os << ",theta_" << k;
    os << ",active_obs\n";
    for (const auto& snap : ens.snapshots) {
        for (int rep = 0; rep < ens.replicas; ++rep) {
            const auto& draw = snap.pairs[static_cast<size_t>(rep)];
            os << rep << "," << fmt_double(snap.time);
            for (int k = 0; k < dim; ++k) os << "," << fmt_double(draw.theta[k]);
            os << "," << draw.active_obs << "\n";
        }
    }
    return os.str();
}

struct DiagnosticsRow {
    double t = 0.0;
    std::optional<ConditionalL2Estimate> it;
    double i_bound = 0.0;
    std::optional<EntropyEstimate> jt;
    std::optional<std::pair<double, double>> moment;
    double envelope = std::numeric_limits<double>::quiet_NaN();
};

inline std::string diagnostics_to_csv(const std::vector<DiagnosticsRow>& rows,
                                      const std::string& hash) {
    std::ostringstream os;
    os << "# config_hash=" << hash << " code_version=" << kCodeVersion << "\n";
    os << "t,I_hat,I_se,I_bound,J_hat,J_se,moment_hat,moment_se,J_envelope\n";
    for (const auto& row : rows) {
        os << fmt_double(row.t) << ",";
        if (row.it) os << fmt_double(row.it->value) << "," << fmt_double(row.it->standard_error);
        else os << ",";
        os << "," << fmt_double(row.i_bound) << ",";
        if (row.jt) os << fmt_double(row.jt->value) << "," << fmt_double(row.jt->standard_error);
        else os << ",";
        os << ",";
        if (row.moment) os << fmt_double(row.moment->first) << "," << fmt_double(row.moment->second);
        else os << ",";
        os << "," << fmt_double(row.envelope) << "\n";
    }
    return os.str();
}

// Runs the ensemble, evaluates the selected estimators per recorded time, and
// persists ensemble CSV, diagnostics CSV, theory report, and manifest. Reruns
// with the same config are byte-identical; no partial outputs survive failure.
inline ExperimentOutputs run_experiment(ExperimentConfig cfg, int workers = 1,
                                        std::optional<int> workers_env = std::nullopt) {
    PotentialModel model = build_model(cfg.model);
    resolve_run_parameters(cfg, model);
    validate_experiment(cfg, model);

    const std::string hash = config_hash(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    ExperimentOutputs paths;
    paths.ensemble_csv = std::filesystem::path(cfg.output_dir) / "ensemble.csv";
    paths.diagnostics_csv = std::filesystem::path(cfg.output_dir) / "diagnostics.csv";
    paths.theory_json = std::filesystem::path(cfg.output_dir) / "theory.json";
    paths.manifest_json = std::filesystem::path(cfg.output_dir) / "manifest.json";

    OutputGuard guard;
    guard.track(paths.ensemble_csv);
    guard.track(paths.diagnostics_csv);
    guard.track(paths.theory_json);
    guard.track(paths.manifest_json);

    long gradient_evals = 0;
    const Ensemble ens = run_ensemble(model, cfg.sampler, cfg.record_times, cfg.replicas,
                                      Drift::Subsampled, workers, nullptr, &gradient_evals);
    write_text_file(paths.ensemble_csv, ensemble_to_csv(ens, hash, model.dim));

    std::optional<double> z_n;
    if (cfg.diagnostics.entropy) z_n = normalize_posterior(model).z_n;

    const double j0 = j0_bound(cfg.theory);
    std::vector<DiagnosticsRow> rows;
    for (const auto& snap : ens.snapshots) {
        DiagnosticsRow row;
        row.t = snap.time;
        row.i_bound = (model.n() - 1) * std::exp(-2.0 * cfg.sampler.alpha_n * snap.time);
        if (cfg.diagnostics.conditional_l2)
            row.it = estimate_It(snap, model.n(), cfg.diagnostics.bins,
                                 cfg.diagnostics.bootstrap_seed);
        if (cfg.diagnostics.entropy) row.jt = estimate_Jt(snap, model, *z_n);
        if (cfg.diagnostics.moments)
            row.moment = estimate_moments(snap, model, cfg.diagnostics.moment_alpha);
        row.envelope = entropy_envelope(snap.time, j0, cfg.theory, cfg.sampler.alpha_n);
        rows.push_back(std::move(row));
    }
    write_text_file(paths.diagnostics_csv, diagnostics_to_csv(rows, hash));

    const TheoryReport theory = make_theory_report(cfg.theory, cfg.eps);
    write_text_file(paths.theory_json, theory_report_to_json(theory).dump(2) + "\n");

    json manifest;
    manifest["config_hash"] = hash;
    manifest["code_version"] = kCodeVersion;
    manifest["seed"] = cfg.sampler.seed;
    manifest["workers"] = workers;
    manifest["workers_env_override"] = workers_env ? json(*workers_env) : json(nullptr);
    manifest["gradient_evals"] = gradient_evals;
    manifest["outputs"] = {paths.ensemble_csv.filename().string(),
                           paths.diagnostics_csv.filename().string(),
                           paths.theory_json.filename().string()};
    manifest["config"] = config_to_json(cfg);
    write_text_file(paths.manifest_json, manifest.dump(2) + "\n");

    guard.release();
    return paths;
}

// ---------------------------------------------------------------------------
// Sampler comparison
// ---------------------------------------------------------------------------

struct BenchReport {
    long gradient_evals_slmc = 0;
    long gradient_evals_lmc = 0;
    double wall_slmc_s = 0.0;
    double wall_lmc_s = 0.0;
    double eval_ratio = 0.0;
    double quality_slmc = 0.0;  // terminal moment error (lower is better)
    double quality_lmc = 0.0;
    bool slmc_diverged = false;
    bool lmc_diverged = false;
};

namespace detail {

inline std::pair<VectorXd, VectorXd> snapshot_moments(const EnsembleSnapshot& snap, int dim) {
    VectorXd mean = VectorXd::Zero(dim);
    VectorXd second = VectorXd::Zero(dim);
    for (const auto& p : snap.pairs) {
        mean += p.theta;
        second += p.theta.cwiseProduct(p.theta);
    }
    mean /= static_cast<double>(snap.pairs.size());
    second /= static_cast<double>(snap.pairs.size());
    return {mean, second};
}

// First/second-moment error against a reference (mean, second moment).
inline double moment_error(const EnsembleSnapshot& snap, int dim, const VectorXd& ref_mean,
                           const VectorXd& ref_second) {
    const auto [mean, second] = snapshot_moments(snap, dim);
    return (mean - ref_mean).norm() + (second - ref_second).norm();
}

}  // namespace detail

// Matched-seed cost/quality comparison of the subsampled sampler against the
// full-gradient baseline on the same config. Divergences are reported
// per-sampler without aborting the other.
inline BenchReport compare_samplers(const ExperimentConfig& cfg_in, int workers = 1) {
    ExperimentConfig cfg = cfg_in;
    PotentialModel model = build_model(cfg.model);
    resolve_run_parameters(cfg, model);
    validate_experiment(cfg, model);
    const std::vector<double> terminal{cfg.sampler.T};

    VectorXd ref_mean, ref_second;
    if (model.kind == "gaussian") {
        const GaussianPosterior post = gaussian_posterior(model);
        ref_mean = post.mean;
        ref_second = post.cov.diagonal() + post.mean.cwiseProduct(post.mean);
    } else {
        // Long-run reference ensemble at 10x the horizon budget.
        SamplerConfig ref_cfg = cfg.sampler;
        ref_cfg.T = cfg.sampler.T * 10.0;
        ref_cfg.seed = cfg.sampler.seed + 101;
        const Ensemble ref = run_ensemble(model, ref_cfg, {ref_cfg.T}, cfg.replicas,
                                          Drift::Subsampled, workers);
        std::tie(ref_mean, ref_second) = detail::snapshot_moments(ref.snapshots[0], model.dim);
    }

    BenchReport report;
    const auto run_one = [&](Drift mode, long& evals, double& wall, double& quality,
                             bool& diverged) {
        const auto start = std::chrono::steady_clock::now();
        try {
            Ensemble ens = run_ensemble(model, cfg.sampler, terminal, cfg.replicas, mode,
                                        workers, nullptr, &evals);
            quality = detail::moment_error(ens.snapshots[0], model.dim, ref_mean, ref_second);
        } catch (const DivergenceError&) {
            diverged = true;
            quality = std::numeric_limits<double>::infinity();
        }
        wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    run_one(Drift::Subsampled, report.gradient_evals_slmc, report.wall_slmc_s,
            report.quality_slmc, report.slmc_diverged);
    run_one(Drift::FullGradient, report.gradient_evals_lmc, report.wall_lmc_s,
            report.quality_lmc, report.lmc_diverged);
    if (report.gradient_evals_slmc > 0)
        report.eval_ratio = static_cast<double>(report.gradient_evals_lmc) /
                            static_cast<double>(report.gradient_evals_slmc);
    return report;
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

struct VerificationBundle {
    CheckReport hkl;              // worst case over per-observation likelihoods
    CheckReport growth;           // worst case over per-observation likelihoods
    CheckReport posterior_hkl;    // averaged potential against composed constants
    HminReport hmin;
    KlParams declared;
    KlParams composed;
    bool passed = false;
};

// Runs the full hypothesis suite for a model with declared constants (c, r):
// curvature floor and growth bounds on each per-observation likelihood, the
// composed floor on the averaged potential, and the minimizer-location check.
inline VerificationBundle run_verification_suite(const PotentialModel& model,
                                                 const KlParams& declared,
                                                 const VerifyConfig& options) {
    VerificationBundle bundle;
    bundle.declared = declared;
    const std::vector<VectorXd> grid =
        make_check_grid(model.dim, options.grid_points, 1.0, options.grid_seed);

    auto merge = [](CheckReport& into, const CheckReport& from) {
        if (into.points_checked == 0 || from.worst_margin < into.worst_margin) {
            into.worst_margin = from.worst_margin;
            into.worst_point = from.worst_point;
        }
        into.points_checked += from.points_checked;
        into.passed = into.points_checked > 0;  // recomputed below
    };

    try {
        for (int i = 0; i < model.n(); ++i) {
            const ScalarField v = likelihood_field(model, i);
            merge(bundle.hkl, check_hkl(v, declared, grid, options.tol));
            const MinimizerResult min_i = find_minimizer(v, model.observations[i], 1e-10);
            merge(bundle.growth, check_growth_bounds(v, declared, min_i, grid, options.tol));
        }
    } catch (const std::exception& e) {
        throw HypothesisViolation(std::string("verification halted in per-observation checks: ") +
                                  e.what());
    }
    bundle.hkl.passed = bundle.hkl.worst_margin >= -options.tol;
    bundle.growth.passed = bundle.growth.worst_margin >= -options.tol;

    try {
        bundle.composed = compose_posterior_kl(declared, model.n());
        bundle.posterior_hkl =
            check_hkl(mean_potential(model), bundle.composed, grid, options.tol);
    } catch (const std::exception& e) {
        throw HypothesisViolation(std::string("verification halted in the posterior check: ") +
                                  e.what());
    }

    try {
        HminOptions hmin_opts;
        hmin_opts.kappa1 = options.kappa1;
        hmin_opts.kappa2 = options.kappa2;
        hmin_opts.beta = declared.beta;
        bundle.hmin = check_hmin(model, hmin_opts);
    } catch (const std::exception& e) {
        throw HypothesisViolation(std::string("verification halted in the minimizer check: ") +
                                  e.what());
    }

    bundle.passed = bundle.hkl.passed && bundle.growth.passed && bundle.posterior_hkl.passed &&
                    bundle.hmin.report.passed;
    return bundle;
}

// Reads an ensemble CSV written by run_experiment back into snapshots.
inline Ensemble read_ensemble_csv(const std::string& path, int& dim) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open ensemble file " + path);
    std::string line;
    std::getline(in, line);  // hash comment
    std::getline(in, line);  // header
    dim = 0;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind("theta_", 0) == 0) ++dim;
        }
    }
    if (dim == 0) throw ValidationError("ensemble file has no theta columns");

    std::map<double, std::vector<ReplicaDraw>> by_time;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // replica index (rows arrive ordered)
        std::getline(ls, cell, ',');
        const double t = std::stod(cell);
        ReplicaDraw draw;
        draw.theta = VectorXd(dim);
        for (int k = 0; k < dim; ++k) {
            std::getline(ls, cell, ',');
            draw.theta[k] = std::stod(cell);
        }
        std::getline(ls, cell, ',');
        draw.active_obs = std::stoi(cell);
        by_time[t].push_back(std::move(draw));
    }
    Ensemble ens;
    for (auto& [t, pairs] : by_time) {
        EnsembleSnapshot snap;
        snap.time = t;
        snap.pairs = std::move(pairs);
        ens.snapshots.push_back(std::move(snap));
    }
    if (ens.snapshots.empty()) throw ValidationError("ensemble file has no rows");
    ens.replicas = static_cast<int>(ens.snapshots.front().pairs.size());
    return ens;
}

inline json verification_to_json(const VerificationBundle& b) {
    json j;
    j["passed"] = b.passed;
    j["hkl"] = report_to_json(b.hkl);
    j["growth"] = report_to_json(b.growth);
    j["posterior_hkl"] = report_to_json(b.posterior_hkl);
    j["hmin"] = report_to_json(b.hmin.report);
    j["hmin"]["max_argmin_norm"] = b.hmin.max_argmin_norm;
    j["hmin"]["max_min_value"] = b.hmin.max_min_value;
    j["hmin"]["norm_threshold"] = b.hmin.norm_threshold;
    j["hmin"]["value_threshold"] = b.hmin.value_threshold;
    j["declared"] = {{"c", b.declared.c}, {"r", b.declared.r}, {"L", b.declared.lipschitz}};
    j["composed"] = {{"c", b.composed.c}, {"r", b.composed.r}, {"L", b.composed.lipschitz}};
    return j;
}

}  // namespace slmc
