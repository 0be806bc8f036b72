// Experiment CLI: sample / verify / theory / diagnose / bench.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "slmc/harness.hpp"

namespace {

using namespace slmc;

int resolve_workers(int cli_workers, std::optional<int>& env_override) {
    if (const char* env = std::getenv("SLMC_WORKERS")) {
        env_override = std::atoi(env);
        if (*env_override >= 1) return *env_override;
        env_override.reset();
    }
    return cli_workers;
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                             const std::string& out_dir) {
    ExperimentConfig cfg = load_experiment_config(path);
    if (seed) cfg.sampler.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    return cfg;
}

int cmd_sample(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& out_dir, int workers) {
    std::optional<int> env_override;
    workers = resolve_workers(workers, env_override);
    const ExperimentConfig cfg = load_config(config_path, seed, out_dir);
    const ExperimentOutputs outputs = run_experiment(cfg, workers, env_override);
    std::cout << "wrote " << outputs.ensemble_csv.string() << "\n"
              << "wrote " << outputs.diagnostics_csv.string() << "\n"
              << "wrote " << outputs.theory_json.string() << "\n"
              << "wrote " << outputs.manifest_json.string() << "\n";
    return 0;
}

int cmd_verify(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig cfg = load_config(config_path, std::nullopt, out_dir);
    PotentialModel model = build_model(cfg.model);
    resolve_run_parameters(cfg, model);
    KlParams declared;
    declared.c = cfg.theory.c;
    declared.r = cfg.theory.r;
    declared.lipschitz = cfg.theory.L;
    declared.prior_lipschitz = model.prior.lipschitz;
    declared.beta = cfg.theory.beta;
    const VerificationBundle bundle = run_verification_suite(model, declared, cfg.verify);
    const json report = verification_to_json(bundle);
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "verification.json";
    write_text_file(path, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return bundle.passed ? 0 : 1;
}

int cmd_theory(const std::string& config_path) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    PotentialModel model = build_model(cfg.model);
    resolve_run_parameters(cfg, model);
    const TheoryReport rep = make_theory_report(cfg.theory, cfg.eps);
    std::cout << "n=" << rep.inputs.n << " d=" << rep.inputs.d << " r=" << rep.inputs.r
              << " beta=" << rep.inputs.beta << "\n";
    std::cout << "alpha_n          " << fmt_double(rep.alpha_n) << "\n";
    std::cout << "poincare_floor   " << fmt_double(rep.poincare_floor) << "\n";
    std::cout << "c_nd             " << fmt_double(rep.c_nd) << "\n";
    std::cout << "osc_log          " << fmt_double(rep.osc_log) << "\n";
    std::cout << "j0_bound         " << fmt_double(rep.j0) << "\n";
    std::cout << "t_eps(" << fmt_double(rep.eps) << ")  " << fmt_double(rep.t_eps) << "\n";
    return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& ensemble_path,
                 const std::string& out_dir) {
    ExperimentConfig cfg = load_config(config_path, std::nullopt, out_dir);
    PotentialModel model = build_model(cfg.model);
    resolve_run_parameters(cfg, model);
    int dim = 0;
    const Ensemble ens = read_ensemble_csv(ensemble_path, dim);
    if (dim != model.dim)
        throw ValidationError("ensemble dimension does not match the configured model");

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
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "diagnostics.csv";
    write_text_file(path, diagnostics_to_csv(rows, config_hash(cfg)));
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir, int workers) {
    std::optional<int> env_override;
    workers = resolve_workers(workers, env_override);
    const ExperimentConfig cfg = load_config(config_path, seed, out_dir);
    const BenchReport rep = compare_samplers(cfg, workers);
    json j;
    j["gradient_evals_slmc"] = rep.gradient_evals_slmc;
    j["gradient_evals_lmc"] = rep.gradient_evals_lmc;
    j["eval_ratio"] = rep.eval_ratio;
    j["wall_slmc_s"] = rep.wall_slmc_s;
    j["wall_lmc_s"] = rep.wall_lmc_s;
    j["quality_slmc"] = rep.quality_slmc;
    j["quality_lmc"] = rep.quality_lmc;
    j["slmc_diverged"] = rep.slmc_diverged;
    j["lmc_diverged"] = rep.lmc_diverged;
    std::cout << j.dump(2) << "\n";
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        write_text_file(std::filesystem::path(cfg.output_dir) / "bench.json", j.dump(2) + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subsampled Langevin sampling toolkit"};
    app.require_subcommand(1);

    std::string config_path, ensemble_path, out_dir;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::uint64_t seed_raw = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
        if (needs_config) opt->required();
        sub->add_option("--seed", seed_raw, "override the config seed")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--workers", workers, "worker threads for replica fan-out");
        sub->add_option("--out", out_dir, "override the output directory");
    };

    auto* sample = app.add_subcommand("sample", "run the subsampled sampler and diagnostics");
    add_common(sample);
    auto* verify = app.add_subcommand("verify", "run the hypothesis verification suite");
    add_common(verify);
    auto* theory = app.add_subcommand("theory", "print the bound table");
    add_common(theory);
    auto* diagnose = app.add_subcommand("diagnose", "run estimators on a stored ensemble");
    add_common(diagnose);
    diagnose->add_option("--ensemble", ensemble_path, "stored ensemble CSV")->required();
    auto* bench = app.add_subcommand("bench", "compare subsampled vs full-gradient cost");
    add_common(bench);

    CLI11_PARSE(app, argc, argv);
    if (seed_given) seed = seed_raw;

    try {
        if (sample->parsed()) return cmd_sample(config_path, seed, out_dir, workers);
        if (verify->parsed()) return cmd_verify(config_path, out_dir);
        if (theory->parsed()) return cmd_theory(config_path);
        if (diagnose->parsed()) return cmd_diagnose(config_path, ensemble_path, out_dir);
        if (bench->parsed()) return cmd_bench(config_path, seed, out_dir, workers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
