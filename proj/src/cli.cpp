#include "resetfree/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "resetfree/experiment.hpp"
#include "resetfree/oracle.hpp"
#include "resetfree/textio.hpp"

namespace resetfree {

namespace {

std::string resolve_output_dir(const RunConfig& config, const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("RESETFREE_OUTPUT_DIR"); env && *env) return env;
    return config.output_dir;
}

int do_run(const std::string& config_path, const std::string& output_flag) {
    RunConfig config = load_run_config(config_path);
    const std::string out_dir = resolve_output_dir(config, output_flag);
    ExperimentResult result = run_experiment(config, out_dir);

    std::cout << "env " << result.env_name << ", B = " << format_double(result.dual_radius) << "\n";
    if (!result.cells.empty()) {
        const GameMetrics& m = result.cells.front().metrics;
        std::cout << "derived alpha = " << format_double(m.alpha)
                  << ", beta = " << format_double(m.beta) << "\n";
    }
    const auto overrides = config.hyper_overrides();
    if (!overrides.empty()) {
        std::cout << "non-default hyperparameters:";
        for (const auto& name : overrides) std::cout << ' ' << name;
        std::cout << "\n";
    }
    for (const Aggregate& a : result.aggregates) {
        std::cout << "K=" << a.episodes << " (" << a.num_seeds << " seeds)"
                  << "  regret " << format_double(a.regret_mean) << " +- "
                  << format_double(a.regret_stderr) << "  resets " << format_double(a.resets_mean)
                  << " +- " << format_double(a.resets_stderr) << "\n";
    }
    std::cout << "outputs in " << out_dir << "\n";

    bool ok = result.all_verified;
    if (result.saddle_cert && result.saddle_cert->max_violation > 1e-9) ok = false;
    if (result.equivalence_cert && result.equivalence_cert->counterexamples > 0) ok = false;
    if (!ok) {
        std::cerr << "verification FAILED; see summaries in " << out_dir << "\n";
        return 1;
    }
    return 0;
}

int do_certify(const std::string& config_path, int samples, std::uint64_t seed, double tol) {
    RunConfig config = load_run_config(config_path);
    const EnvSpec spec = build_env(config.env);
    certify_feasible(spec);
    const SaddlePoint saddle = build_saddle_point(spec);

    const SaddleCertification cert = certify_saddle_point(spec, saddle, samples, seed);
    std::cout << "saddle: " << cert.num_samples << " samples, max violation "
              << format_double(cert.max_violation) << "\n";

    const EquivalenceCertification eq = certify_restricted_equivalence(spec, saddle, samples, seed);
    std::cout << "equivalence: " << (eq.exhaustive ? "exhaustive, " : "sampled, ")
              << eq.policies_checked << " policies, " << eq.counterexamples << " counterexamples\n";

    if (cert.max_violation > tol) {
        std::cerr << "saddle certification FAILED (worst: " << cert.worst_inequality << " at start "
                  << cert.worst_start << ")\n";
        return 1;
    }
    if (eq.counterexamples > 0) {
        std::cerr << "equivalence certification FAILED\n";
        return 1;
    }
    return 0;
}

int do_scale(const std::string& summary_dir, const std::string& output_file, double require_sublinear,
             double max_avg_ratio) {
    const ScalingReport report = scaling_report_from_dir(summary_dir);
    const std::string out =
        output_file.empty() ? (std::filesystem::path(summary_dir) / "scaling.json").string() : output_file;
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + out);
    f << report.to_json() << "\n";

    if (report.inconclusive) {
        std::cout << "inconclusive: " << report.reason << "\n";
    } else {
        std::cout << "regret slope " << format_double(report.regret_fit.slope) << " (R2 "
                  << format_double(report.regret_fit.r2) << "), resets slope "
                  << format_double(report.resets_fit.slope) << " (R2 "
                  << format_double(report.resets_fit.r2) << "), per-episode regret ratio "
                  << format_double(report.avg_regret_ratio) << "\n";
    }
    std::cout << "report written to " << out << "\n";

    if (!std::isnan(require_sublinear)) {
        if (report.inconclusive) {
            std::cerr << "scaling check FAILED: report inconclusive\n";
            return 1;
        }
        if (report.regret_fit.slope >= require_sublinear || report.resets_fit.slope >= require_sublinear) {
            std::cerr << "scaling check FAILED: slope bound " << format_double(require_sublinear)
                      << " not met\n";
            return 1;
        }
    }
    if (!std::isnan(max_avg_ratio)) {
        if (report.inconclusive || report.avg_regret_ratio > max_avg_ratio) {
            std::cerr << "per-episode regret ratio check FAILED\n";
            return 1;
        }
    }
    return 0;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"Reset-free learner: primal-dual game runner and certifier"};
    app.require_subcommand(1);

    std::string run_config, run_output;
    CLI::App* run = app.add_subcommand("run", "execute a run configuration");
    run->add_option("config", run_config, "JSON run configuration")->required();
    run->add_option("--output-dir", run_output, "override the output directory");

    std::string cert_config;
    int cert_samples = 200;
    std::uint64_t cert_seed = 0;
    double cert_tol = 1e-9;
    CLI::App* certify = app.add_subcommand("certify", "oracle-only checks for a configuration's environment");
    certify->add_option("config", cert_config, "JSON run configuration")->required();
    certify->add_option("--samples", cert_samples, "sampled (policy, multiplier) pairs");
    certify->add_option("--seed", cert_seed, "certification seed");
    certify->add_option("--tol", cert_tol, "violation tolerance");

    std::string scale_dir, scale_out;
    double scale_slope = std::numeric_limits<double>::quiet_NaN();
    double scale_ratio = std::numeric_limits<double>::quiet_NaN();
    CLI::App* scale = app.add_subcommand("scale", "fit log-log slopes over per-cell summaries");
    scale->add_option("summary_dir", scale_dir, "directory of summary JSON files")->required();
    scale->add_option("--output", scale_out, "report path (default <dir>/scaling.json)");
    scale->add_option("--require-sublinear", scale_slope, "fail unless both slopes are below this");
    scale->add_option("--max-avg-ratio", scale_ratio, "fail unless the per-episode regret ratio is at most this");

    // CLI11 wants mutable char*; feed it copies.
    std::vector<std::string> argv_storage;
    argv_storage.push_back("resetfree");
    for (const auto& a : args) argv_storage.push_back(a);
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // parse and usage problems are config errors
    }

    try {
        if (run->parsed()) return do_run(run_config, run_output);
        if (certify->parsed()) return do_certify(cert_config, cert_samples, cert_seed, cert_tol);
        return do_scale(scale_dir, scale_out, scale_slope, scale_ratio);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleEnvironment& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const GenerationFailure& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cli_main(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args);
}

} // namespace resetfree
