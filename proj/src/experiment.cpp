#include "resetfree/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "resetfree/textio.hpp"

namespace resetfree {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cell_name(const std::string& env_name, int episodes, std::uint64_t seed) {
    return env_name + "_K" + std::to_string(episodes) + "_seed" + std::to_string(seed);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw ConfigError("write failed: " + path.string());
}

json cell_summary_json(const RunConfig& config, const CellResult& cell) {
    json j;
    j["env"] = config.env.name;
    j["episodes"] = cell.episodes;
    j["seed"] = cell.seed;
    j["metrics"] = json::parse(cell.metrics.to_json());
    j["hyper_overrides"] = config.hyper_overrides();
    if (config.verify_reduction) {
        j["reduction"] = json::parse(cell.reduction.to_json());
        j["dual_bound"] = json::parse(cell.dual_bound.to_json());
        j["verified_ok"] = cell.verified_ok;
    }
    return j;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

} // namespace

ExperimentResult run_experiment(const RunConfig& config, const std::string& output_dir_override,
                                bool write_files) {
    const EnvSpec spec = build_env(config.env);
    certify_feasible(spec);
    const SaddlePoint saddle = build_saddle_point(spec);

    GameHyper hyper = config.hyper;
    if (hyper.dual_radius <= 0.0) hyper.dual_radius = auto_dual_radius(saddle);

    ExperimentResult result;
    result.env_name = config.env.name;
    result.dual_radius = hyper.dual_radius;

    std::vector<std::pair<int, std::uint64_t>> grid;
    for (int k : config.episode_grid)
        for (std::uint64_t seed : config.seeds) grid.emplace_back(k, seed);
    result.cells.resize(grid.size());

    fs::path out_dir(output_dir_override.empty() ? config.output_dir : output_dir_override);
    if (write_files) fs::create_directories(out_dir);

    // Worker pool over cells.  Cells only read spec/saddle/hyper and write
    // distinct files, so no locking is needed.
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            try {
                const auto [episodes, seed] = grid[i];
                RunResult run = run_game(spec, hyper, episodes, seed, &saddle);
                CellResult& cell = result.cells[i];
                cell.name = cell_name(config.env.name, episodes, seed);
                cell.episodes = episodes;
                cell.seed = seed;
                cell.metrics = run.metrics;
                if (config.verify_reduction) {
                    cell.reduction = verify_reduction(run.records);
                    cell.dual_bound = verify_dual_bound(run.records, hyper.dual_radius);
                    cell.verified_ok = cell.reduction.ok && cell.dual_bound.ok &&
                                       run.metrics.invariant_violations == 0;
                }
                if (write_files) {
                    write_records_csv(run.records, (out_dir / (cell.name + ".csv")).string());
                    write_text(out_dir / ("summary_" + cell.name + ".json"),
                               cell_summary_json(config, cell).dump(2) + "\n");
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(grid.size());
                return;
            }
        }
    };
    const int threads = std::min<int>(config.threads, static_cast<int>(grid.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (const CellResult& cell : result.cells)
        if (config.verify_reduction && !cell.verified_ok) result.all_verified = false;

    // Aggregate across seeds for each K, in grid order.
    for (int k : config.episode_grid) {
        std::vector<double> regrets, resets;
        for (const CellResult& cell : result.cells) {
            if (cell.episodes != k) continue;
            regrets.push_back(cell.metrics.regret);
            resets.push_back(cell.metrics.resets_expected);
        }
        Aggregate agg;
        agg.episodes = k;
        agg.num_seeds = static_cast<int>(regrets.size());
        agg.regret_mean = mean_of(regrets);
        agg.regret_stderr = stderr_of(regrets, agg.regret_mean);
        agg.resets_mean = mean_of(resets);
        agg.resets_stderr = stderr_of(resets, agg.resets_mean);
        result.aggregates.push_back(agg);
    }

    if (config.verify_saddle)
        result.saddle_cert = certify_saddle_point(spec, saddle, config.saddle_samples, config.certify_seed);
    if (config.verify_equivalence)
        result.equivalence_cert =
            certify_restricted_equivalence(spec, saddle, config.saddle_samples, config.certify_seed);

    if (write_files) {
        json grid_summary;
        grid_summary["env"] = config.env.name;
        grid_summary["dual_radius"] = result.dual_radius;
        grid_summary["seeds"] = config.seeds;
        grid_summary["hyper_overrides"] = config.hyper_overrides();
        grid_summary["aggregates"] = json::array();
        for (const Aggregate& a : result.aggregates) {
            json ja;
            ja["episodes"] = a.episodes;
            ja["num_seeds"] = a.num_seeds;
            ja["regret_mean"] = a.regret_mean;
            ja["regret_stderr"] = a.regret_stderr;
            ja["resets_mean"] = a.resets_mean;
            ja["resets_stderr"] = a.resets_stderr;
            grid_summary["aggregates"].push_back(ja);
        }
        grid_summary["all_verified"] = result.all_verified;
        if (result.saddle_cert) grid_summary["saddle"] = json::parse(result.saddle_cert->to_json());
        if (result.equivalence_cert)
            grid_summary["equivalence"] = json::parse(result.equivalence_cert->to_json());
        write_text(out_dir / "grid_summary.json", grid_summary.dump(2) + "\n");
    }
    return result;
}

namespace {

ScalingFit least_squares_loglog(const std::vector<double>& ks, const std::vector<double>& ys) {
    const std::size_t n = ks.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::log(ks[i]);
        y[i] = std::log(ys[i]);
    }
    const double xm = mean_of(x), ym = mean_of(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

} // namespace

ScalingReport fit_scaling(std::vector<ScalingPoint> points, int min_points, int min_seeds) {
    ScalingReport rep;
    std::sort(points.begin(), points.end(),
              [](const ScalingPoint& a, const ScalingPoint& b) { return a.episodes < b.episodes; });
    rep.points = points;

    if (static_cast<int>(points.size()) < min_points) {
        rep.reason = "need at least " + std::to_string(min_points) + " distinct K values, have " +
                     std::to_string(points.size());
        return rep;
    }
    for (const ScalingPoint& p : points) {
        if (p.num_seeds < min_seeds) {
            rep.reason = "K=" + std::to_string(p.episodes) + " has " + std::to_string(p.num_seeds) +
                         " seeds, need " + std::to_string(min_seeds);
            return rep;
        }
        if (!(p.regret_mean > 0.0) || !(p.resets_mean > 0.0)) {
            rep.reason = "non-positive mean at K=" + std::to_string(p.episodes) +
                         " leaves the log-log fit undefined";
            return rep;
        }
    }

    std::vector<double> ks, regrets, resets;
    for (const ScalingPoint& p : points) {
        ks.push_back(static_cast<double>(p.episodes));
        regrets.push_back(p.regret_mean);
        resets.push_back(p.resets_mean);
    }
    rep.regret_fit = least_squares_loglog(ks, regrets);
    rep.resets_fit = least_squares_loglog(ks, resets);
    const ScalingPoint& lo = points.front();
    const ScalingPoint& hi = points.back();
    rep.avg_regret_ratio = (hi.regret_mean / hi.episodes) / (lo.regret_mean / lo.episodes);
    rep.inconclusive = false;
    return rep;
}

ScalingReport scaling_report_from_dir(const std::string& summary_dir, int min_points, int min_seeds) {
    if (!fs::is_directory(summary_dir)) throw ConfigError("not a directory: " + summary_dir);

    struct Accum {
        int num_seeds = 0;
        double regret_sum = 0.0;
        double resets_sum = 0.0;
    };
    std::map<int, Accum> by_k;
    for (const auto& entry : fs::recursive_directory_iterator(summary_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        std::ifstream f(entry.path(), std::ios::binary);
        json j;
        try {
            f >> j;
        } catch (const json::parse_error&) {
            continue;
        }
        // Per-cell summaries carry (episodes, seed, metrics); skip the rest.
        if (!j.is_object() || !j.contains("episodes") || !j.contains("seed") || !j.contains("metrics"))
            continue;
        const json& m = j["metrics"];
        if (!m.contains("regret") || !m.contains("resets_expected")) continue;
        Accum& acc = by_k[j["episodes"].get<int>()];
        ++acc.num_seeds;
        acc.regret_sum += m["regret"].get<double>();
        acc.resets_sum += m["resets_expected"].get<double>();
    }

    std::vector<ScalingPoint> points;
    for (const auto& [k, acc] : by_k) {
        ScalingPoint p;
        p.episodes = k;
        p.num_seeds = acc.num_seeds;
        p.regret_mean = acc.regret_sum / acc.num_seeds;
        p.resets_mean = acc.resets_sum / acc.num_seeds;
        points.push_back(p);
    }
    return fit_scaling(std::move(points), min_points, min_seeds);
}

std::string ScalingReport::to_json() const {
    json j;
    j["inconclusive"] = inconclusive;
    if (inconclusive) j["reason"] = reason;
    j["points"] = json::array();
    for (const ScalingPoint& p : points) {
        json jp;
        jp["episodes"] = p.episodes;
        jp["num_seeds"] = p.num_seeds;
        jp["regret_mean"] = p.regret_mean;
        jp["resets_mean"] = p.resets_mean;
        j["points"].push_back(jp);
    }
    if (!inconclusive) {
        j["regret_slope"] = regret_fit.slope;
        j["regret_r2"] = regret_fit.r2;
        j["resets_slope"] = resets_fit.slope;
        j["resets_r2"] = resets_fit.r2;
        j["avg_regret_ratio"] = avg_regret_ratio;
    }
    return j.dump(2);
}

} // namespace resetfree
