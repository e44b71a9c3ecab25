// bioloc: maze generation, landmark mapping, localization runs and evaluation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <bioloc/bioloc.hpp>

namespace fs = std::filesystem;
using namespace bioloc;

namespace {

enum class LogLevel { off = 0, info = 1, debug = 2, trace = 3 };

LogLevel log_level()
{
    const char* v = std::getenv("BIOLOC_LOG");
    if (!v)
        return LogLevel::info;
    const std::string s(v);
    if (s == "0" || s == "off" || s == "quiet")
        return LogLevel::off;
    if (s == "2" || s == "debug")
        return LogLevel::debug;
    if (s == "3" || s == "trace")
        return LogLevel::trace;
    return LogLevel::info;
}

template <class... A>
void log(LogLevel at, const char* fmt, A... args)
{
    if (static_cast<int>(log_level()) >= static_cast<int>(at)) {
        if constexpr (sizeof...(A) == 0)
            std::fputs(fmt, stderr);
        else
            std::fprintf(stderr, fmt, args...);
        std::fputc('\n', stderr);
    }
}

std::ofstream open_out(const fs::path& p)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + p.string());
    return out;
}

int cmd_map_gen(const std::string& spec_path, const std::string& out_path, std::optional<std::uint64_t> seed)
{
    MazeSpec spec = load_maze_spec(spec_path);
    if (seed)
        spec.seed = *seed;
    const Maze maze = generate_maze(spec);
    const fs::path out(out_path);
    if (out.has_parent_path())
        fs::create_directories(out.parent_path());
    if (out.extension() == ".pgm")
        save_pgm(maze.grid, out);
    else
        save_map(maze.grid, out);
    log(LogLevel::info, "map-gen: %dx%d cells at %g m -> %s", maze.grid.width, maze.grid.height, maze.grid.resolution,
        out_path.c_str());
    return 0;
}

int cmd_map_landmarks(const std::string& map_path, const std::string& traj_path, const std::string& scenario_path,
                      const std::string& out_path)
{
    LandmarkStore store;
    Adjacency adj;
    if (!scenario_path.empty()) {
        // noiseless tour of the scenario
        const auto f = load_scenario(scenario_path);
        ScenarioFile g = f;
        g.kidnaps.clear();
        g.landmarks_path.clear();
        const World w = build_world(g);
        store = w.store;
        adj = w.adjacency;
    } else {
        if (map_path.empty() || traj_path.empty())
            throw ConfigError("map-landmarks: need --scenario, or --map with --trajectory");
        const auto map = load_map(map_path);
        const auto truth = read_csv_file<TruthRow>(traj_path, [](std::istream& in) { return read_truth_csv(in); });
        std::vector<Pose> poses;
        std::vector<LidarScan> scans;
        std::mt19937_64 rng(0);
        const LidarSpec lidar;
        for (const auto& r : truth) {
            poses.push_back(r.pose);
            scans.push_back(simulate_scan(map, r.pose, lidar.beams, lidar.fov, lidar.max_range, 0.0, rng));
        }
        if (poses.empty())
            throw ConfigError("map-landmarks: trajectory is empty");
        std::tie(store, adj) = run_mapping_pass(map, poses, scans, default_geometry(map));
    }
    if (store.empty())
        log(LogLevel::off, "warning: no landmarks found; writing an empty store");
    auto out = open_out(out_path);
    save_landmarks(out, store, adj);
    log(LogLevel::info, "map-landmarks: %zu landmarks -> %s", store.size(), out_path.c_str());
    return 0;
}

struct RunArgs {
    std::string scenario, map, method = "both", out = "out", landmarks, pi_mode;
    std::uint64_t seed = 1;
    int trials = 1;
    bool no_lv = false;
    int particles = 0;
};

int cmd_run(const RunArgs& a)
{
    ScenarioFile f = load_scenario(a.scenario);
    if (!a.map.empty()) {
        f.maze.reset();
        f.map_path = a.map;
        if (f.tour_seed)
            throw ConfigError("--map: scenario uses a generated tour, which needs its maze");
    }
    RunOptions o;
    if (a.method == "bio")
        o.method = Method::bio;
    else if (a.method == "mcl")
        o.method = Method::mcl;
    else if (a.method == "both")
        o.method = Method::both;
    else
        throw ConfigError("--method: expected bio, mcl or both");
    if (a.no_lv)
        o.enable_lv = false;
    if (!a.pi_mode.empty())
        o.pi_mode = a.pi_mode == "literal" ? PathIntegrationMode::literal : PathIntegrationMode::per_heading;
    if (a.particles > 0)
        o.particles = a.particles;
    if (a.trials < 1)
        throw ConfigError("--trials: must be >= 1");

    const World w = build_world(f, a.landmarks.empty() ? std::nullopt : std::optional<fs::path>(a.landmarks));
    log(LogLevel::info, "run: %s, map %dx%d, %zu landmarks, %zu kidnaps", f.name.c_str(), w.map->width,
        w.map->height, w.store.size(), w.scenario.kidnaps.size());
    if (o.method != Method::mcl && (o.enable_lv.value_or(f.bio.enable_lv)) && w.store.empty())
        log(LogLevel::off, "warning: bio method with local view enabled but the landmark store is empty");

    const fs::path out_dir(a.out);
    fs::create_directories(out_dir);
    auto summary = open_out(out_dir / "summary.csv");
    summary << kSummaryHeader << '\n';
    const LogLevel lvl = log_level();

    for (int trial = 0; trial < a.trials; ++trial) {
        o.seed = a.seed + static_cast<std::uint64_t>(trial);
        const std::string tag = "seed" + std::to_string(o.seed);
        if (lvl >= LogLevel::trace) {
            o.on_bio_step = [&](long t, const Localizer& loc) {
                if (t % 100 != 0)
                    return;
                auto dump = open_out(out_dir / ("network_" + tag + "_t" + std::to_string(t) + ".csv"));
                loc.network().write_csv(dump);
            };
        }
        const RunReport r = run_scenario(w, f, o);
        {
            auto tr = open_out(out_dir / ("truth_" + tag + ".csv"));
            write_truth_csv(tr, r.truth);
        }
        for (const auto& m : r.methods) {
            auto tr = open_out(out_dir / ("trace_" + m.method + "_" + tag + ".csv"));
            write_trace_csv(tr, m.trace);
            log(LogLevel::info, "  %s %-3s mean %.4f m  rmse %.4f m  converged@%ld  resets %d", tag.c_str(),
                m.method.c_str(), m.errors.mean_distance, m.errors.rmse, m.convergence_step, m.resets);
            for (std::size_t k = 0; k < m.recovery_steps.size(); ++k)
                log(LogLevel::debug, "    kidnap @%ld recovered after %ld steps", r.kidnap_steps[k],
                    m.recovery_steps[k]);
        }
        {
            auto gp = open_out(out_dir / ("errors_" + tag + ".dat"));
            write_gnuplot_columns(gp, r);
        }
        write_summary_rows(summary, r);
    }
    return 0;
}

int cmd_eval(const std::string& truth_path, const std::vector<std::string>& traces, const std::string& out_path)
{
    const auto truth = read_csv_file<TruthRow>(truth_path, [](std::istream& in) { return read_truth_csv(in); });
    std::vector<std::pair<std::string, ErrorSummary>> rows;
    for (const auto& p : traces) {
        const auto tr = read_csv_file<TraceRow>(p, [](std::istream& in) { return read_trace_csv(in); });
        try {
            rows.emplace_back(fs::path(p).stem().string(), evaluate(tr, truth));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(p + ": " + e.what());
        }
    }
    write_error_table(std::cout, rows);
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        write_error_table(out, rows);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"bioloc: pose-cell LiDAR localization and MCL baseline"};
    app.require_subcommand(1);

    std::string spec_path, gen_out;
    std::optional<std::uint64_t> gen_seed;
    auto* gen = app.add_subcommand("map-gen", "generate a maze map from a spec file");
    gen->add_option("spec", spec_path, "maze spec (JSON)")->required();
    gen->add_option("--out", gen_out, "output map (.txt ASCII or .pgm)")->required();
    gen->add_option("--seed", gen_seed, "override the spec seed");

    std::string lm_map, lm_traj, lm_scenario, lm_out;
    auto* lm = app.add_subcommand("map-landmarks", "build a landmark store with a mapping pass");
    lm->add_option("--map", lm_map, "map file");
    lm->add_option("--trajectory", lm_traj, "ground-truth poses (t,x,y,theta CSV)");
    lm->add_option("--scenario", lm_scenario, "use the scenario's noiseless tour instead");
    lm->add_option("--out", lm_out, "landmark store to write")->required();

    RunArgs ra;
    auto* run = app.add_subcommand("run", "run a scenario with one or both methods");
    run->add_option("--scenario", ra.scenario, "scenario file (JSON)")->required();
    run->add_option("--map", ra.map, "override the scenario map");
    run->add_option("--method", ra.method, "bio, mcl or both")->check(CLI::IsMember({"bio", "mcl", "both"}));
    run->add_option("--seed", ra.seed, "noise seed of the first trial");
    run->add_option("--trials", ra.trials, "number of seeded trials");
    run->add_option("--out", ra.out, "output directory");
    run->add_option("--landmarks", ra.landmarks, "landmark store (default: mapping pass over the tour)");
    run->add_flag("--no-lv", ra.no_lv, "disable local view injection");
    run->add_option("--pi-mode", ra.pi_mode, "path integration mode")
        ->check(CLI::IsMember({"literal", "per_heading"}));
    run->add_option("--particles", ra.particles, "MCL particle count");

    std::string ev_truth, ev_out;
    std::vector<std::string> ev_traces;
    auto* ev = app.add_subcommand("eval", "error table for trace CSVs against a truth CSV");
    ev->add_option("--truth", ev_truth, "truth CSV (t,x,y,theta)")->required();
    ev->add_option("traces", ev_traces, "trace CSVs")->required();
    ev->add_option("--out", ev_out, "also write the table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen)
            return cmd_map_gen(spec_path, gen_out, gen_seed);
        if (*lm)
            return cmd_map_landmarks(lm_map, lm_traj, lm_scenario, lm_out);
        if (*run)
            return cmd_run(ra);
        if (*ev)
            return cmd_eval(ev_truth, ev_traces, ev_out);
    } catch (const DegenerateBeliefError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
