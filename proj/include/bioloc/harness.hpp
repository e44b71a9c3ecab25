#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid_map.hpp"
#include "local_view.hpp"
#include "localizer.hpp"
#include "mcl.hpp"
#include "observation.hpp"
#include "simulator.hpp"

namespace bioloc {

// ---------------------------------------------------------------- truth / trace files

struct TruthRow {
    long t = 0;
    Pose pose;
};

inline constexpr const char* kTruthHeader = "t,x,y,theta";

inline void write_truth_csv(std::ostream& out, std::span<const TruthRow> rows)
{
    out << kTruthHeader << '\n';
    for (const auto& r : rows)
        out << r.t << ',' << detail::format_double(r.pose.x) << ',' << detail::format_double(r.pose.y) << ','
            << detail::format_double(r.pose.theta) << '\n';
}

inline void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows)
{
    out << kTraceHeader << '\n';
    for (const auto& r : rows)
        write_trace_row(out, r);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
        f.push_back(cell);
    if (!line.empty() && line.back() == ',')
        f.emplace_back();
    return f;
}

inline std::string strip_cr(std::string s)
{
    if (!s.empty() && s.back() == '\r')
        s.pop_back();
    return s;
}

// Reads a headed CSV, checking the header, and hands each data row to fn.
inline void read_csv(std::istream& in, const std::string& header,
                     const std::function<void(const std::vector<std::string>&, std::size_t)>& fn)
{
    std::string line;
    std::size_t no = 1;
    if (!std::getline(in, line) || strip_cr(line) != header)
        throw ParseError("expected header '" + header + "'", 1);
    const std::size_t n = split_csv(header).size();
    while (std::getline(in, line)) {
        ++no;
        line = strip_cr(line);
        if (line.empty())
            continue;
        const auto f = split_csv(line);
        if (f.size() != n)
            throw ParseError("expected " + std::to_string(n) + " fields, got " + std::to_string(f.size()), no);
        fn(f, no);
    }
}

}  // namespace detail

inline std::vector<TruthRow> read_truth_csv(std::istream& in)
{
    std::vector<TruthRow> rows;
    detail::read_csv(in, kTruthHeader, [&](const std::vector<std::string>& f, std::size_t no) {
        rows.push_back({detail::parse_int(f[0], no, "t"),
                        Pose(detail::parse_double(f[1], no, "x"), detail::parse_double(f[2], no, "y"),
                             detail::parse_double(f[3], no, "theta"))});
    });
    return rows;
}

inline std::vector<TraceRow> read_trace_csv(std::istream& in)
{
    std::vector<TraceRow> rows;
    detail::read_csv(in, kTraceHeader, [&](const std::vector<std::string>& f, std::size_t no) {
        TraceRow r;
        r.t = detail::parse_int(f[0], no, "t");
        r.estimate = Pose(detail::parse_double(f[1], no, "est_x"), detail::parse_double(f[2], no, "est_y"),
                          detail::parse_double(f[3], no, "est_theta"));
        r.confidence = detail::parse_double(f[4], no, "confidence");
        r.converged = detail::parse_int(f[5], no, "converged") != 0;
        r.lv_id = detail::parse_int(f[6], no, "lv_detected_id");
        r.injected_mass = detail::parse_double(f[7], no, "injected_mass");
        rows.push_back(r);
    });
    return rows;
}

template <class Row, class Reader>
std::vector<Row> read_csv_file(const std::filesystem::path& p, Reader reader)
{
    std::ifstream in(p);
    if (!in)
        throw ConfigError("cannot open " + p.string());
    try {
        return reader(in);
    } catch (const ParseError& e) {
        throw ParseError(p.string() + ": " + e.what(), e.location());
    }
}

// ---------------------------------------------------------------- metrics

struct ErrorSummary {
    double mean_abs_dx = 0.0;
    double mean_abs_dy = 0.0;
    double mean_distance = 0.0;
    double rmse = 0.0;
    std::size_t rows = 0;
};

/// Per-step planar distance between estimate and truth. Rows must share the
/// same time stamps in the same order.
inline std::vector<double> distance_errors(std::span<const TraceRow> trace, std::span<const TruthRow> truth)
{
    if (trace.size() != truth.size())
        throw std::invalid_argument("trace has " + std::to_string(trace.size()) + " rows, truth has " +
                                    std::to_string(truth.size()));
    std::vector<double> e(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (trace[i].t != truth[i].t)
            throw std::invalid_argument("row " + std::to_string(i) + ": trace t=" + std::to_string(trace[i].t) +
                                        " but truth t=" + std::to_string(truth[i].t));
        e[i] = planar_distance(trace[i].estimate, truth[i].pose);
    }
    return e;
}

inline ErrorSummary evaluate(std::span<const TraceRow> trace, std::span<const TruthRow> truth)
{
    const auto d = distance_errors(trace, truth);
    ErrorSummary s;
    s.rows = d.size();
    if (d.empty())
        return s;
    double sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        s.mean_abs_dx += std::abs(trace[i].estimate.x - truth[i].pose.x);
        s.mean_abs_dy += std::abs(trace[i].estimate.y - truth[i].pose.y);
        s.mean_distance += d[i];
        sq += d[i] * d[i];
    }
    const double n = static_cast<double>(d.size());
    s.mean_abs_dx /= n;
    s.mean_abs_dy /= n;
    s.mean_distance /= n;
    s.rmse = std::sqrt(sq / n);
    return s;
}

/// Reduction of `ours` relative to `baseline`, in percent.
inline double percent_reduction(double baseline, double ours)
{
    if (!(baseline > 0.0))
        throw std::invalid_argument("percent_reduction: baseline must be positive");
    return (baseline - ours) / baseline * 100.0;
}

/// First index >= from at which the error stays below `threshold` for
/// `sustain` consecutive steps; -1 when that never happens.
inline long settle_index(std::span<const double> errors, double threshold, std::size_t sustain = 20,
                         std::size_t from = 0)
{
    std::size_t run = 0;
    for (std::size_t i = from; i < errors.size(); ++i) {
        run = errors[i] < threshold ? run + 1 : 0;
        if (run == sustain)
            return static_cast<long>(i + 1 - sustain);
    }
    return -1;
}

// ---------------------------------------------------------------- scenario files

/// How a kidnap target is chosen when the file does not give a pose.
enum class KidnapKind { explicit_pose, short_range, long_range };

struct KidnapSpec {
    long step = 0;
    KidnapKind kind = KidnapKind::explicit_pose;
    Pose pose;
    std::optional<std::size_t> resume_waypoint;
};

struct BioOptions {
    int n_theta = 36;
    std::optional<double> k_xy;  ///< defaults to the map resolution
    int beam_stride = 1;
    std::optional<double> s_v;
    bool enable_lv = true;
    PathIntegrationMode pi_mode = PathIntegrationMode::per_heading;
};

struct MclOptions {
    int particles = 500;
    int beam_stride = 1;
    MotionNoise noise;
};

/// Parsed scenario file. The simulator Scenario is completed by
/// resolve_scenario once the map is known.
struct ScenarioFile {
    std::string name = "scenario";
    std::optional<MazeSpec> maze;
    std::filesystem::path map_path;
    long steps = 1000;
    std::uint64_t seed = 1;
    std::optional<Pose> initial_pose;
    std::size_t start_room = 0;
    std::vector<Waypoint> waypoints;
    std::optional<std::uint64_t> tour_seed;  ///< generate a room tour instead of listing waypoints
    bool loop_waypoints = true;
    OdometryNoise odometry;
    LidarSpec lidar;
    std::vector<KidnapSpec> kidnaps;
    bool initial_estimate = true;
    BioOptions bio;
    MclOptions mcl;
    std::filesystem::path landmarks_path;
};

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key, const T& fallback, const std::string& ctx)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(ctx + "." + key + ": wrong type");
    }
}

inline Pose json_pose(const nlohmann::json& j, const std::string& ctx)
{
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
        throw ConfigError(ctx + ": expected [x, y] or [x, y, theta]");
    try {
        return Pose(j[0].get<double>(), j[1].get<double>(), j.size() == 3 ? j[2].get<double>() : 0.0);
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(ctx + ": coordinates must be numbers");
    }
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& ctx)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
            throw ConfigError(ctx + "." + it.key() + ": unknown field");
    }
}

}  // namespace detail

inline MazeSpec parse_maze_spec(const nlohmann::json& j, const std::string& ctx = "maze")
{
    if (!j.is_object())
        throw ConfigError(ctx + ": expected an object");
    detail::check_keys(j,
                       {"width", "height", "resolution", "rooms_x", "rooms_y", "wall_cells", "door_width",
                        "extra_doors", "features_per_room", "symmetric_rows", "seed"},
                       ctx);
    MazeSpec m;
    m.width = detail::json_get(j, "width", m.width, ctx);
    m.height = detail::json_get(j, "height", m.height, ctx);
    m.resolution = detail::json_get(j, "resolution", m.resolution, ctx);
    m.rooms_x = detail::json_get(j, "rooms_x", m.rooms_x, ctx);
    m.rooms_y = detail::json_get(j, "rooms_y", m.rooms_y, ctx);
    m.wall_cells = detail::json_get(j, "wall_cells", m.wall_cells, ctx);
    m.door_width = detail::json_get(j, "door_width", m.door_width, ctx);
    m.extra_doors = detail::json_get(j, "extra_doors", m.extra_doors, ctx);
    m.features_per_room = detail::json_get(j, "features_per_room", m.features_per_room, ctx);
    m.symmetric_rows = detail::json_get(j, "symmetric_rows", m.symmetric_rows, ctx);
    m.seed = detail::json_get(j, "seed", m.seed, ctx);
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
    return m;
}

inline MazeSpec load_maze_spec(const std::filesystem::path& p)
{
    const std::string text = detail::read_file(p);
    try {
        return parse_maze_spec(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

/// Relative paths inside the file resolve against `base_dir`.
inline ScenarioFile parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    using detail::json_get;
    if (!j.is_object())
        throw ConfigError("scenario: expected an object");
    detail::check_keys(j,
                       {"name", "maze", "map", "steps", "seed", "initial_pose", "start_room", "waypoints", "tour",
                        "loop_waypoints", "odometry_noise", "lidar", "kidnaps", "initial_estimate", "bio", "mcl",
                        "landmarks"},
                       "scenario");
    ScenarioFile s;
    s.name = json_get<std::string>(j, "name", s.name, "scenario");
    if (j.contains("maze") == j.contains("map"))
        throw ConfigError("scenario: give exactly one of 'maze' or 'map'");
    if (j.contains("maze")) {
        if (j["maze"].is_string())
            s.maze = load_maze_spec(base_dir / j["maze"].get<std::string>());
        else
            s.maze = parse_maze_spec(j["maze"], "scenario.maze");
    } else {
        s.map_path = base_dir / json_get<std::string>(j, "map", "", "scenario");
    }
    s.steps = json_get(j, "steps", s.steps, "scenario");
    if (s.steps < 1)
        throw ConfigError("scenario.steps: must be >= 1");
    s.seed = json_get(j, "seed", s.seed, "scenario");
    if (j.contains("initial_pose"))
        s.initial_pose = detail::json_pose(j["initial_pose"], "scenario.initial_pose");
    s.start_room = json_get<std::size_t>(j, "start_room", 0, "scenario");
    if (j.contains("waypoints")) {
        if (!j["waypoints"].is_array())
            throw ConfigError("scenario.waypoints: expected a list");
        for (std::size_t i = 0; i < j["waypoints"].size(); ++i) {
            const auto& w = j["waypoints"][i];
            const std::string ctx = "scenario.waypoints[" + std::to_string(i) + "]";
            const Pose p = detail::json_pose(w.is_array() && w.size() == 3 ? nlohmann::json::array({w[0], w[1]}) : w, ctx);
            Waypoint wp{p.x, p.y, 0};
            if (w.size() == 3)
                wp.hold_until = w[2].get<long>();
            s.waypoints.push_back(wp);
        }
    }
    if (j.contains("tour")) {
        const auto& t = j["tour"];
        detail::check_keys(t, {"seed"}, "scenario.tour");
        s.tour_seed = json_get<std::uint64_t>(t, "seed", 1, "scenario.tour");
    }
    if (s.waypoints.empty() && !s.tour_seed)
        throw ConfigError("scenario.waypoints: need waypoints or a tour");
    if (s.tour_seed && !s.maze)
        throw ConfigError("scenario.tour: only available with a generated maze");
    s.loop_waypoints = json_get(j, "loop_waypoints", s.loop_waypoints, "scenario");
    if (j.contains("odometry_noise")) {
        const auto& o = j["odometry_noise"];
        detail::check_keys(o, {"trans", "rot"}, "scenario.odometry_noise");
        s.odometry.trans = json_get(o, "trans", s.odometry.trans, "scenario.odometry_noise");
        s.odometry.rot = json_get(o, "rot", s.odometry.rot, "scenario.odometry_noise");
        if (s.odometry.trans < 0 || s.odometry.rot < 0)
            throw ConfigError("scenario.odometry_noise: sigmas must be non-negative");
    }
    if (j.contains("lidar")) {
        const auto& l = j["lidar"];
        detail::check_keys(l, {"beams", "fov", "max_range", "noise_sigma"}, "scenario.lidar");
        s.lidar.beams = json_get(l, "beams", s.lidar.beams, "scenario.lidar");
        s.lidar.fov = json_get(l, "fov", s.lidar.fov, "scenario.lidar");
        s.lidar.max_range = json_get(l, "max_range", s.lidar.max_range, "scenario.lidar");
        s.lidar.noise_sigma = json_get(l, "noise_sigma", s.lidar.noise_sigma, "scenario.lidar");
        if (s.lidar.beams < 1 || !(s.lidar.fov > 0) || !(s.lidar.max_range > 0) || s.lidar.noise_sigma < 0)
            throw ConfigError("scenario.lidar: invalid sensor parameters");
    }
    if (j.contains("kidnaps")) {
        for (std::size_t i = 0; i < j["kidnaps"].size(); ++i) {
            const auto& k = j["kidnaps"][i];
            const std::string ctx = "scenario.kidnaps[" + std::to_string(i) + "]";
            detail::check_keys(k, {"step", "pose", "kind", "resume_waypoint"}, ctx);
            KidnapSpec ks;
            ks.step = json_get<long>(k, "step", -1, ctx);
            if (ks.step < 1 || ks.step > s.steps)
                throw ConfigError(ctx + ".step: outside the scenario");
            if (k.contains("pose")) {
                ks.pose = detail::json_pose(k["pose"], ctx + ".pose");
            } else {
                const auto kind = json_get<std::string>(k, "kind", "", ctx);
                if (kind == "short")
                    ks.kind = KidnapKind::short_range;
                else if (kind == "long")
                    ks.kind = KidnapKind::long_range;
                else
                    throw ConfigError(ctx + ": need a pose or kind 'short'/'long'");
            }
            if (k.contains("resume_waypoint"))
                ks.resume_waypoint = json_get<std::size_t>(k, "resume_waypoint", 0, ctx);
            s.kidnaps.push_back(ks);
        }
        std::sort(s.kidnaps.begin(), s.kidnaps.end(), [](auto& a, auto& b) { return a.step < b.step; });
    }
    const auto init = json_get<std::string>(j, "initial_estimate", "given", "scenario");
    if (init != "given" && init != "none")
        throw ConfigError("scenario.initial_estimate: expected 'given' or 'none'");
    s.initial_estimate = init == "given";
    if (j.contains("bio")) {
        const auto& b = j["bio"];
        detail::check_keys(b, {"n_theta", "k_xy", "beam_stride", "s_v", "enable_lv", "pi_mode"}, "scenario.bio");
        s.bio.n_theta = json_get(b, "n_theta", s.bio.n_theta, "scenario.bio");
        if (b.contains("k_xy")) {
            s.bio.k_xy = json_get(b, "k_xy", 0.0, "scenario.bio");
            if (!(*s.bio.k_xy > 0.0))
                throw ConfigError("scenario.bio.k_xy: must be positive");
        }
        s.bio.beam_stride = json_get(b, "beam_stride", s.bio.beam_stride, "scenario.bio");
        if (b.contains("s_v"))
            s.bio.s_v = json_get(b, "s_v", 0.0, "scenario.bio");
        s.bio.enable_lv = json_get(b, "enable_lv", s.bio.enable_lv, "scenario.bio");
        const auto pm = json_get<std::string>(b, "pi_mode", "per_heading", "scenario.bio");
        if (pm != "per_heading" && pm != "literal")
            throw ConfigError("scenario.bio.pi_mode: expected 'literal' or 'per_heading'");
        s.bio.pi_mode = pm == "literal" ? PathIntegrationMode::literal : PathIntegrationMode::per_heading;
    }
    if (j.contains("mcl")) {
        const auto& m = j["mcl"];
        detail::check_keys(m, {"particles", "beam_stride", "trans_sigma", "rot_sigma"}, "scenario.mcl");
        s.mcl.particles = json_get(m, "particles", s.mcl.particles, "scenario.mcl");
        s.mcl.beam_stride = json_get(m, "beam_stride", s.mcl.beam_stride, "scenario.mcl");
        s.mcl.noise.trans_sigma = json_get(m, "trans_sigma", s.mcl.noise.trans_sigma, "scenario.mcl");
        s.mcl.noise.rot_sigma = json_get(m, "rot_sigma", s.mcl.noise.rot_sigma, "scenario.mcl");
        if (s.mcl.particles < 1)
            throw ConfigError("scenario.mcl.particles: must be >= 1");
    }
    if (s.bio.beam_stride < 1 || s.mcl.beam_stride < 1)
        throw ConfigError("scenario: beam_stride must be >= 1");
    if (j.contains("landmarks"))
        s.landmarks_path = base_dir / json_get<std::string>(j, "landmarks", "", "scenario");
    return s;
}

inline ScenarioFile load_scenario(const std::filesystem::path& p)
{
    const std::string text = detail::read_file(p);
    try {
        return parse_scenario(nlohmann::json::parse(text), p.parent_path());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- world assembly

/// Map, simulator scenario and landmark store ready for a run.
struct World {
    std::shared_ptr<const OccupancyGrid> map;
    std::optional<Maze> maze;
    Scenario scenario;
    std::vector<TruthRow> mapping_trajectory;  ///< noiseless tour used for the landmark pass
    LandmarkStore store;
    Adjacency adjacency;
    NetworkGeometry geometry;
};

/// Noiseless truth poses of a scenario, with the waypoint each was heading for.
inline std::vector<std::pair<TruthRow, std::size_t>> noiseless_truth(const std::shared_ptr<const OccupancyGrid>& map,
                                                                     Scenario sc, long steps)
{
    sc.odometry = {0.0, 0.0};
    sc.lidar.noise_sigma = 0.0;
    sc.steps = steps;
    Simulator sim(map, sc);
    std::vector<std::pair<TruthRow, std::size_t>> out;
    out.reserve(static_cast<std::size_t>(steps));
    // the truth motion is noise-free, so scans are not needed here
    while (!sim.done()) {
        sim.advance_truth();
        out.push_back({{sim.t(), sim.true_pose()}, sim.current_waypoint()});
    }
    return out;
}

/// Landmark extracted from a noiseless scan at `p`, if any.
inline std::optional<Landmark> landmark_at(const OccupancyGrid& map, const Pose& p, const LidarSpec& lidar,
                                           const LandmarkConfig& cfg = {})
{
    std::mt19937_64 rng(0);
    return landmark_from_scan(simulate_scan(map, p, lidar.beams, lidar.fov, lidar.max_range, 0.0, rng), cfg);
}

/// A pose counts as landmark-visible when its noiseless scan matches a stored
/// landmark anchored within 3 k_xy and two heading cells of the pose.
inline bool landmark_visible(const World& w, const Pose& p)
{
    const auto lm = landmark_at(*w.map, p, w.scenario.lidar);
    if (!lm)
        return false;
    const auto m = match_landmark(w.store, *lm);
    if (!m)
        return false;
    for (const auto& l : w.adjacency.links) {
        if (l.lv_id != m->id)
            continue;
        const Pose a = cell_to_pose(l.cell, w.geometry);
        if (planar_distance(a, p) <= 3.0 * w.geometry.k_xy &&
            std::abs(normalize_angle(a.theta - p.theta)) <= 2.0 * w.geometry.k_theta)
            return true;
    }
    return false;
}

/// Turns a ScenarioFile into a runnable world: builds or loads the map,
/// expands tours, builds the landmark store from the noiseless tour unless a
/// store file is given, and resolves 'short'/'long' kidnap targets to tour
/// poses whose landmark is recognised by the store.
inline World build_world(const ScenarioFile& f, std::optional<std::filesystem::path> landmarks_override = {})
{
    World w;
    if (f.maze) {
        w.maze = generate_maze(*f.maze);
        w.map = std::make_shared<const OccupancyGrid>(w.maze->grid);
    } else {
        w.map = std::make_shared<const OccupancyGrid>(load_map(f.map_path));
    }
    const OccupancyGrid& map = *w.map;
    w.geometry = f.bio.k_xy ? geometry_for_extent(map.max_abs_coord(), *f.bio.k_xy, f.bio.n_theta,
                                                  KernelConfig{}.max_planar_radius())
                            : default_geometry(map, KernelConfig{}, f.bio.n_theta);

    Scenario& sc = w.scenario;
    sc.name = f.name;
    sc.steps = f.steps;
    sc.seed = f.seed;
    sc.odometry = f.odometry;
    sc.lidar = f.lidar;
    sc.loop_waypoints = f.loop_waypoints;
    sc.waypoints = f.waypoints;
    if (f.tour_seed) {
        if (f.start_room >= w.maze->room_centers.size())
            throw ConfigError("scenario.start_room: no such room");
        sc.waypoints = room_tour(*w.maze, f.start_room, f.steps, *f.tour_seed);
        if (sc.waypoints.empty())
            throw ConfigError("scenario.tour: no room is reachable from the start room");
    }
    if (f.initial_pose) {
        sc.initial_pose = *f.initial_pose;
    } else if (w.maze) {
        const auto [x, y] = w.maze->room_centers.at(f.start_room);
        sc.initial_pose = Pose(x, y, std::atan2(sc.waypoints.front().y - y, sc.waypoints.front().x - x));
    } else {
        throw ConfigError("scenario.initial_pose: required with a map file");
    }
    if (!is_free_world(map, sc.initial_pose.x, sc.initial_pose.y))
        throw ConfigError("scenario.initial_pose: not in free space");
    for (std::size_t i = 0; i < sc.waypoints.size(); ++i)
        if (!is_free_world(map, sc.waypoints[i].x, sc.waypoints[i].y))
            throw ConfigError("scenario.waypoints[" + std::to_string(i) + "]: not in free space");

    const auto tour = noiseless_truth(w.map, sc, f.steps);
    w.mapping_trajectory.push_back({0, sc.initial_pose});
    for (const auto& [row, wp] : tour)
        w.mapping_trajectory.push_back(row);

    const auto store_path = landmarks_override ? *landmarks_override : f.landmarks_path;
    if (!store_path.empty()) {
        std::tie(w.store, w.adjacency) = load_landmarks(store_path);
        for (const auto& l : w.adjacency.links)
            if (!w.geometry.contains(l.cell))
                throw ConfigError("landmarks: anchor outside the pose cell network of this map");
    } else {
        std::vector<Pose> poses;
        std::vector<LidarScan> scans;
        std::mt19937_64 rng(0);
        for (const auto& r : w.mapping_trajectory) {
            poses.push_back(r.pose);
            scans.push_back(simulate_scan(map, r.pose, sc.lidar.beams, sc.lidar.fov, sc.lidar.max_range, 0.0, rng));
        }
        std::tie(w.store, w.adjacency) = run_mapping_pass(map, poses, scans, w.geometry);
    }

    for (std::size_t i = 0; i < f.kidnaps.size(); ++i) {
        const auto& k = f.kidnaps[i];
        KidnapEvent ev{k.step, k.pose, k.resume_waypoint};
        if (k.kind != KidnapKind::explicit_pose) {
            // truth with the kidnaps resolved so far
            const auto run = noiseless_truth(w.map, sc, f.steps);
            const Pose at = run[static_cast<std::size_t>(k.step - 1)].first.pose;
            std::optional<std::pair<TruthRow, std::size_t>> best;
            double best_key = 0.0;
            for (const auto& cand : run) {
                const double d = planar_distance(cand.first.pose, at);
                const bool ok = k.kind == KidnapKind::short_range ? (d >= 1.0 && d < 2.0) : d >= 5.0;
                if (!ok)
                    continue;
                if (!landmark_visible(w, cand.first.pose))
                    continue;
                // short: earliest qualifying pose; long: the farthest one
                const double key = k.kind == KidnapKind::short_range ? -static_cast<double>(cand.first.t) : d;
                if (!best || key > best_key) {
                    best = cand;
                    best_key = key;
                }
            }
            if (!best)
                throw ConfigError("scenario.kidnaps[" + std::to_string(i) + "]: no landmark-visible target found");
            ev.pose = best->first.pose;
            ev.resume_waypoint = best->second;
        }
        if (!is_free_world(map, ev.pose.x, ev.pose.y))
            throw ConfigError("scenario.kidnaps[" + std::to_string(i) + "].pose: not in free space");
        sc.kidnaps.push_back(ev);
    }
    return w;
}

// ---------------------------------------------------------------- runs

enum class Method { bio, mcl, both };

struct RunOptions {
    Method method = Method::both;
    std::uint64_t seed = 1;  ///< overrides the scenario's noise seed
    std::optional<bool> enable_lv;
    std::optional<PathIntegrationMode> pi_mode;
    std::optional<int> particles;
    /// Called after every bio step; used for debug dumps.
    std::function<void(long, const Localizer&)> on_bio_step;
};

struct MethodReport {
    std::string method;
    std::vector<TraceRow> trace;
    ErrorSummary errors;
    long convergence_step = -1;            ///< first step of a sustained < 3 k_xy error run
    std::vector<long> recovery_steps;      ///< per kidnap; -1 when not recovered
    int resets = 0;                        ///< degenerate-belief reseeds (bio) or weight resets (mcl)
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<TruthRow> truth;
    std::vector<long> kidnap_steps;
    std::vector<MethodReport> methods;
    double threshold = 0.0;  ///< 3 k_xy

    const MethodReport* find(const std::string& m) const
    {
        for (const auto& r : methods)
            if (r.method == m)
                return &r;
        return nullptr;
    }
};

inline constexpr std::size_t kSettleSteps = 20;

inline void finish_report(MethodReport& m, const RunReport& r)
{
    m.errors = evaluate(m.trace, r.truth);
    const auto d = distance_errors(m.trace, r.truth);
    m.convergence_step = settle_index(d, r.threshold, kSettleSteps);
    if (m.convergence_step >= 0)
        m.convergence_step = r.truth[static_cast<std::size_t>(m.convergence_step)].t;
    for (long k : r.kidnap_steps) {
        const long idx = settle_index(d, r.threshold, kSettleSteps, static_cast<std::size_t>(k - 1));
        m.recovery_steps.push_back(idx < 0 ? -1 : r.truth[static_cast<std::size_t>(idx)].t - k);
    }
}

inline LocalizerConfig bio_config(const World& w, const ScenarioFile& f, const RunOptions& o)
{
    LocalizerConfig cfg;
    cfg.geometry = w.geometry;
    cfg.beam_stride = f.bio.beam_stride;
    if (f.bio.s_v)
        cfg.s_v = *f.bio.s_v;
    cfg.enable_lv = o.enable_lv.value_or(f.bio.enable_lv);
    cfg.pi_mode = o.pi_mode.value_or(f.bio.pi_mode);
    cfg.init.seed = o.seed;
    if (f.initial_estimate) {
        cfg.init.mode = InitialEstimate::Mode::gaussian;
        cfg.init.pose = w.scenario.initial_pose;
    } else {
        cfg.init.mode = InitialEstimate::Mode::uniform;
    }
    return cfg;
}

inline MclConfig mcl_config(const World& w, const ScenarioFile& f, const RunOptions& o)
{
    MclConfig c;
    c.particles = o.particles.value_or(f.mcl.particles);
    c.noise = f.mcl.noise;
    c.beam_stride = f.mcl.beam_stride;
    c.seed = o.seed * 7919 + 17;
    c.uniform_init = !f.initial_estimate;
    c.pose0 = w.scenario.initial_pose;
    return c;
}

/// Runs one seeded trial: both methods consume the identical simulated stream.
inline RunReport run_scenario(const World& w, const ScenarioFile& f, const RunOptions& o)
{
    RunReport r;
    r.scenario = f.name;
    r.seed = o.seed;
    r.threshold = 3.0 * w.geometry.k_xy;
    for (const auto& k : w.scenario.kidnaps)
        r.kidnap_steps.push_back(k.step);

    Scenario sc = w.scenario;
    sc.seed = o.seed;
    Simulator sim(w.map, sc);

    std::optional<Localizer> bio;
    std::optional<MclLocalizer> mcl;
    MethodReport bio_rep{"bio", {}, {}, -1, {}, 0};
    MethodReport mcl_rep{"mcl", {}, {}, -1, {}, 0};
    if (o.method != Method::mcl) {
        const auto cfg = bio_config(w, f, o);
        if (cfg.enable_lv && w.store.empty())
            std::fprintf(stderr, "warning: landmark store is empty; local view injection has no effect\n");
        bio.emplace(w.map, cfg, w.store, w.adjacency);
    }
    if (o.method != Method::bio)
        mcl.emplace(w.map, w.geometry, mcl_config(w, f, o));

    while (!sim.done()) {
        const SimSample s = sim.step();
        r.truth.push_back({s.t, s.true_pose});
        if (bio) {
            const auto e = bio->step(s.odom, s.scan);
            bio_rep.trace.push_back({s.t, e.pose, e.confidence, e.converged, e.lv_id, e.injected_mass});
            bio_rep.resets += e.recovered ? 1 : 0;
            if (o.on_bio_step)
                o.on_bio_step(s.t, *bio);
        }
        if (mcl) {
            const auto e = mcl->step(s.odom, s.scan);
            mcl_rep.trace.push_back({s.t, e.pose, e.confidence, e.converged, -1, 0.0});
            mcl_rep.resets += e.reset ? 1 : 0;
        }
    }
    if (bio) {
        finish_report(bio_rep, r);
        r.methods.push_back(std::move(bio_rep));
    }
    if (mcl) {
        finish_report(mcl_rep, r);
        r.methods.push_back(std::move(mcl_rep));
    }
    return r;
}

// ---------------------------------------------------------------- report files

inline constexpr const char* kSummaryHeader =
    "scenario,method,seed,rows,mean_abs_dx,mean_abs_dy,mean_distance,rmse,convergence_step,recovery_steps,resets";

inline void write_summary_rows(std::ostream& out, const RunReport& r)
{
    for (const auto& m : r.methods) {
        out << r.scenario << ',' << m.method << ',' << r.seed << ',' << m.errors.rows << ','
            << detail::format_double(m.errors.mean_abs_dx) << ',' << detail::format_double(m.errors.mean_abs_dy)
            << ',' << detail::format_double(m.errors.mean_distance) << ',' << detail::format_double(m.errors.rmse)
            << ',' << m.convergence_step << ',';
        for (std::size_t i = 0; i < m.recovery_steps.size(); ++i)
            out << (i ? ";" : "") << m.recovery_steps[i];
        out << ',' << m.resets << '\n';
    }
}

/// Whitespace-separated columns for gnuplot: t, truth, then per method
/// estimate, distance error and confidence.
inline void write_gnuplot_columns(std::ostream& out, const RunReport& r)
{
    out << "# t true_x true_y";
    for (const auto& m : r.methods)
        out << ' ' << m.method << "_x " << m.method << "_y " << m.method << "_err " << m.method << "_conf";
    out << '\n';
    for (std::size_t i = 0; i < r.truth.size(); ++i) {
        out << r.truth[i].t << ' ' << detail::format_double(r.truth[i].pose.x) << ' '
            << detail::format_double(r.truth[i].pose.y);
        for (const auto& m : r.methods) {
            const auto& e = m.trace[i];
            out << ' ' << detail::format_double(e.estimate.x) << ' ' << detail::format_double(e.estimate.y) << ' '
                << detail::format_double(planar_distance(e.estimate, r.truth[i].pose)) << ' '
                << detail::format_double(e.confidence);
        }
        out << '\n';
    }
}

/// Table with the X / Y / Distance / RMSE columns plus pairwise reductions.
inline void write_error_table(std::ostream& out, const std::vector<std::pair<std::string, ErrorSummary>>& rows)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s %10s\n", "method", "X (m)", "Y (m)", "Distance", "RMSE");
    out << buf;
    for (const auto& [name, s] : rows) {
        std::snprintf(buf, sizeof buf, "%-16s %10.4f %10.4f %10.4f %10.4f\n", name.c_str(), s.mean_abs_dx,
                      s.mean_abs_dy, s.mean_distance, s.rmse);
        out << buf;
    }
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < rows.size(); ++b) {
            if (a == b || !(rows[b].second.mean_distance > 0.0))
                continue;
            std::snprintf(buf, sizeof buf, "reduction %s vs %s: %.1f%% (%.4f m -> %.4f m)\n", rows[a].first.c_str(),
                          rows[b].first.c_str(),
                          percent_reduction(rows[b].second.mean_distance, rows[a].second.mean_distance),
                          rows[b].second.mean_distance, rows[a].second.mean_distance);
            out << buf;
        }
}

}  // namespace bioloc
