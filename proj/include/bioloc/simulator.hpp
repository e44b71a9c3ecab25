#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid_map.hpp"
#include "observation.hpp"

namespace bioloc {

/// Parameters of a generated maze: a grid of rooms joined by doorways,
/// decorated with wall stubs and pillars for corner features.
struct MazeSpec {
    double width = 15.0;   ///< metres
    double height = 15.0;
    double resolution = 0.1;
    int rooms_x = 3;
    int rooms_y = 3;
    int wall_cells = 2;        ///< wall thickness
    double door_width = 1.0;
    int extra_doors = 2;       ///< doors beyond the spanning tree, creating loops
    int features_per_room = 2;
    int symmetric_rows = 0;    ///< bottom room rows mirrored left to right
    std::uint64_t seed = 1;

    void validate() const
    {
        if (width < 3.0 || height < 3.0)
            throw ConfigError("maze: width and height must be at least 3 m");
        if (!(resolution > 0.0))
            throw ConfigError("maze: resolution must be positive");
        if (rooms_x < 1 || rooms_y < 1)
            throw ConfigError("maze: need at least one room per axis");
        if (wall_cells < 1)
            throw ConfigError("maze: wall_cells must be >= 1");
        if (width / rooms_x < 2.0 || height / rooms_y < 2.0)
            throw ConfigError("maze: rooms smaller than 2 m");
        if (door_width < 2 * resolution || door_width > std::min(width / rooms_x, height / rooms_y) - 0.8)
            throw ConfigError("maze: door_width does not fit the rooms");
        if (symmetric_rows < 0 || symmetric_rows > rooms_y)
            throw ConfigError("maze: symmetric_rows out of range");
        if (extra_doors < 0 || features_per_room < 0)
            throw ConfigError("maze: counts must be non-negative");
    }
};

/// 4-connected flood fill over free cells from (sx, sy); returns a mask.
inline std::vector<std::uint8_t> flood_fill(const OccupancyGrid& m, int sx, int sy, double occ_threshold = 0.5)
{
    std::vector<std::uint8_t> seen(m.cells.size(), 0);
    if (!m.in_bounds(sx, sy) || m.at(sx, sy) >= occ_threshold)
        return seen;
    std::deque<std::pair<int, int>> q{{sx, sy}};
    seen[static_cast<std::size_t>(sy) * m.width + sx] = 1;
    while (!q.empty()) {
        const auto [x, y] = q.front();
        q.pop_front();
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (!m.in_bounds(nx, ny) || m.at(nx, ny) >= occ_threshold)
                continue;
            auto& s = seen[static_cast<std::size_t>(ny) * m.width + nx];
            if (!s) {
                s = 1;
                q.emplace_back(nx, ny);
            }
        }
    }
    return seen;
}

/// True when every free cell is reachable from every other.
inline bool free_space_connected(const OccupancyGrid& m, double occ_threshold = 0.5)
{
    std::size_t first = m.cells.size();
    std::size_t free = 0;
    for (std::size_t i = 0; i < m.cells.size(); ++i) {
        if (m.cells[i] < occ_threshold) {
            ++free;
            first = std::min(first, i);
        }
    }
    if (free == 0)
        return false;
    const auto seen = flood_fill(m, static_cast<int>(first % static_cast<std::size_t>(m.width)),
                                 static_cast<int>(first / static_cast<std::size_t>(m.width)), occ_threshold);
    return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1)) == free;
}

/// Map with every cell within `clearance` metres of an obstacle marked occupied.
inline OccupancyGrid inflate(const OccupancyGrid& m, double clearance, double occ_threshold = 0.5)
{
    OccupancyGrid out = m;
    const int r = static_cast<int>(std::ceil(clearance / m.resolution));
    std::vector<std::pair<int, int>> disc;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if ((dx * dx + dy * dy) * m.resolution * m.resolution <= clearance * clearance)
                disc.emplace_back(dx, dy);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (m.at(x, y) < occ_threshold)
                continue;
            for (const auto& [dx, dy] : disc)
                if (out.in_bounds(x + dx, y + dy))
                    out.at(x + dx, y + dy) = 1.0;
        }
    return out;
}

namespace detail {

inline bool segment_clear(const OccupancyGrid& inflated, double x0, double y0, double x1, double y1)
{
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * inflated.resolution))));
    for (int i = 0; i <= n; ++i) {
        const double f = static_cast<double>(i) / n;
        if (!is_free_world(inflated, x0 + f * (x1 - x0), y0 + f * (y1 - y0)))
            return false;
    }
    return true;
}

}  // namespace detail

/// Shortest 8-connected grid path on the inflated map, simplified to
/// line-of-sight waypoints (excluding the start). Empty when unreachable.
inline std::vector<std::pair<double, double>> plan_path(const OccupancyGrid& inflated, double x0, double y0,
                                                        double x1, double y1)
{
    const auto [sx, sy] = world_to_grid(inflated, x0, y0);
    const auto [gx, gy] = world_to_grid(inflated, x1, y1);
    if (!inflated.in_bounds(sx, sy) || !inflated.in_bounds(gx, gy) || inflated.at(sx, sy) >= 0.5 ||
        inflated.at(gx, gy) >= 0.5)
        return {};
    const int w = inflated.width;
    auto id = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    std::vector<int> parent(inflated.cells.size(), -1);
    std::deque<std::pair<int, int>> q{{sx, sy}};
    parent[id(sx, sy)] = static_cast<int>(id(sx, sy));
    // BFS on 8-neighbourhood; the line-of-sight pass removes the staircase
    while (!q.empty() && parent[id(gx, gy)] < 0) {
        const auto [x, y] = q.front();
        q.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0)
                    continue;
                const int nx = x + dx, ny = y + dy;
                if (!inflated.in_bounds(nx, ny) || inflated.at(nx, ny) >= 0.5 || parent[id(nx, ny)] >= 0)
                    continue;
                if (dx != 0 && dy != 0 && (inflated.at(x + dx, y) >= 0.5 || inflated.at(x, y + dy) >= 0.5))
                    continue;
                parent[id(nx, ny)] = static_cast<int>(id(x, y));
                q.emplace_back(nx, ny);
            }
    }
    if (parent[id(gx, gy)] < 0)
        return {};
    std::vector<std::pair<double, double>> cells;
    for (std::size_t c = id(gx, gy);; c = static_cast<std::size_t>(parent[c])) {
        cells.push_back(inflated.cell_center(static_cast<int>(c % w), static_cast<int>(c / w)));
        if (c == id(sx, sy))
            break;
    }
    std::reverse(cells.begin(), cells.end());
    cells.front() = {x0, y0};
    cells.back() = {x1, y1};

    std::vector<std::pair<double, double>> out;
    std::size_t at = 0;
    while (at + 1 < cells.size()) {
        std::size_t next = at + 1;
        for (std::size_t k = cells.size() - 1; k > at + 1; --k) {
            if (detail::segment_clear(inflated, cells[at].first, cells[at].second, cells[k].first, cells[k].second)) {
                next = k;
                break;
            }
        }
        out.push_back(cells[next]);
        at = next;
    }
    return out;
}

/// Generated maze plus the room layout that produced it.
struct Maze {
    OccupancyGrid grid;
    std::vector<std::pair<double, double>> room_centers;  ///< row-major, bottom row first
    int rooms_x = 1;
    int rooms_y = 1;
};

namespace detail {

struct MazeBuilder {
    const MazeSpec& spec;
    std::mt19937_64 rng;
    int W, H, t;
    std::vector<int> xs, ys;  // room boundary lines (cell coordinates of wall centres)
    OccupancyGrid g;

    explicit MazeBuilder(const MazeSpec& s, std::uint64_t seed)
        : spec(s), rng(seed), W(static_cast<int>(std::lround(s.width / s.resolution))),
          H(static_cast<int>(std::lround(s.height / s.resolution))), t(s.wall_cells),
          g(W, H, s.resolution, Pose(-0.5 * W * s.resolution, -0.5 * H * s.resolution, 0.0))
    {
        for (int i = 0; i <= s.rooms_x; ++i)
            xs.push_back(static_cast<int>(std::lround(static_cast<double>(i) * W / s.rooms_x)));
        for (int j = 0; j <= s.rooms_y; ++j)
            ys.push_back(static_cast<int>(std::lround(static_cast<double>(j) * H / s.rooms_y)));
    }

    void fill(int x0, int y0, int x1, int y1, double v)  // half-open box, clipped
    {
        for (int y = std::max(0, y0); y < std::min(H, y1); ++y)
            for (int x = std::max(0, x0); x < std::min(W, x1); ++x)
                g.at(x, y) = v;
    }

    // wall band around boundary line k on an axis with n cells
    std::pair<int, int> band(const std::vector<int>& lines, std::size_t k, int n) const
    {
        if (k == 0)
            return {0, t};
        if (k + 1 == lines.size())
            return {n - t, n};
        return {lines[k] - t / 2, lines[k] - t / 2 + t};
    }

    // interior cell span of room i along an axis
    std::pair<int, int> interior(const std::vector<int>& lines, std::size_t i, int n) const
    {
        return {band(lines, i, n).second, band(lines, i + 1, n).first};
    }

    int uniform(int lo, int hi)  // inclusive
    {
        if (hi < lo)
            return lo;
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    }

    std::pair<double, double> room_center(int i, int j) const
    {
        const auto [x0, x1] = interior(xs, static_cast<std::size_t>(i), W);
        const auto [y0, y1] = interior(ys, static_cast<std::size_t>(j), H);
        return {g.origin.x + 0.5 * (x0 + x1) * g.resolution, g.origin.y + 0.5 * (y0 + y1) * g.resolution};
    }

    void walls()
    {
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const auto [a, b] = band(xs, k, W);
            fill(a, 0, b, H, 1.0);
        }
        for (std::size_t k = 0; k < ys.size(); ++k) {
            const auto [a, b] = band(ys, k, H);
            fill(0, a, W, b, 1.0);
        }
    }

    // Opens a doorway between room (i, j) and its right (horizontal=true) or upper neighbour.
    void door(int i, int j, bool horizontal)
    {
        const int dw = static_cast<int>(std::lround(spec.door_width / spec.resolution));
        const int margin = static_cast<int>(std::lround(0.4 / spec.resolution));
        if (horizontal) {
            const auto [a, b] = band(xs, static_cast<std::size_t>(i + 1), W);
            const auto [y0, y1] = interior(ys, static_cast<std::size_t>(j), H);
            const int pos = uniform(y0 + margin, y1 - margin - dw);
            fill(a, pos, b, pos + dw, 0.0);
        } else {
            const auto [a, b] = band(ys, static_cast<std::size_t>(j + 1), H);
            const auto [x0, x1] = interior(xs, static_cast<std::size_t>(i), W);
            const int pos = uniform(x0 + margin, x1 - margin - dw);
            fill(pos, a, pos + dw, b, 0.0);
        }
    }

    void doors()
    {
        const int nx = spec.rooms_x, ny = spec.rooms_y;
        struct Edge {
            int i, j;
            bool horizontal;
        };
        std::vector<Edge> edges;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (i + 1 < nx)
                    edges.push_back({i, j, true});
                if (j + 1 < ny)
                    edges.push_back({i, j, false});
            }
        std::shuffle(edges.begin(), edges.end(), rng);
        // Kruskal spanning tree over rooms, then a few extra doors for loops
        std::vector<int> parent(static_cast<std::size_t>(nx * ny));
        for (std::size_t k = 0; k < parent.size(); ++k)
            parent[k] = static_cast<int>(k);
        auto find = [&](int a) {
            while (parent[static_cast<std::size_t>(a)] != a)
                a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            return a;
        };
        std::vector<Edge> unused;
        for (const auto& e : edges) {
            const int a = find(e.j * nx + e.i);
            const int b = find(e.horizontal ? e.j * nx + e.i + 1 : (e.j + 1) * nx + e.i);
            if (a != b) {
                parent[static_cast<std::size_t>(a)] = b;
                door(e.i, e.j, e.horizontal);
            } else {
                unused.push_back(e);
            }
        }
        for (int k = 0; k < spec.extra_doors && k < static_cast<int>(unused.size()); ++k)
            door(unused[static_cast<std::size_t>(k)].i, unused[static_cast<std::size_t>(k)].j,
                 unused[static_cast<std::size_t>(k)].horizontal);
    }

    bool centers_reachable() const
    {
        const OccupancyGrid inflated = inflate(g, 0.3);
        const auto [cx, cy] = room_center(0, 0);
        const auto [sx, sy] = world_to_grid(inflated, cx, cy);
        const auto seen = flood_fill(inflated, sx, sy);
        for (int j = 0; j < spec.rooms_y; ++j)
            for (int i = 0; i < spec.rooms_x; ++i) {
                const auto [x, y] = room_center(i, j);
                const auto [ix, iy] = world_to_grid(inflated, x, y);
                if (!inflated.in_bounds(ix, iy) || !seen[static_cast<std::size_t>(iy) * W + ix])
                    return false;
            }
        return true;
    }

    void features()
    {
        for (int j = 0; j < spec.rooms_y; ++j)
            for (int i = 0; i < spec.rooms_x; ++i)
                for (int f = 0; f < spec.features_per_room; ++f)
                    feature(i, j);
    }

    void feature(int i, int j)
    {
        const auto [x0, x1] = interior(xs, static_cast<std::size_t>(i), W);
        const auto [y0, y1] = interior(ys, static_cast<std::size_t>(j), H);
        const auto cells = [&](double m) { return static_cast<int>(std::lround(m / spec.resolution)); };
        const OccupancyGrid before = g;
        const int kind = uniform(0, 1);
        if (kind == 0) {
            // wall stub growing out of one side of the room
            const int len = uniform(cells(0.6), std::max(cells(0.6), std::min(cells(1.4), (std::min(x1 - x0, y1 - y0)) / 3)));
            const int side = uniform(0, 3);
            if (side < 2) {
                const int y = uniform(y0 + cells(0.6), y1 - cells(0.6) - t);
                if (side == 0)
                    fill(x0, y, x0 + len, y + t, 1.0);
                else
                    fill(x1 - len, y, x1, y + t, 1.0);
            } else {
                const int x = uniform(x0 + cells(0.6), x1 - cells(0.6) - t);
                if (side == 2)
                    fill(x, y0, x + t, y0 + len, 1.0);
                else
                    fill(x, y1 - len, x + t, y1, 1.0);
            }
        } else {
            // free-standing pillar, kept off the walls and the room centre
            const int s = uniform(cells(0.3), cells(0.6));
            const int px = uniform(x0 + cells(0.7), x1 - cells(0.7) - s);
            const int py = uniform(y0 + cells(0.7), y1 - cells(0.7) - s);
            const int cx = (x0 + x1) / 2, cy = (y0 + y1) / 2;
            if (std::abs(px + s / 2 - cx) < cells(0.6) && std::abs(py + s / 2 - cy) < cells(0.6))
                return;
            fill(px, py, px + s, py + s, 1.0);
        }
        // keep the room centre clear and every room reachable
        const auto [cx, cy] = room_center(i, j);
        if (!is_free_world(inflate(g, 0.3), cx, cy) || !centers_reachable() || !free_space_connected(g))
            g = before;
    }

    void mirror_rows()
    {
        if (spec.symmetric_rows <= 0)
            return;
        const int top = band(ys, static_cast<std::size_t>(spec.symmetric_rows), H).first;
        for (int y = 0; y < top; ++y)
            for (int x = 0; x < W / 2; ++x)
                g.at(W - 1 - x, y) = g.at(x, y);
    }
};

}  // namespace detail

/// Builds a maze from the spec. Deterministic for a given seed; throws
/// ConfigError when no connected layout is found.
inline Maze generate_maze(const MazeSpec& spec)
{
    spec.validate();
    for (std::uint64_t attempt = 0; attempt < 50; ++attempt) {
        detail::MazeBuilder b(spec, spec.seed * 1000003ULL + attempt);
        b.walls();
        b.doors();
        b.features();
        b.mirror_rows();
        if (!free_space_connected(b.g) || !b.centers_reachable())
            continue;
        Maze m;
        m.grid = b.g;
        m.rooms_x = spec.rooms_x;
        m.rooms_y = spec.rooms_y;
        for (int j = 0; j < spec.rooms_y; ++j)
            for (int i = 0; i < spec.rooms_x; ++i)
                m.room_centers.push_back(b.room_center(i, j));
        return m;
    }
    throw ConfigError("maze: could not generate a connected layout for this spec");
}

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    long hold_until = 0;  ///< do not leave this waypoint before this step
};

struct KidnapEvent {
    long step = 0;
    Pose pose;
    std::optional<std::size_t> resume_waypoint;  ///< waypoint to head for afterwards
};

struct LidarSpec {
    int beams = 360;
    double fov = kTwoPi;
    double max_range = 8.0;
    double noise_sigma = 0.02;
};

struct OdometryNoise {
    double trans = 0.05;  ///< std per metre
    double rot = 0.05;    ///< std per radian
};

struct Scenario {
    std::string name;
    Pose initial_pose;
    std::vector<Waypoint> waypoints;
    bool loop_waypoints = true;
    OdometryNoise odometry;
    LidarSpec lidar;
    std::vector<KidnapEvent> kidnaps;
    std::uint64_t seed = 1;
    long steps = 100;
    double max_step_trans = 0.05;
    double max_step_rot = 0.05;
};

struct SimSample {
    long t = 0;
    Pose true_pose;
    PoseDelta odom;
    LidarScan scan;
    bool kidnapped = false;
};

/// Scripted robot: drives towards waypoints with capped per-step motion,
/// reports noisy odometry and scans, and applies kidnap events.
class Simulator {
public:
    Simulator(std::shared_ptr<const OccupancyGrid> map, Scenario sc)
        : map_(std::move(map)), sc_(std::move(sc)), truth_(sc_.initial_pose), odom_pose_(sc_.initial_pose),
          odom_rng_(sc_.seed * 2 + 1), lidar_rng_(sc_.seed * 2 + 2)
    {
        if (!is_free_world(*map_, truth_.x, truth_.y))
            throw ConfigError("scenario: initial_pose is not in free space");
        for (const auto& k : sc_.kidnaps)
            if (!is_free_world(*map_, k.pose.x, k.pose.y))
                throw ConfigError("scenario: kidnap target at step " + std::to_string(k.step) + " is not free");
        for (const auto& w : sc_.waypoints)
            if (!is_free_world(*map_, w.x, w.y))
                throw ConfigError("scenario: waypoint not in free space");
    }

    long t() const { return t_; }
    bool done() const { return t_ >= sc_.steps; }
    const Pose& true_pose() const { return truth_; }
    const Scenario& scenario() const { return sc_; }
    std::size_t current_waypoint() const { return wp_; }

    /// Scan at the current pose without advancing time.
    LidarScan observe() { return simulate_scan(*map_, truth_, sc_.lidar.beams, sc_.lidar.fov, sc_.lidar.max_range, sc_.lidar.noise_sigma, lidar_rng_); }

    SimSample step()
    {
        const Pose odom_before = odom_pose_;
        double fwd = 0.0, turn = 0.0;
        SimSample s;
        s.kidnapped = advance(fwd, turn);

        std::normal_distribution<double> unit(0.0, 1.0);
        const double st = sc_.odometry.trans * std::abs(fwd);
        const double sr = sc_.odometry.rot * std::abs(turn);
        double nf = fwd, nl = 0.0, nr = turn;
        if (st > 0.0) {
            nf += st * unit(odom_rng_);
            nl += st * unit(odom_rng_);
        }
        if (sr > 0.0)
            nr += sr * unit(odom_rng_);
        odom_pose_ = apply_delta(odom_before, nf, nl, nr);
        s.t = t_;
        s.odom = compose_delta(odom_before, odom_pose_);
        s.true_pose = truth_;
        s.scan = observe();
        return s;
    }

    /// Moves the true pose only; no odometry or scan, no noise drawn.
    void advance_truth()
    {
        double fwd = 0.0, turn = 0.0;
        advance(fwd, turn);
    }

private:
    // Commanded motion then any kidnap scheduled for the new step; returns
    // whether a kidnap happened.
    bool advance(double& fwd, double& turn)
    {
        if (done())
            throw std::out_of_range("Simulator: step beyond scenario length");
        ++t_;
        plan_motion(fwd, turn);
        truth_ = apply_delta(truth_, fwd, 0.0, turn);
        bool kidnapped = false;
        for (const auto& k : sc_.kidnaps) {
            if (k.step == t_) {
                truth_ = k.pose;
                if (k.resume_waypoint)
                    wp_ = *k.resume_waypoint % std::max<std::size_t>(1, sc_.waypoints.size());
                kidnapped = true;
            }
        }
        return kidnapped;
    }

    void plan_motion(double& fwd, double& turn)
    {
        fwd = turn = 0.0;
        if (wp_ >= sc_.waypoints.size())
            return;
        const Waypoint* w = &sc_.waypoints[wp_];
        double dist = std::hypot(w->x - truth_.x, w->y - truth_.y);
        if (dist < 1e-6 && t_ > w->hold_until) {
            ++wp_;
            if (wp_ >= sc_.waypoints.size()) {
                if (!sc_.loop_waypoints)
                    return;
                wp_ = 0;
            }
            w = &sc_.waypoints[wp_];
            dist = std::hypot(w->x - truth_.x, w->y - truth_.y);
        }
        if (dist < 1e-6)
            return;
        const double err = normalize_angle(std::atan2(w->y - truth_.y, w->x - truth_.x) - truth_.theta);
        turn = std::clamp(err, -sc_.max_step_rot, sc_.max_step_rot);
        if (std::abs(err) < 0.3) {
            fwd = std::min(sc_.max_step_trans, dist);
            // collision check along the short step
            const Pose cand = apply_delta(truth_, fwd, 0.0, 0.0);
            if (!is_free_world(*map_, cand.x, cand.y))
                fwd = 0.0;
        }
    }

    std::shared_ptr<const OccupancyGrid> map_;
    Scenario sc_;
    Pose truth_;
    Pose odom_pose_;
    std::mt19937_64 odom_rng_;
    std::mt19937_64 lidar_rng_;
    long t_ = 0;
    std::size_t wp_ = 0;
};

/// Waypoint tour through randomly chosen rooms, long enough for `steps`
/// steps at `step_len` metres per step. Paths keep `clearance` from walls.
inline std::vector<Waypoint> room_tour(const Maze& maze, std::size_t start_room, long steps, std::uint64_t seed,
                                       double step_len = 0.05, double clearance = 0.3)
{
    const OccupancyGrid inflated = inflate(maze.grid, clearance);
    std::mt19937_64 rng(seed);
    std::vector<Waypoint> out;
    std::size_t cur = start_room;
    double length = 0.0;
    const double needed = 1.3 * static_cast<double>(steps) * step_len;
    std::uniform_int_distribution<std::size_t> pick(0, maze.room_centers.size() - 1);
    int guard = 0;
    while (length < needed && ++guard < 10000) {
        std::size_t next = pick(rng);
        if (next == cur && maze.room_centers.size() > 1)
            continue;
        const auto [x0, y0] = maze.room_centers[cur];
        const auto [x1, y1] = maze.room_centers[next];
        const auto path = plan_path(inflated, x0, y0, x1, y1);
        if (path.empty())
            continue;
        double px = x0, py = y0;
        for (const auto& [x, y] : path) {
            length += std::hypot(x - px, y - py);
            out.push_back({x, y, 0});
            px = x;
            py = y;
        }
        cur = next;
        if (maze.room_centers.size() == 1)
            break;
    }
    return out;
}

}  // namespace bioloc
