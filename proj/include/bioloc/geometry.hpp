#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bioloc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [-pi, pi). Throws std::invalid_argument on NaN/inf.
inline double normalize_angle(double a)
{
    if (!std::isfinite(a))
        throw std::invalid_argument("normalize_angle: non-finite angle");
    double r = a - kTwoPi * std::floor((a + kPi) / kTwoPi);
    // floor() can leave r one ulp outside the half-open interval
    if (r >= kPi)
        r -= kTwoPi;
    if (r < -kPi)
        r += kTwoPi;
    return r;
}

/// Robot pose in the world frame. theta is kept in [-pi, pi).
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose() = default;
    Pose(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

    void set_theta(double t) { theta = normalize_angle(t); }

    friend bool operator==(const Pose&, const Pose&) = default;
};

inline double planar_distance(const Pose& a, const Pose& b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Odometry increment between two consecutive poses. The world-frame part
/// is (dx, dy, dtheta); forward/lateral is the same planar motion expressed
/// in the frame of the earlier pose.
struct PoseDelta {
    double dx = 0.0;
    double dy = 0.0;
    double dtheta = 0.0;
    double forward = 0.0;
    double lateral = 0.0;

    static PoseDelta from_robot_frame(double forward, double lateral, double dtheta, double heading)
    {
        const double c = std::cos(heading), s = std::sin(heading);
        return {forward * c - lateral * s, forward * s + lateral * c, normalize_angle(dtheta), forward,
                lateral};
    }

    friend bool operator==(const PoseDelta&, const PoseDelta&) = default;
};

inline PoseDelta compose_delta(const Pose& prev, const Pose& cur)
{
    PoseDelta d;
    d.dx = cur.x - prev.x;
    d.dy = cur.y - prev.y;
    d.dtheta = normalize_angle(cur.theta - prev.theta);
    const double c = std::cos(prev.theta), s = std::sin(prev.theta);
    d.forward = c * d.dx + s * d.dy;
    d.lateral = -s * d.dx + c * d.dy;
    return d;
}

/// Applies a robot-frame delta to a pose.
inline Pose apply_delta(const Pose& p, double forward, double lateral, double dtheta)
{
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    return {p.x + forward * c - lateral * s, p.y + forward * s + lateral * c, p.theta + dtheta};
}

/// Index of a pose cell: (x', y', theta').
struct CellIndex {
    int xp = 0;
    int yp = 0;
    int tp = 0;

    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Resolution and size of the pose cell network. The network is centred on
/// the world origin: world (0, 0) falls at planar index n_xy / 2.
struct NetworkGeometry {
    double k_xy = 0.1;
    double k_theta = kTwoPi / 36.0;
    int n_xy = 100;
    int n_theta = 36;

    NetworkGeometry() = default;
    NetworkGeometry(double kxy, double ktheta, int nxy, int ntheta)
        : k_xy(kxy), k_theta(ktheta), n_xy(nxy), n_theta(ntheta)
    {
        validate();
    }

    /// Geometry with n_theta heading cells spanning the full circle.
    static NetworkGeometry with_headings(double kxy, int nxy, int ntheta)
    {
        return {kxy, kTwoPi / ntheta, nxy, ntheta};
    }

    void validate() const
    {
        if (!(k_xy > 0.0) || !(k_theta > 0.0))
            throw std::invalid_argument("NetworkGeometry: cell sizes must be positive");
        if (n_xy < 2 || n_theta < 2)
            throw std::invalid_argument("NetworkGeometry: need at least 2 cells per axis");
        if (std::abs(n_theta * k_theta - kTwoPi) > 1e-9)
            throw std::invalid_argument("NetworkGeometry: n_theta * k_theta must equal 2*pi");
    }

    std::size_t cell_count() const
    {
        return static_cast<std::size_t>(n_xy) * static_cast<std::size_t>(n_xy) *
               static_cast<std::size_t>(n_theta);
    }

    bool contains(const CellIndex& c) const
    {
        return c.xp >= 0 && c.xp < n_xy && c.yp >= 0 && c.yp < n_xy && c.tp >= 0 && c.tp < n_theta;
    }

    /// Heading of the centre of heading layer tp.
    double layer_heading(int tp) const { return normalize_angle((tp + 0.5 - n_theta / 2.0) * k_theta); }

    /// Half-extent of the network along x/y in metres.
    double half_extent() const { return 0.5 * n_xy * k_xy; }

    friend bool operator==(const NetworkGeometry&, const NetworkGeometry&) = default;
};

/// Geometry large enough to hold every point within `max_abs_coord` metres
/// of the origin plus `margin_cells` on each side; n_xy is rounded up to even.
inline NetworkGeometry geometry_for_extent(double max_abs_coord, double k_xy, int n_theta, int margin_cells)
{
    int n = 2 * static_cast<int>(std::ceil(max_abs_coord / k_xy - 1e-9)) + 2 * margin_cells;
    if (n % 2 != 0)
        ++n;
    return NetworkGeometry::with_headings(k_xy, std::max(n, 2), n_theta);
}

inline CellIndex pose_to_cell(const Pose& p, const NetworkGeometry& g)
{
    const auto planar = [&](double v, const char* axis) {
        const double u = std::floor(v / g.k_xy + g.n_xy / 2.0);
        if (!(u >= 0.0 && u < g.n_xy))
            throw std::out_of_range(std::string("pose_to_cell: ") + axis + " coordinate outside network extent");
        return static_cast<int>(u);
    };
    const int xp = planar(p.x, "x");
    const int yp = planar(p.y, "y");
    int tp = static_cast<int>(std::floor(p.theta / g.k_theta + g.n_theta / 2.0)) % g.n_theta;
    if (tp < 0)
        tp += g.n_theta;
    return {xp, yp, tp};
}

/// Pose at the centre of cell c.
inline Pose cell_to_pose(const CellIndex& c, const NetworkGeometry& g)
{
    if (!g.contains(c))
        throw std::out_of_range("cell_to_pose: invalid cell index");
    return {(c.xp + 0.5 - g.n_xy / 2.0) * g.k_xy, (c.yp + 0.5 - g.n_xy / 2.0) * g.k_xy,
            (c.tp + 0.5 - g.n_theta / 2.0) * g.k_theta};
}

/// Weighted circular mean; returns 0 when the weights cancel out.
template <typename Range, typename AngleOf, typename WeightOf>
double circular_mean(const Range& items, AngleOf angle_of, WeightOf weight_of)
{
    double s = 0.0, c = 0.0;
    for (const auto& it : items) {
        const double w = weight_of(it);
        const double a = angle_of(it);
        s += w * std::sin(a);
        c += w * std::cos(a);
    }
    if (s == 0.0 && c == 0.0)
        return 0.0;
    return normalize_angle(std::atan2(s, c));
}

}  // namespace bioloc
