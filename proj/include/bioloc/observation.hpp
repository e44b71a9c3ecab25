#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid_map.hpp"

namespace bioloc {

/// A planar range scan. Beam i points at angle_min + i * angle_increment in
/// the sensor frame; a range equal to max_range means "no return".
struct LidarScan {
    std::vector<double> ranges;
    double angle_min = -kPi;
    double angle_increment = kTwoPi / 360.0;
    double max_range = 8.0;

    double bearing(std::size_t i) const { return angle_min + static_cast<double>(i) * angle_increment; }
    bool is_return(std::size_t i) const { return ranges[i] < max_range; }

    void validate() const
    {
        if (ranges.empty())
            throw std::invalid_argument("LidarScan: empty scan");
        if (!(max_range > 0.0))
            throw std::invalid_argument("LidarScan: max_range must be positive");
        for (double r : ranges)
            if (!(r >= 0.0 && r <= max_range))
                throw std::invalid_argument("LidarScan: range outside [0, max_range]");
    }

    friend bool operator==(const LidarScan&, const LidarScan&) = default;
};

/// Precomputed likelihood-field lookups for one map and network geometry.
///
/// For every beam endpoint (u, v) in map-cell units the score is the largest
/// occupancy among the 2x2 cells floor(u +- 1/2) x floor(v +- 1/2); the
/// scan likelihood is the mean score over beams that returned. The 2x2 max
/// is pooled once at construction so each endpoint costs one lookup.
class ScanMatcher {
public:
    ScanMatcher(const OccupancyGrid& map, const NetworkGeometry& geom, int beam_stride = 1)
        : geom_(geom), stride_(beam_stride), res_(map.resolution), ox_(map.origin.x), oy_(map.origin.y),
          pw_(map.width + 1), ph_(map.height + 1)
    {
        if (beam_stride < 1)
            throw std::invalid_argument("ScanMatcher: beam_stride must be >= 1");
        pooled_.assign(static_cast<std::size_t>(pw_) * static_cast<std::size_t>(ph_), 0.0);
        for (int b = -1; b < map.height; ++b)
            for (int a = -1; a < map.width; ++a)
                pooled_[index(a, b)] =
                    std::max({occupancy_at(map, a, b), occupancy_at(map, a + 1, b), occupancy_at(map, a, b + 1),
                              occupancy_at(map, a + 1, b + 1)});
    }

    int beam_stride() const { return stride_; }

    /// Caches per-heading-layer endpoint offsets for `scan`.
    void set_scan(const LidarScan& scan)
    {
        scan.validate();
        dists_.clear();
        bearings_.clear();
        for (std::size_t i = 0; i < scan.ranges.size(); i += static_cast<std::size_t>(stride_)) {
            if (!scan.is_return(i))
                continue;
            dists_.push_back(scan.ranges[i] / res_);
            bearings_.push_back(scan.bearing(i));
        }
        const std::size_t nb = dists_.size();
        layer_du_.assign(static_cast<std::size_t>(geom_.n_theta) * nb, 0.0);
        layer_dv_.assign(layer_du_.size(), 0.0);
        for (int tp = 0; tp < geom_.n_theta; ++tp) {
            const double h = geom_.layer_heading(tp);
            for (std::size_t i = 0; i < nb; ++i) {
                layer_du_[tp * nb + i] = dists_[i] * std::cos(bearings_[i] + h);
                layer_dv_[tp * nb + i] = dists_[i] * std::sin(bearings_[i] + h);
            }
        }
    }

    std::size_t scored_beams() const { return dists_.size(); }

    /// Likelihood of the hypothesis at the centre of pose cell c.
    double likelihood(const CellIndex& c) const
    {
        const std::size_t nb = dists_.size();
        if (nb == 0)
            return 0.0;
        const Pose p = cell_to_pose(c, geom_);
        const double u0 = (p.x - ox_) / res_ - 0.5;
        const double v0 = (p.y - oy_) / res_ - 0.5;
        const double* du = &layer_du_[static_cast<std::size_t>(c.tp) * nb];
        const double* dv = &layer_dv_[static_cast<std::size_t>(c.tp) * nb];
        double sum = 0.0;
        for (std::size_t i = 0; i < nb; ++i)
            sum += pooled(static_cast<int>(std::floor(u0 + du[i])), static_cast<int>(std::floor(v0 + dv[i])));
        return sum / static_cast<double>(nb);
    }

    /// Likelihood of an arbitrary continuous pose.
    double likelihood(const Pose& p) const
    {
        const std::size_t nb = dists_.size();
        if (nb == 0)
            return 0.0;
        const double u0 = (p.x - ox_) / res_ - 0.5;
        const double v0 = (p.y - oy_) / res_ - 0.5;
        double sum = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
            const double a = bearings_[i] + p.theta;
            sum += pooled(static_cast<int>(std::floor(u0 + dists_[i] * std::cos(a))),
                          static_cast<int>(std::floor(v0 + dists_[i] * std::sin(a))));
        }
        return sum / static_cast<double>(nb);
    }

private:
    std::size_t index(int a, int b) const
    {
        return static_cast<std::size_t>(b + 1) * static_cast<std::size_t>(pw_) + static_cast<std::size_t>(a + 1);
    }

    double pooled(int a, int b) const
    {
        if (a < -1 || b < -1 || a >= pw_ - 1 || b >= ph_ - 1)
            return 0.0;
        return pooled_[index(a, b)];
    }

    NetworkGeometry geom_;
    int stride_;
    double res_, ox_, oy_;
    int pw_, ph_;
    std::vector<double> pooled_;
    std::vector<double> dists_, bearings_;
    std::vector<double> layer_du_, layer_dv_;
};

/// Likelihood of the scan at the hypothesis held by pose cell c.
inline double scan_likelihood(const OccupancyGrid& m, const LidarScan& z, const CellIndex& c,
                              const NetworkGeometry& g, int beam_stride = 1)
{
    ScanMatcher matcher(m, g, beam_stride);
    matcher.set_scan(z);
    return matcher.likelihood(c);
}

/// Ideal range finder plus zero-mean Gaussian range noise. Beams that hit
/// nothing report exactly max_range.
inline LidarScan simulate_scan(const OccupancyGrid& m, const Pose& true_pose, int n_beams, double fov,
                               double max_range, double noise_sigma, std::mt19937_64& rng,
                               double occ_threshold = 0.5)
{
    if (n_beams < 1)
        throw std::invalid_argument("simulate_scan: need at least one beam");
    if (!is_free_world(m, true_pose.x, true_pose.y, occ_threshold))
        throw std::invalid_argument("simulate_scan: pose is not in free space");
    LidarScan z;
    z.max_range = max_range;
    const bool full_circle = fov >= kTwoPi - 1e-9;
    z.angle_min = full_circle ? -kPi : -fov / 2.0;
    z.angle_increment = (full_circle || n_beams == 1) ? fov / n_beams : fov / (n_beams - 1);
    z.ranges.resize(static_cast<std::size_t>(n_beams));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < n_beams; ++i) {
        double r = raycast(m, true_pose, z.bearing(static_cast<std::size_t>(i)), max_range, occ_threshold);
        if (r < max_range && noise_sigma > 0.0)
            r = std::clamp(r + noise_sigma * noise(rng), 0.0, max_range);
        z.ranges[static_cast<std::size_t>(i)] = r;
    }
    return z;
}

inline LidarScan simulate_scan(const OccupancyGrid& m, const Pose& true_pose, int n_beams, double fov,
                               double max_range, double noise_sigma, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return simulate_scan(m, true_pose, n_beams, fov, max_range, noise_sigma, rng);
}

/// One line of the scan log: `t,n_beams,angle_min,angle_increment,max_range,r_0,...`.
inline void write_scan_csv_row(std::ostream& out, long t, const LidarScan& z)
{
    out << t << ',' << z.ranges.size() << ',' << detail::format_double(z.angle_min) << ','
        << detail::format_double(z.angle_increment) << ',' << detail::format_double(z.max_range);
    for (double r : z.ranges)
        out << ',' << detail::format_double(r);
    out << '\n';
}

inline std::pair<long, LidarScan> parse_scan_csv_row(const std::string& line, std::size_t line_no)
{
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
        f.push_back(cell);
    if (f.size() < 6)
        throw ParseError("scan row needs at least 6 fields", line_no);
    const long t = detail::parse_int(f[0], line_no, "t");
    const int n = detail::parse_int(f[1], line_no, "n_beams");
    if (n < 1 || f.size() != static_cast<std::size_t>(5 + n))
        throw ParseError("scan row beam count does not match n_beams", line_no);
    LidarScan z;
    z.angle_min = detail::parse_double(f[2], line_no, "angle_min");
    z.angle_increment = detail::parse_double(f[3], line_no, "angle_increment");
    z.max_range = detail::parse_double(f[4], line_no, "max_range");
    for (int i = 0; i < n; ++i)
        z.ranges.push_back(detail::parse_double(f[static_cast<std::size_t>(5 + i)], line_no, "range"));
    try {
        z.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line_no);
    }
    return {t, std::move(z)};
}

}  // namespace bioloc
