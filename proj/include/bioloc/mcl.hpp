#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "geometry.hpp"
#include "grid_map.hpp"
#include "observation.hpp"

namespace bioloc {

struct Particle {
    Pose pose;
    double weight = 0.0;
};

struct ParticleSet {
    std::vector<Particle> particles;

    std::size_t size() const { return particles.size(); }

    double weight_sum() const
    {
        double s = 0.0;
        for (const auto& p : particles)
            s += p.weight;
        return s;
    }

    double effective_sample_size() const
    {
        double s2 = 0.0;
        for (const auto& p : particles)
            s2 += p.weight * p.weight;
        return s2 > 0.0 ? 1.0 / s2 : 0.0;
    }
};

/// Odometry motion noise: standard deviation per metre travelled and per
/// radian turned.
struct MotionNoise {
    double trans_sigma = 0.05;
    double rot_sigma = 0.05;
};

inline ParticleSet mcl_init_gaussian(const Pose& pose0, double sigma_xy, double sigma_theta, int n,
                                     std::mt19937_64& rng)
{
    if (n < 1)
        throw std::invalid_argument("mcl_init: need at least one particle");
    std::normal_distribution<double> unit(0.0, 1.0);
    ParticleSet ps;
    ps.particles.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Pose p(pose0.x + sigma_xy * unit(rng), pose0.y + sigma_xy * unit(rng),
               pose0.theta + sigma_theta * unit(rng));
        ps.particles.push_back({p, 1.0 / n});
    }
    return ps;
}

/// Uniform over free cells (occupancy < occ_threshold) and heading.
inline ParticleSet mcl_init_uniform(const OccupancyGrid& map, int n, std::mt19937_64& rng,
                                    double occ_threshold = 0.5)
{
    if (n < 1)
        throw std::invalid_argument("mcl_init: need at least one particle");
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < map.cells.size(); ++i)
        if (map.cells[i] < occ_threshold)
            free.push_back(i);
    if (free.empty())
        throw std::invalid_argument("mcl_init: map has no free space");
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ParticleSet ps;
    ps.particles.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::size_t c = free[pick(rng)];
        const int ix = static_cast<int>(c % static_cast<std::size_t>(map.width));
        const int iy = static_cast<int>(c / static_cast<std::size_t>(map.width));
        const double x = map.origin.x + (ix + unit(rng)) * map.resolution;
        const double y = map.origin.y + (iy + unit(rng)) * map.resolution;
        ps.particles.push_back({Pose(x, y, -kPi + kTwoPi * unit(rng)), 1.0 / n});
    }
    return ps;
}

/// Moves every particle by the robot-frame odometry, with Gaussian noise
/// proportional to the distance travelled and the angle turned.
inline void mcl_predict(ParticleSet& ps, const PoseDelta& delta, const MotionNoise& noise, std::mt19937_64& rng)
{
    const double trans = std::hypot(delta.forward, delta.lateral);
    const double st = noise.trans_sigma * trans;
    const double sr = noise.rot_sigma * std::abs(delta.dtheta);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (auto& p : ps.particles) {
        double f = delta.forward, l = delta.lateral, r = delta.dtheta;
        if (st > 0.0) {
            f += st * unit(rng);
            l += st * unit(rng);
        }
        if (sr > 0.0)
            r += sr * unit(rng);
        p.pose = apply_delta(p.pose, f, l, r);
    }
}

/// Multiplies weights by the scan likelihood and renormalizes. Returns true
/// when every weight vanished and the set was reset to uniform weights.
inline bool mcl_weight(ParticleSet& ps, const ScanMatcher& matcher)
{
    double sum = 0.0;
    for (auto& p : ps.particles) {
        p.weight *= matcher.likelihood(p.pose);
        sum += p.weight;
    }
    const double n = static_cast<double>(ps.size());
    if (!(sum > 0.0)) {
        for (auto& p : ps.particles)
            p.weight = 1.0 / n;
        return true;
    }
    for (auto& p : ps.particles)
        p.weight /= sum;
    return false;
}

/// Systematic (low-variance) resampling; output weights are uniform.
inline void mcl_resample(ParticleSet& ps, std::mt19937_64& rng)
{
    const std::size_t n = ps.size();
    if (n == 0)
        return;
    const double step = 1.0 / static_cast<double>(n);
    std::uniform_real_distribution<double> start(0.0, step);
    const double total = ps.weight_sum();
    std::vector<Particle> out;
    out.reserve(n);
    double u = start(rng);
    double cum = ps.particles[0].weight / total;
    std::size_t i = 0;
    for (std::size_t m = 0; m < n; ++m) {
        while (u > cum && i + 1 < n) {
            ++i;
            cum += ps.particles[i].weight / total;
        }
        out.push_back({ps.particles[i].pose, step});
        u += step;
    }
    ps.particles = std::move(out);
}

struct MclEstimate {
    Pose pose;
    double spread = 0.0;  ///< weighted RMS planar distance from the mean (m)
};

inline MclEstimate mcl_estimate(const ParticleSet& ps)
{
    if (ps.particles.empty())
        throw std::invalid_argument("mcl_estimate: empty particle set");
    const double total = ps.weight_sum();
    double mx = 0.0, my = 0.0;
    for (const auto& p : ps.particles) {
        mx += p.weight * p.pose.x;
        my += p.weight * p.pose.y;
    }
    mx /= total;
    my /= total;
    const double heading = circular_mean(
        ps.particles, [](const Particle& p) { return p.pose.theta; }, [](const Particle& p) { return p.weight; });
    double var = 0.0;
    for (const auto& p : ps.particles)
        var += p.weight * ((p.pose.x - mx) * (p.pose.x - mx) + (p.pose.y - my) * (p.pose.y - my));
    return {Pose(mx, my, heading), std::sqrt(std::max(0.0, var / total))};
}

struct MclConfig {
    int particles = 500;
    MotionNoise noise;
    int beam_stride = 1;
    double resample_ratio = 0.5;       ///< resample when ESS < ratio * n
    double confidence_radius = 0.4;    ///< m, for the converged flag
    double convergence_threshold = 0.8;
    bool uniform_init = false;
    Pose pose0;
    double sigma_xy = 0.1;
    double sigma_theta = 0.05;
    std::uint64_t seed = 1;
};

struct MclStepResult {
    Pose pose;
    double spread = 0.0;
    double confidence = 0.0;  ///< weight fraction within confidence_radius of the mean
    bool converged = false;
    bool reset = false;       ///< all weights vanished this step
    bool resampled = false;
};

/// Predict, weight, resample-on-low-ESS loop over a shared scan matcher.
class MclLocalizer {
public:
    MclLocalizer(std::shared_ptr<const OccupancyGrid> map, const NetworkGeometry& geom, MclConfig cfg)
        : map_(std::move(map)), cfg_(cfg), matcher_(*map_, geom, cfg.beam_stride), rng_(cfg.seed)
    {
        if (cfg_.particles < 1)
            throw std::invalid_argument("mcl: particles must be >= 1");
        if (cfg_.uniform_init)
            ps_ = mcl_init_uniform(*map_, cfg_.particles, rng_);
        else
            ps_ = mcl_init_gaussian(cfg_.pose0, cfg_.sigma_xy, cfg_.sigma_theta, cfg_.particles, rng_);
    }

    MclStepResult step(const PoseDelta& odom, const LidarScan& scan)
    {
        MclStepResult r;
        mcl_predict(ps_, odom, cfg_.noise, rng_);
        matcher_.set_scan(scan);
        r.reset = mcl_weight(ps_, matcher_);
        const auto est = mcl_estimate(ps_);
        r.pose = est.pose;
        r.spread = est.spread;
        double near = 0.0;
        for (const auto& p : ps_.particles)
            if (planar_distance(p.pose, est.pose) <= cfg_.confidence_radius)
                near += p.weight;
        r.confidence = near / ps_.weight_sum();
        r.converged = r.confidence >= cfg_.convergence_threshold;
        if (ps_.effective_sample_size() < cfg_.resample_ratio * static_cast<double>(ps_.size())) {
            mcl_resample(ps_, rng_);
            r.resampled = true;
        }
        return r;
    }

    const ParticleSet& particles() const { return ps_; }
    const MclConfig& config() const { return cfg_; }

private:
    std::shared_ptr<const OccupancyGrid> map_;
    MclConfig cfg_;
    ScanMatcher matcher_;
    std::mt19937_64 rng_;
    ParticleSet ps_;
};

}  // namespace bioloc
