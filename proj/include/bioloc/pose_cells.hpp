#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace bioloc {

/// Planar boundary policy. The heading axis always wraps.
///   wrap  - periodic planar axes (torus)
///   clamp - non-periodic planar axes; activity pushed past an edge is lost
enum class BoundaryMode { wrap, clamp };

/// How odometry moves the activity.
///   literal     - every cell moves by the same world-frame (dx, dy)
///   per_heading - each heading layer moves by the robot-frame motion rotated
///                 into that layer's heading
enum class PathIntegrationMode { literal, per_heading };

/// Excitation/inhibition kernels and the global decay rate. Sigmas are in
/// cells; each kernel is truncated at `truncation_sigmas` standard
/// deviations per axis and scaled so its weights sum to its coefficient.
struct KernelConfig {
    double sigma_exc_xy = 1.0;
    double sigma_exc_theta = 1.0;
    double coeff_exc = 0.10;
    double sigma_inh_xy = 2.0;
    double sigma_inh_theta = 2.0;
    double coeff_inh = 0.08;
    double truncation_sigmas = 3.0;
    double s_g = 1e-4;

    void validate() const
    {
        if (!(sigma_exc_xy > 0 && sigma_exc_theta > 0 && sigma_inh_xy > 0 && sigma_inh_theta > 0))
            throw std::invalid_argument("KernelConfig: sigmas must be positive");
        if (!(coeff_exc > coeff_inh && coeff_inh > 0))
            throw std::invalid_argument("KernelConfig: need coeff_exc > coeff_inh > 0");
        if (!(s_g >= 0))
            throw std::invalid_argument("KernelConfig: s_g must be non-negative");
        if (!(truncation_sigmas > 0))
            throw std::invalid_argument("KernelConfig: truncation must be positive");
    }

    /// Widest planar reach of either kernel, in cells.
    int max_planar_radius() const
    {
        return static_cast<int>(std::ceil(truncation_sigmas * std::max(sigma_exc_xy, sigma_inh_xy)));
    }
};

/// Discrete 1D Gaussian on [-radius, radius] with weights summing to 1.
struct GaussianKernel1D {
    int radius = 0;
    std::vector<double> weights;  // weights[d + radius]

    GaussianKernel1D(double sigma, double truncation_sigmas)
    {
        radius = static_cast<int>(std::ceil(truncation_sigmas * sigma));
        weights.resize(static_cast<std::size_t>(2 * radius + 1));
        double sum = 0.0;
        for (int d = -radius; d <= radius; ++d) {
            const double w = std::exp(-0.5 * d * d / (sigma * sigma));
            weights[static_cast<std::size_t>(d + radius)] = w;
            sum += w;
        }
        for (double& w : weights)
            w /= sum;
    }

    double operator()(int d) const { return weights[static_cast<std::size_t>(d + radius)]; }
};

struct PoseCellEstimate {
    Pose pose;
    double confidence = 0.0;
    CellIndex peak;
};

/// The 3D continuous attractor network. Only cells holding more than
/// `prune_epsilon` activity are stored; everything else reads as zero.
class PoseCellNetwork {
public:
    explicit PoseCellNetwork(NetworkGeometry g, BoundaryMode mode = BoundaryMode::wrap,
                             double prune_epsilon = 1e-6)
        : geom_(g), mode_(mode), eps_(prune_epsilon)
    {
        geom_.validate();
        if (!(prune_epsilon >= 0.0))
            throw std::invalid_argument("PoseCellNetwork: prune_epsilon must be >= 0");
        act_.assign(geom_.cell_count(), 0.0);
    }

    const NetworkGeometry& geometry() const { return geom_; }
    BoundaryMode boundary_mode() const { return mode_; }
    double prune_epsilon() const { return eps_; }

    std::size_t size() const { return active_.size(); }
    bool empty() const { return active_.empty(); }

    double activity(const CellIndex& c) const
    {
        if (!geom_.contains(c))
            throw std::out_of_range("PoseCellNetwork: invalid cell index");
        return act_[linear(c)];
    }

    double total_activity() const
    {
        double s = 0.0;
        for (auto i : active_)
            s += act_[i];
        return s;
    }

    /// Active cells in ascending linear order (theta-major, then y, then x).
    std::vector<std::pair<CellIndex, double>> active_cells() const
    {
        std::vector<std::pair<CellIndex, double>> out;
        out.reserve(active_.size());
        for (auto i : active_)
            out.emplace_back(unlinear(i), act_[i]);
        return out;
    }

    template <typename F>
    void for_each_active(F&& f) const
    {
        for (auto i : active_)
            f(unlinear(i), act_[i]);
    }

    void clear()
    {
        for (auto i : active_)
            act_[i] = 0.0;
        active_.clear();
    }

    /// Overwrites one cell; values at or below prune_epsilon remove it.
    void set_activity(const CellIndex& c, double v)
    {
        if (!geom_.contains(c))
            throw std::out_of_range("PoseCellNetwork: invalid cell index");
        if (!(v >= 0.0))
            throw std::invalid_argument("PoseCellNetwork: activity must be non-negative");
        const auto i = linear(c);
        const bool was = act_[i] > 0.0;
        act_[i] = v > eps_ ? v : 0.0;
        const bool now = act_[i] > 0.0;
        if (was != now) {
            auto it = std::lower_bound(active_.begin(), active_.end(), i);
            if (now)
                active_.insert(it, i);
            else
                active_.erase(it);
        }
    }

    void add_activity(const CellIndex& c, double v) { set_activity(c, activity(c) + v); }

    /// Seeds n samples drawn from N(p0, diag(sigma_xy^2, sigma_xy^2, sigma_theta^2)),
    /// each carrying 1/n activity. Existing activity is discarded.
    void initialize_gaussian(const Pose& p0, double sigma_xy, double sigma_theta, int n, std::uint64_t seed)
    {
        if (n < 1)
            throw std::invalid_argument("initialize_gaussian: n must be >= 1");
        if (!(sigma_xy >= 0.0 && sigma_theta >= 0.0))
            throw std::invalid_argument("initialize_gaussian: negative sigma");
        clear();
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> unit(0.0, 1.0);
        const double share = 1.0 / n;
        std::vector<double> acc(act_.size(), 0.0);
        std::vector<std::uint32_t> touched;
        const long max_attempts = 100L * n;
        long attempts = 0;
        for (int s = 0; s < n;) {
            if (++attempts > max_attempts)
                throw std::out_of_range("initialize_gaussian: samples keep falling outside the network");
            const double x = p0.x + sigma_xy * unit(rng);
            const double y = p0.y + sigma_xy * unit(rng);
            const double t = normalize_angle(p0.theta + sigma_theta * unit(rng));
            int xp = static_cast<int>(std::floor(x / geom_.k_xy + geom_.n_xy / 2.0));
            int yp = static_cast<int>(std::floor(y / geom_.k_xy + geom_.n_xy / 2.0));
            if (!planar_index(xp) || !planar_index(yp))
                continue;
            const CellIndex c{xp, yp, pose_to_cell(Pose(0.0, 0.0, t), geom_).tp};
            const auto i = linear(c);
            if (acc[i] == 0.0)
                touched.push_back(i);
            acc[i] += share;
            ++s;
        }
        for (auto i : touched)
            if (acc[i] > eps_)
                act_[i] = acc[i];
        rebuild_active(touched);
    }

    /// Spreads unit activity evenly over the listed cells.
    void initialize_uniform(std::span<const CellIndex> cells)
    {
        if (cells.empty())
            throw std::invalid_argument("initialize_uniform: empty cell list");
        clear();
        std::vector<std::uint32_t> touched;
        touched.reserve(cells.size());
        for (const auto& c : cells) {
            if (!geom_.contains(c))
                throw std::out_of_range("initialize_uniform: invalid cell index");
            const auto i = linear(c);
            if (act_[i] == 0.0)
                touched.push_back(i);
            act_[i] = 1.0;
        }
        const double share = 1.0 / static_cast<double>(touched.size());
        if (!(share > eps_))
            throw std::invalid_argument("initialize_uniform: too many cells for prune_epsilon");
        for (auto i : touched)
            act_[i] = share;
        rebuild_active(touched);
    }

    /// Shifts activity by an odometry increment, splitting each cell's
    /// activity over the 2x2x2 neighbourhood by the fractional residuals.
    void path_integrate(const PoseDelta& delta, PathIntegrationMode mode = PathIntegrationMode::per_heading)
    {
        const double bound = geom_.n_xy * geom_.k_xy / 4.0;
        if (!(std::abs(delta.dx) < bound && std::abs(delta.dy) < bound && std::abs(delta.forward) < bound &&
              std::abs(delta.lateral) < bound && std::isfinite(delta.dtheta)))
            throw std::invalid_argument("path_integrate: delta exceeds a quarter of the network extent");
        if (active_.empty())
            return;

        const double st = delta.dtheta / geom_.k_theta;
        const int bt = static_cast<int>(std::floor(st));
        const double ft = st - bt;

        // planar shift (in cells) for each heading layer
        std::vector<std::pair<double, double>> shift(static_cast<std::size_t>(geom_.n_theta));
        for (int tp = 0; tp < geom_.n_theta; ++tp) {
            if (mode == PathIntegrationMode::literal) {
                shift[static_cast<std::size_t>(tp)] = {delta.dx / geom_.k_xy, delta.dy / geom_.k_xy};
            } else {
                const double h = geom_.layer_heading(tp);
                const double c = std::cos(h), s = std::sin(h);
                shift[static_cast<std::size_t>(tp)] = {(delta.forward * c - delta.lateral * s) / geom_.k_xy,
                                                       (delta.forward * s + delta.lateral * c) / geom_.k_xy};
            }
        }

        prepare_scratch();
        for (auto i : active_) {
            const CellIndex c = unlinear(i);
            const double v = act_[i];
            const auto [sx, sy] = shift[static_cast<std::size_t>(c.tp)];
            const int bx = static_cast<int>(std::floor(sx));
            const int by = static_cast<int>(std::floor(sy));
            const double fx = sx - bx, fy = sy - by;
            const double wx[2] = {1.0 - fx, fx};
            const double wy[2] = {1.0 - fy, fy};
            const double wt[2] = {1.0 - ft, ft};
            for (int a = 0; a < 2; ++a) {
                if (wx[a] == 0.0)
                    continue;
                int x = c.xp + bx + a;
                if (!planar_index(x))
                    continue;
                for (int b = 0; b < 2; ++b) {
                    if (wy[b] == 0.0)
                        continue;
                    int y = c.yp + by + b;
                    if (!planar_index(y))
                        continue;
                    for (int k = 0; k < 2; ++k) {
                        if (wt[k] == 0.0)
                            continue;
                        const int t = wrap(c.tp + bt + k, geom_.n_theta);
                        scatter(linear({x, y, t}), v * wx[a] * wy[b] * wt[k]);
                    }
                }
            }
        }
        commit_scratch();
    }

    /// Multiplies every active cell by likelihood(cell); the callable must
    /// return values in [0, 1].
    template <typename Likelihood>
    void apply_observation(Likelihood&& likelihood)
    {
        std::vector<double> factors;
        factors.reserve(active_.size());
        for (auto i : active_) {
            const double l = likelihood(unlinear(i));
            if (!(l >= 0.0 && l <= 1.0))
                throw ContractViolation("apply_observation: likelihood outside [0,1]");
            factors.push_back(l);
        }
        apply_factors(factors);
    }

    /// Same as apply_observation with precomputed per-cell factors, aligned
    /// with the current active_cells() order.
    void apply_factors(std::span<const double> factors)
    {
        if (factors.size() != active_.size())
            throw std::invalid_argument("apply_factors: size mismatch");
        std::size_t out = 0;
        for (std::size_t n = 0; n < active_.size(); ++n) {
            const auto i = active_[n];
            const double l = factors[n];
            if (!(l >= 0.0 && l <= 1.0))
                throw ContractViolation("apply_observation: likelihood outside [0,1]");
            act_[i] *= l;
            if (act_[i] > eps_)
                active_[out++] = i;
            else
                act_[i] = 0.0;
        }
        active_.resize(out);
    }

    /// Local excitation: adds coeff_exc * (G_e * PC).
    void excite(const KernelConfig& k)
    {
        if (active_.empty())
            return;
        convolve(GaussianKernel1D(k.sigma_exc_xy, k.truncation_sigmas),
                 GaussianKernel1D(k.sigma_exc_theta, k.truncation_sigmas));
        // field_ holds the kernel response over touched_; add it in
        for (auto i : touched_) {
            const double v = act_[i] + k.coeff_exc * field_[i];
            act_[i] = v > eps_ ? v : 0.0;
        }
        std::vector<std::uint32_t> cand = touched_;
        clear_field();
        rebuild_active(cand);
    }

    /// Local inhibition: subtracts coeff_inh * (G_i * PC), clamping at zero.
    void inhibit(const KernelConfig& k)
    {
        if (active_.empty())
            return;
        convolve(GaussianKernel1D(k.sigma_inh_xy, k.truncation_sigmas),
                 GaussianKernel1D(k.sigma_inh_theta, k.truncation_sigmas));
        std::size_t out = 0;
        for (auto i : active_) {
            const double v = act_[i] - k.coeff_inh * field_[i];
            if (v > eps_) {
                act_[i] = v;
                active_[out++] = i;
            } else {
                act_[i] = 0.0;
            }
        }
        active_.resize(out);
        clear_field();
    }

    /// Fixed-rate decay: every active cell loses min(activity, s_g).
    void global_inhibit(double s_g)
    {
        if (!(s_g >= 0.0))
            throw std::invalid_argument("global_inhibit: s_g must be non-negative");
        std::size_t out = 0;
        for (auto i : active_) {
            const double v = act_[i] - std::min(act_[i], s_g);
            if (v > eps_) {
                act_[i] = v;
                active_[out++] = i;
            } else {
                act_[i] = 0.0;
            }
        }
        active_.resize(out);
    }

    /// Scales activity to unit total. Cells that would end at or below
    /// prune_epsilon are dropped first so the result sums to 1.
    void normalize()
    {
        double total = total_activity();
        if (active_.empty() || !(total > 0.0))
            throw DegenerateBeliefError("normalize: network has no activity");
        const double cut = eps_ * total;
        std::size_t out = 0;
        for (auto i : active_) {
            if (act_[i] > cut)
                active_[out++] = i;
            else
                act_[i] = 0.0;
        }
        active_.resize(out);
        if (active_.empty())
            throw DegenerateBeliefError("normalize: network has no activity");
        total = total_activity();
        for (auto i : active_)
            act_[i] /= total;
    }

    /// Highest-activity cell; ties go to the lowest linear index.
    CellIndex argmax() const
    {
        if (active_.empty())
            throw DegenerateBeliefError("argmax: network has no activity");
        std::uint32_t best = active_.front();
        for (auto i : active_)
            if (act_[i] > act_[best])
                best = i;
        return unlinear(best);
    }

    /// Activity-weighted centroid of the packet around the argmax cell.
    /// Confidence is the packet's share of the total activity.
    PoseCellEstimate estimate(int packet_radius_xy = 4, int packet_radius_theta = 2) const
    {
        const CellIndex peak = argmax();
        const Pose centre = cell_to_pose(peak, geom_);
        double mass = 0.0, total = 0.0, sx = 0.0, sy = 0.0, ss = 0.0, sc = 0.0;
        for (auto i : active_) {
            const CellIndex c = unlinear(i);
            const double v = act_[i];
            total += v;
            const int dx = planar_offset(c.xp - peak.xp);
            const int dy = planar_offset(c.yp - peak.yp);
            const int dt = circular_offset(c.tp - peak.tp, geom_.n_theta);
            if (std::abs(dx) > packet_radius_xy || std::abs(dy) > packet_radius_xy ||
                std::abs(dt) > packet_radius_theta)
                continue;
            mass += v;
            sx += v * dx;
            sy += v * dy;
            const double h = geom_.layer_heading(c.tp);
            ss += v * std::sin(h);
            sc += v * std::cos(h);
        }
        PoseCellEstimate e;
        e.peak = peak;
        e.confidence = total > 0.0 ? std::clamp(mass / total, 0.0, 1.0) : 0.0;
        e.pose = Pose(centre.x + geom_.k_xy * sx / mass, centre.y + geom_.k_xy * sy / mass, std::atan2(ss, sc));
        return e;
    }

    bool is_converged(double threshold = 0.8) const
    {
        if (active_.empty())
            return false;
        return estimate().confidence >= threshold;
    }

    /// CSV `xp,yp,tp,activity`, one row per active cell.
    void write_csv(std::ostream& out) const
    {
        out << "xp,yp,tp,activity\n";
        char buf[64];
        for (auto i : active_) {
            const CellIndex c = unlinear(i);
            auto r = std::to_chars(buf, buf + sizeof(buf), act_[i]);
            out << c.xp << ',' << c.yp << ',' << c.tp << ',' << std::string_view(buf, r.ptr - buf) << '\n';
        }
    }

    std::uint32_t linear(const CellIndex& c) const
    {
        return static_cast<std::uint32_t>((static_cast<std::size_t>(c.tp) * geom_.n_xy + c.yp) * geom_.n_xy +
                                          c.xp);
    }

    CellIndex unlinear(std::uint32_t i) const
    {
        const int n = geom_.n_xy;
        const int xp = static_cast<int>(i % static_cast<std::uint32_t>(n));
        const std::uint32_t r = i / static_cast<std::uint32_t>(n);
        return {xp, static_cast<int>(r % static_cast<std::uint32_t>(n)), static_cast<int>(r / n)};
    }

private:
    static int wrap(int v, int n)
    {
        v %= n;
        return v < 0 ? v + n : v;
    }

    static int circular_offset(int d, int n)
    {
        d = wrap(d, n);
        return d > n / 2 ? d - n : d;
    }

    int planar_offset(int d) const { return mode_ == BoundaryMode::wrap ? circular_offset(d, geom_.n_xy) : d; }

    // Maps a planar index into range per boundary mode; false means "off the network".
    bool planar_index(int& v) const
    {
        if (mode_ == BoundaryMode::wrap) {
            v = wrap(v, geom_.n_xy);
            return true;
        }
        return v >= 0 && v < geom_.n_xy;
    }

    void rebuild_active(std::vector<std::uint32_t>& candidates)
    {
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        active_.clear();
        for (auto i : candidates)
            if (act_[i] > 0.0)
                active_.push_back(i);
    }

    void prepare_scratch()
    {
        if (scratch_.size() != act_.size())
            scratch_.assign(act_.size(), 0.0);
        mark_.resize(act_.size(), 0);
        scratch_touched_.clear();
    }

    void scatter(std::uint32_t i, double v)
    {
        if (!mark_[i]) {
            mark_[i] = 1;
            scratch_touched_.push_back(i);
        }
        scratch_[i] += v;
    }

    // Replaces the activity with the scratch buffer.
    void commit_scratch()
    {
        clear();
        for (auto i : scratch_touched_) {
            mark_[i] = 0;
            if (scratch_[i] > eps_)
                act_[i] = scratch_[i];
            scratch_[i] = 0.0;
        }
        rebuild_active(scratch_touched_);
    }

    // Separable convolution of the activity with kxy (x, y) and kt (theta).
    // Result in field_, non-zero support listed in touched_.
    void convolve(const GaussianKernel1D& kxy, const GaussianKernel1D& kt)
    {
        const std::size_t n = act_.size();
        if (field_.size() != n) {
            field_.assign(n, 0.0);
            tmp_.assign(n, 0.0);
        }
        mark_.resize(n, 0);
        std::vector<std::uint32_t> t1, t2;

        // theta pass: act_ -> tmp_
        for (auto i : active_) {
            const CellIndex c = unlinear(i);
            const double v = act_[i];
            for (int d = -kt.radius; d <= kt.radius; ++d) {
                const auto j = linear({c.xp, c.yp, wrap(c.tp + d, geom_.n_theta)});
                if (!mark_[j]) {
                    mark_[j] = 1;
                    t1.push_back(j);
                }
                tmp_[j] += v * kt(d);
            }
        }
        for (auto j : t1)
            mark_[j] = 0;

        // y pass: tmp_ -> field_
        for (auto i : t1) {
            const CellIndex c = unlinear(i);
            const double v = tmp_[i];
            tmp_[i] = 0.0;
            for (int d = -kxy.radius; d <= kxy.radius; ++d) {
                int y = c.yp + d;
                if (!planar_index(y))
                    continue;
                const auto j = linear({c.xp, y, c.tp});
                if (!mark_[j]) {
                    mark_[j] = 1;
                    t2.push_back(j);
                }
                field_[j] += v * kxy(d);
            }
        }
        for (auto j : t2)
            mark_[j] = 0;

        // x pass: field_ -> tmp_, then swap roles back into field_
        touched_.clear();
        for (auto i : t2) {
            const CellIndex c = unlinear(i);
            const double v = field_[i];
            field_[i] = 0.0;
            for (int d = -kxy.radius; d <= kxy.radius; ++d) {
                int x = c.xp + d;
                if (!planar_index(x))
                    continue;
                const auto j = linear({x, c.yp, c.tp});
                if (!mark_[j]) {
                    mark_[j] = 1;
                    touched_.push_back(j);
                }
                tmp_[j] += v * kxy(d);
            }
        }
        for (auto j : touched_)
            mark_[j] = 0;
        std::swap(field_, tmp_);
    }

    void clear_field()
    {
        for (auto j : touched_)
            field_[j] = 0.0;
        touched_.clear();
    }

    NetworkGeometry geom_;
    BoundaryMode mode_;
    double eps_;
    std::vector<double> act_;
    std::vector<std::uint32_t> active_;  // sorted linear indices with act_ > 0

    // scratch space reused across operations
    std::vector<double> scratch_, field_, tmp_;
    std::vector<std::uint8_t> mark_;
    std::vector<std::uint32_t> scratch_touched_, touched_;
};

}  // namespace bioloc
