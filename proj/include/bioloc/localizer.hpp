#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid_map.hpp"
#include "local_view.hpp"
#include "observation.hpp"
#include "pose_cells.hpp"

namespace bioloc {

struct InitialEstimate {
    enum class Mode { gaussian, uniform };
    Mode mode = Mode::gaussian;
    Pose pose;
    double sigma_xy = 0.1;
    double sigma_theta = 0.05;
    int samples = 200;
    std::uint64_t seed = 1;
    int uniform_stride_xy = 2;     ///< seed every k-th planar cell when uniform
    int uniform_stride_theta = 1;
};

struct LandmarkConfig {
    double snap_cell = 0.05;       ///< preprocessing lattice (m)
    double split_tolerance = 0.05; ///< split-and-merge deviation (m)
    CornerParams corners;
};

struct LocalizerConfig {
    NetworkGeometry geometry;
    BoundaryMode boundary = BoundaryMode::wrap;
    double prune_epsilon = 1e-6;
    KernelConfig kernels;
    double s_v = 0.05;
    double lv_match_threshold = kDefaultMatchThreshold;
    double lv_decay = 0.5;
    bool enable_lv = true;
    double convergence_threshold = 0.8;
    int packet_radius_xy = 4;
    int packet_radius_theta = 2;
    PathIntegrationMode pi_mode = PathIntegrationMode::per_heading;
    int beam_stride = 1;
    /// Apply global inhibition only while the belief is converged.
    bool gate_global_inhibition = true;
    LandmarkConfig landmarks;
    InitialEstimate init;

    void validate() const
    {
        geometry.validate();
        kernels.validate();
        if (!(s_v >= 0.0))
            throw ConfigError("s_v must be non-negative");
        if (!(lv_match_threshold > 0.0 && lv_match_threshold <= 1.0))
            throw ConfigError("lv_match_threshold must be in (0,1]");
        if (!(convergence_threshold > 0.0 && convergence_threshold <= 1.0))
            throw ConfigError("convergence_threshold must be in (0,1]");
        if (beam_stride < 1)
            throw ConfigError("beam_stride must be >= 1");
        if (init.samples < 1)
            throw ConfigError("init.samples must be >= 1");
        if (init.uniform_stride_xy < 1 || init.uniform_stride_theta < 1)
            throw ConfigError("init strides must be >= 1");
    }
};

/// Default geometry for a map: k_xy equal to the map resolution, 36 heading
/// cells, and a planar margin wide enough for the widest kernel.
inline NetworkGeometry default_geometry(const OccupancyGrid& map, const KernelConfig& k = {}, int n_theta = 36)
{
    return geometry_for_extent(map.max_abs_coord(), map.resolution, n_theta, k.max_planar_radius());
}

struct StepResult {
    Pose pose;
    double confidence = 0.0;
    bool converged = false;
    bool recovered = false;   ///< belief degenerated and was reseeded this step
    int lv_id = -1;           ///< matched local view cell, -1 when none
    double lv_score = 0.0;
    double injected_mass = 0.0;
};

/// Pose cells whose centre lies on a free map cell, on a stride lattice.
inline std::vector<CellIndex> free_pose_cells(const OccupancyGrid& map, const NetworkGeometry& g, int stride_xy = 1,
                                              int stride_theta = 1, double occ_threshold = 0.5)
{
    std::vector<CellIndex> out;
    for (int yp = 0; yp < g.n_xy; yp += stride_xy) {
        for (int xp = 0; xp < g.n_xy; xp += stride_xy) {
            const Pose c = cell_to_pose({xp, yp, 0}, g);
            if (!is_free_world(map, c.x, c.y, occ_threshold))
                continue;
            for (int tp = 0; tp < g.n_theta; tp += stride_theta)
                out.push_back({xp, yp, tp});
        }
    }
    return out;
}

inline std::optional<Landmark> landmark_from_scan(const LidarScan& scan, const LandmarkConfig& cfg)
{
    return extract_landmark(preprocess_scan(scan, cfg.snap_cell), cfg.split_tolerance, cfg.corners);
}

/// Pose cell network plus local view cells, advanced one iteration per
/// odometry/scan pair.
class Localizer {
public:
    Localizer(std::shared_ptr<const OccupancyGrid> map, LocalizerConfig cfg, LandmarkStore store = {},
              Adjacency adjacency = {})
        : map_(std::move(map)), cfg_(validated(std::move(cfg))), net_(cfg_.geometry, cfg_.boundary, cfg_.prune_epsilon),
          matcher_(*map_, cfg_.geometry, cfg_.beam_stride), store_(std::move(store)), adj_(std::move(adjacency))
    {
        for (const auto& link : adj_.links) {
            if (!cfg_.geometry.contains(link.cell))
                throw ConfigError("landmark anchor outside the pose cell network");
            store_.at(link.lv_id);
        }
        initialize();
    }

    void initialize()
    {
        const auto& init = cfg_.init;
        if (init.mode == InitialEstimate::Mode::gaussian)
            net_.initialize_gaussian(init.pose, init.sigma_xy, init.sigma_theta, init.samples, init.seed);
        else
            reseed_uniform();
        last_converged_ = net_.is_converged(cfg_.convergence_threshold);
    }

    /// When set, step() registers novel landmarks at the argmax cell while
    /// the belief is converged.
    void set_mapping(bool on) { mapping_ = on; }

    StepResult step(const PoseDelta& odom, const LidarScan& scan)
    {
        StepResult r;
        net_.path_integrate(odom, cfg_.pi_mode);

        matcher_.set_scan(scan);
        if (!net_.empty()) {
            std::vector<double> factors;
            factors.reserve(net_.size());
            net_.for_each_active([&](const CellIndex& c, double) { factors.push_back(matcher_.likelihood(c)); });
            net_.apply_factors(factors);
        }

        if (cfg_.enable_lv || mapping_) {
            if (auto lm = landmark_from_scan(scan, cfg_.landmarks)) {
                const auto match = match_landmark(store_, *lm, cfg_.lv_match_threshold);
                if (match && cfg_.enable_lv) {
                    set_activation(store_, match->id, std::min(1.0, match->score));
                    r.lv_id = match->id;
                    r.lv_score = match->score;
                } else if (!match && mapping_ && last_converged_ && !net_.empty()) {
                    register_landmark(store_, adj_, *lm, net_.argmax(), cfg_.geometry);
                }
            }
            if (cfg_.enable_lv)
                r.injected_mass = inject(net_, store_, adj_, cfg_.s_v);
        }

        net_.excite(cfg_.kernels);
        net_.inhibit(cfg_.kernels);
        if (!cfg_.gate_global_inhibition || last_converged_)
            net_.global_inhibit(cfg_.kernels.s_g);
        try {
            net_.normalize();
        } catch (const DegenerateBeliefError&) {
            reseed_uniform();
            r.recovered = true;
        }
        decay_activations(store_, cfg_.lv_decay);

        const auto est = net_.estimate(cfg_.packet_radius_xy, cfg_.packet_radius_theta);
        r.pose = est.pose;
        r.confidence = est.confidence;
        r.converged = est.confidence >= cfg_.convergence_threshold;
        last_converged_ = r.converged;
        return r;
    }

    const PoseCellNetwork& network() const { return net_; }
    PoseCellNetwork& network() { return net_; }
    const LandmarkStore& landmarks() const { return store_; }
    const Adjacency& adjacency() const { return adj_; }
    const LocalizerConfig& config() const { return cfg_; }
    const OccupancyGrid& map() const { return *map_; }

private:
    static LocalizerConfig validated(LocalizerConfig cfg)
    {
        cfg.validate();
        return cfg;
    }

    void reseed_uniform()
    {
        const auto cells =
            free_pose_cells(*map_, cfg_.geometry, cfg_.init.uniform_stride_xy, cfg_.init.uniform_stride_theta);
        if (cells.empty())
            throw DegenerateBeliefError("map has no free space to reseed the network");
        net_.initialize_uniform(cells);
    }

    std::shared_ptr<const OccupancyGrid> map_;
    LocalizerConfig cfg_;
    PoseCellNetwork net_;
    ScanMatcher matcher_;
    LandmarkStore store_;
    Adjacency adj_;
    bool mapping_ = false;
    bool last_converged_ = false;
};

/// Builds the landmark store from ground-truth poses: every scan whose
/// landmark matches nothing stored is registered at the pose's cell.
inline std::pair<LandmarkStore, Adjacency> run_mapping_pass(const OccupancyGrid& map, std::span<const Pose> trajectory,
                                                            std::span<const LidarScan> scans,
                                                            const NetworkGeometry& g,
                                                            const LandmarkConfig& cfg = {},
                                                            double novelty_threshold = kDefaultMatchThreshold)
{
    if (trajectory.empty())
        throw std::invalid_argument("run_mapping_pass: empty trajectory");
    if (trajectory.size() != scans.size())
        throw std::invalid_argument("run_mapping_pass: trajectory and scans differ in length");
    for (const auto& p : trajectory)
        if (!is_free_world(map, p.x, p.y))
            throw std::invalid_argument("run_mapping_pass: trajectory pose outside free space");
    LandmarkStore store;
    Adjacency adj;
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const auto lm = landmark_from_scan(scans[i], cfg);
        if (!lm)
            continue;
        if (match_landmark(store, *lm, novelty_threshold))
            continue;
        register_landmark(store, adj, *lm, pose_to_cell(trajectory[i], g), g);
    }
    return {std::move(store), std::move(adj)};
}

/// `t,est_x,est_y,est_theta,confidence,converged,lv_detected_id,injected_mass`
struct TraceRow {
    long t = 0;
    Pose estimate;
    double confidence = 0.0;
    bool converged = false;
    int lv_id = -1;
    double injected_mass = 0.0;
};

inline constexpr const char* kTraceHeader = "t,est_x,est_y,est_theta,confidence,converged,lv_detected_id,injected_mass";

inline void write_trace_row(std::ostream& out, const TraceRow& r)
{
    out << r.t << ',' << detail::format_double(r.estimate.x) << ',' << detail::format_double(r.estimate.y) << ','
        << detail::format_double(r.estimate.theta) << ',' << detail::format_double(r.confidence) << ','
        << (r.converged ? 1 : 0) << ',' << r.lv_id << ',' << detail::format_double(r.injected_mass) << '\n';
}

}  // namespace bioloc
