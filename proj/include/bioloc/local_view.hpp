#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid_map.hpp"
#include "observation.hpp"
#include "pose_cells.hpp"

namespace bioloc {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Returned beams as sensor-frame points snapped to a cell_size lattice,
/// deduplicated and sorted by x then y.
inline std::vector<Point2> preprocess_scan(const LidarScan& z, double cell_size)
{
    if (!(cell_size > 0.0))
        throw std::invalid_argument("preprocess_scan: cell_size must be positive");
    std::set<std::pair<long long, long long>> keys;
    for (std::size_t i = 0; i < z.ranges.size(); ++i) {
        if (!z.is_return(i))
            continue;
        const double a = z.bearing(i);
        keys.emplace(std::llround(z.ranges[i] * std::cos(a) / cell_size),
                     std::llround(z.ranges[i] * std::sin(a) / cell_size));
    }
    std::vector<Point2> out;
    out.reserve(keys.size());
    for (const auto& [kx, ky] : keys)
        out.push_back({static_cast<double>(kx) * cell_size, static_cast<double>(ky) * cell_size});
    return out;
}

/// A corner landmark: keypoints in the sensor frame plus the sorted list of
/// pairwise keypoint distances, which ignores rotation and translation.
struct Landmark {
    std::vector<Point2> keypoints;
    std::vector<double> signature;

    static Landmark from_keypoints(std::vector<Point2> kps)
    {
        Landmark l;
        l.keypoints = std::move(kps);
        for (std::size_t i = 0; i < l.keypoints.size(); ++i)
            for (std::size_t j = i + 1; j < l.keypoints.size(); ++j)
                l.signature.push_back(distance(l.keypoints[i], l.keypoints[j]));
        std::sort(l.signature.begin(), l.signature.end());
        return l;
    }

    friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct CornerParams {
    double max_gap = 0.5;              ///< larger jumps between neighbours break the polyline (m)
    double min_segment_length = 0.3;   ///< both sides of a corner must be at least this long (m)
    int min_segment_points = 3;
    double min_corner_angle = kPi / 4; ///< turn between the two sides (rad)
    int max_keypoints = 16;
};

namespace detail {

inline double point_line_distance(const Point2& p, const Point2& a, const Point2& b)
{
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    if (len == 0.0)
        return distance(p, a);
    return std::abs(dx * (a.y - p.y) - dy * (a.x - p.x)) / len;
}

// Recursive max-deviation split over pts[first..last]; appends split indices.
inline void split_polyline(const std::vector<Point2>& pts, std::size_t first, std::size_t last, double tol,
                           std::vector<std::size_t>& vertices)
{
    if (last <= first + 1)
        return;
    double worst = -1.0;
    std::size_t at = first;
    for (std::size_t i = first + 1; i < last; ++i) {
        const double d = point_line_distance(pts[i], pts[first], pts[last]);
        if (d > worst) {
            worst = d;
            at = i;
        }
    }
    if (worst <= tol)
        return;
    split_polyline(pts, first, at, tol, vertices);
    vertices.push_back(at);
    split_polyline(pts, at, last, tol, vertices);
}

// Merge step: drop a vertex when the two segments around it fit one line.
inline std::vector<std::size_t> merge_collinear(const std::vector<Point2>& pts, std::vector<std::size_t> v,
                                                double tol)
{
    bool changed = true;
    while (changed && v.size() > 2) {
        changed = false;
        for (std::size_t k = 1; k + 1 < v.size(); ++k) {
            double worst = 0.0;
            for (std::size_t i = v[k - 1] + 1; i < v[k + 1]; ++i)
                worst = std::max(worst, point_line_distance(pts[i], pts[v[k - 1]], pts[v[k + 1]]));
            if (worst <= tol) {
                v.erase(v.begin() + static_cast<std::ptrdiff_t>(k));
                changed = true;
                break;
            }
        }
    }
    return v;
}

inline double max_deviation(const std::vector<Point2>& pts, std::size_t a, std::size_t b)
{
    double worst = 0.0;
    for (std::size_t i = a + 1; i < b; ++i)
        worst = std::max(worst, point_line_distance(pts[i], pts[a], pts[b]));
    return worst;
}

// Slide each interior vertex to the index where the worse of its two
// segment fits is smallest. Split points tend to land just past a corner.
inline void refine_vertices(const std::vector<Point2>& pts, std::vector<std::size_t>& v)
{
    for (std::size_t k = 1; k + 1 < v.size(); ++k) {
        std::size_t best = v[k];
        double best_err = std::max(max_deviation(pts, v[k - 1], v[k]), max_deviation(pts, v[k], v[k + 1]));
        for (std::size_t i = v[k - 1] + 1; i < v[k + 1]; ++i) {
            const double e = std::max(max_deviation(pts, v[k - 1], i), max_deviation(pts, i, v[k + 1]));
            if (e < best_err) {
                best_err = e;
                best = i;
            }
        }
        v[k] = best;
    }
}

inline double turn_angle(const Point2& a, const Point2& b, const Point2& c)
{
    const double h1 = std::atan2(b.y - a.y, b.x - a.x);
    const double h2 = std::atan2(c.y - b.y, c.x - b.x);
    return std::abs(normalize_angle(h2 - h1));
}

}  // namespace detail

/// Corner keypoints of a preprocessed point set via split-and-merge line
/// fitting. Returns nullopt when fewer than two corners are found.
inline std::optional<Landmark> extract_landmark(const std::vector<Point2>& points, double tolerance,
                                                const CornerParams& params = {})
{
    if (points.size() < 3)
        return std::nullopt;
    std::vector<Point2> pts = points;
    std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
        const double ta = std::atan2(a.y, a.x), tb = std::atan2(b.y, b.x);
        if (ta != tb)
            return ta < tb;
        return std::hypot(a.x, a.y) < std::hypot(b.x, b.y);
    });

    // break the bearing-ordered sequence at range discontinuities
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= pts.size(); ++i) {
        if (i == pts.size() || distance(pts[i - 1], pts[i]) > params.max_gap) {
            runs.emplace_back(start, i - 1);
            start = i;
        }
    }
    const bool closed = runs.size() == 1 && distance(pts.back(), pts.front()) <= params.max_gap;
    if (closed && pts.size() >= 3) {
        // start the loop in the middle of its longest straight stretch so that
        // no corner lands next to the seam
        std::vector<std::size_t> v{0};
        detail::split_polyline(pts, 0, pts.size() - 1, tolerance, v);
        v.push_back(pts.size() - 1);
        std::size_t best = 0;
        for (std::size_t k = 1; k < v.size(); ++k)
            if (v[k] - v[k - 1] > v[best + 1] - v[best])
                best = k - 1;
        std::rotate(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>((v[best] + v[best + 1]) / 2), pts.end());
    }

    struct Corner {
        Point2 p;
        double range;
    };
    std::vector<Corner> corners;
    auto segment_ok = [&](std::size_t a, std::size_t b, std::size_t count) {
        return distance(pts[a], pts[b]) >= params.min_segment_length &&
               static_cast<int>(count) >= params.min_segment_points;
    };

    for (const auto& [first, last] : runs) {
        if (last < first + 2)
            continue;
        std::vector<std::size_t> v{first};
        detail::split_polyline(pts, first, last, tolerance, v);
        v.push_back(last);
        v = detail::merge_collinear(pts, std::move(v), tolerance);
        detail::refine_vertices(pts, v);
        // collapse vertex pairs closer than a segment could be
        for (std::size_t k = 0; k + 1 < v.size() && v.size() > 2;) {
            if (distance(pts[v[k]], pts[v[k + 1]]) >= params.min_segment_length) {
                ++k;
                continue;
            }
            // drop whichever of the two leaves the better fit
            std::vector<std::size_t> best;
            double best_err = std::numeric_limits<double>::infinity();
            for (std::size_t drop : {k, k + 1}) {
                if (drop == 0 || drop + 1 == v.size())
                    continue;
                auto w = v;
                w.erase(w.begin() + static_cast<std::ptrdiff_t>(drop));
                detail::refine_vertices(pts, w);
                double err = 0.0;
                for (std::size_t j = 0; j + 1 < w.size(); ++j)
                    err = std::max(err, detail::max_deviation(pts, w[j], w[j + 1]));
                if (err < best_err) {
                    best_err = err;
                    best = std::move(w);
                }
            }
            if (best.empty()) {
                ++k;
                continue;
            }
            v = std::move(best);
            k = 0;  // refinement may have moved earlier vertices
        }
        v = detail::merge_collinear(pts, std::move(v), tolerance);
        for (std::size_t k = 1; k + 1 < v.size(); ++k) {
            if (!segment_ok(v[k - 1], v[k], v[k] - v[k - 1] + 1) || !segment_ok(v[k], v[k + 1], v[k + 1] - v[k] + 1))
                continue;
            if (detail::turn_angle(pts[v[k - 1]], pts[v[k]], pts[v[k + 1]]) < params.min_corner_angle)
                continue;
            corners.push_back({pts[v[k]], std::hypot(pts[v[k]].x, pts[v[k]].y)});
        }
        // the seam of a full 360 degree loop joins the last and first segments
        if (closed && v.size() >= 3) {
            const std::size_t prev = v[v.size() - 2];
            const std::size_t next = v[1];
            if (segment_ok(prev, last, last - prev + 1) && segment_ok(first, next, next - first + 1) &&
                detail::turn_angle(pts[prev], pts[first], pts[next]) >= params.min_corner_angle) {
                corners.push_back({pts[first], std::hypot(pts[first].x, pts[first].y)});
            }
        }
    }
    if (corners.size() < 2)
        return std::nullopt;
    if (static_cast<int>(corners.size()) > params.max_keypoints) {
        std::stable_sort(corners.begin(), corners.end(),
                         [](const Corner& a, const Corner& b) { return a.range < b.range; });
        corners.resize(static_cast<std::size_t>(params.max_keypoints));
    }
    std::vector<Point2> kps;
    kps.reserve(corners.size());
    for (const auto& c : corners)
        kps.push_back(c.p);
    return Landmark::from_keypoints(std::move(kps));
}

/// Mean absolute difference of two sorted signatures. Unequal lengths are
/// compared on a common rank axis by linear interpolation.
inline double signature_distance(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.empty() || b.empty())
        return a.empty() && b.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += std::abs(a[i] - b[i]);
        return s / static_cast<double>(a.size());
    }
    const std::size_t n = std::max(a.size(), b.size());
    auto sample = [](const std::vector<double>& v, double q) {
        if (v.size() == 1)
            return v.front();
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        const double f = pos - static_cast<double>(lo);
        return v[lo] * (1.0 - f) + v[hi] * f;
    };
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double q = static_cast<double>(j) / static_cast<double>(n - 1);
        s += std::abs(sample(a, q) - sample(b, q));
    }
    return s / static_cast<double>(n);
}

struct LocalViewCell {
    int id = 0;
    Landmark landmark;
    double activity = 0.0;
    bool fresh = false;  // activated during the current iteration
};

struct LandmarkStore {
    std::vector<LocalViewCell> cells;

    std::size_t size() const { return cells.size(); }
    bool empty() const { return cells.empty(); }

    LocalViewCell& at(int id)
    {
        if (id < 0 || static_cast<std::size_t>(id) >= cells.size())
            throw std::out_of_range("LandmarkStore: unknown local view cell id " + std::to_string(id));
        return cells[static_cast<std::size_t>(id)];
    }
    const LocalViewCell& at(int id) const { return const_cast<LandmarkStore*>(this)->at(id); }
};

/// Sparse links from local view cells to pose cells.
struct Adjacency {
    struct Link {
        int lv_id = 0;
        CellIndex cell;
        double weight = 0.0;

        friend bool operator==(const Link&, const Link&) = default;
    };
    std::vector<Link> links;

    std::size_t size() const { return links.size(); }
};

struct LandmarkMatch {
    int id = -1;
    double score = 0.0;
};

inline constexpr double kDefaultMatchThreshold = 0.9;

/// Best-scoring stored landmark with score = 1 / (1 + signature distance),
/// provided it reaches `threshold`. Candidates whose keypoint count differs
/// by more than one are skipped; ties go to the lowest id.
inline std::optional<LandmarkMatch> match_landmark(const LandmarkStore& store, const Landmark& probe,
                                                   double threshold = kDefaultMatchThreshold)
{
    std::optional<LandmarkMatch> best;
    const auto nk = static_cast<long>(probe.keypoints.size());
    for (const auto& cell : store.cells) {
        if (std::abs(static_cast<long>(cell.landmark.keypoints.size()) - nk) > 1)
            continue;
        const double score = 1.0 / (1.0 + signature_distance(cell.landmark.signature, probe.signature));
        if (score >= threshold && (!best || score > best->score))
            best = LandmarkMatch{cell.id, score};
    }
    return best;
}

/// Adds a local view cell linked with weight 1 to `anchor`. An exact
/// duplicate of a stored landmark returns the existing id instead.
inline int register_landmark(LandmarkStore& store, Adjacency& adj, const Landmark& landmark,
                             const CellIndex& anchor, const NetworkGeometry& g)
{
    if (!g.contains(anchor))
        throw std::out_of_range("register_landmark: anchor outside network");
    if (auto m = match_landmark(store, landmark, 1.0); m && m->score >= 1.0)
        return m->id;
    const int id = static_cast<int>(store.cells.size());
    store.cells.push_back({id, landmark, 0.0, false});
    adj.links.push_back({id, anchor, 1.0});
    return id;
}

inline void set_activation(LandmarkStore& store, int lv_id, double level)
{
    if (!(level >= 0.0 && level <= 1.0))
        throw std::invalid_argument("set_activation: level outside [0,1]");
    auto& cell = store.at(lv_id);
    cell.activity = level;
    cell.fresh = true;
}

/// End-of-iteration decay: cells not activated this iteration lose
/// `factor` of their activity; anything under 1e-6 switches off.
inline void decay_activations(LandmarkStore& store, double factor = 0.5)
{
    for (auto& cell : store.cells) {
        if (!cell.fresh) {
            cell.activity *= factor;
            if (cell.activity < 1e-6)
                cell.activity = 0.0;
        }
        cell.fresh = false;
    }
}

/// Injects s_v * A(i, c) * V_i into every linked pose cell of every active
/// local view cell. Returns the total mass added; does not normalize.
inline double inject(PoseCellNetwork& net, const LandmarkStore& store, const Adjacency& adj, double s_v)
{
    if (!(s_v >= 0.0))
        throw std::invalid_argument("inject: s_v must be non-negative");
    double mass = 0.0;
    for (const auto& link : adj.links) {
        const double v = store.at(link.lv_id).activity;
        if (v <= 0.0 || link.weight <= 0.0)
            continue;
        const double add = s_v * link.weight * v;
        net.add_activity(link.cell, add);
        mass += add;
    }
    return mass;
}

/// Text format, one record per line:
/// `id; kp_count; x0 y0 x1 y1 ...; anchor_xp anchor_yp anchor_tp; weight`
inline void save_landmarks(std::ostream& out, const LandmarkStore& store, const Adjacency& adj)
{
    for (const auto& cell : store.cells) {
        out << cell.id << "; " << cell.landmark.keypoints.size() << ";";
        for (const auto& p : cell.landmark.keypoints)
            out << ' ' << detail::format_double(p.x) << ' ' << detail::format_double(p.y);
        out << ";";
        bool linked = false;
        for (const auto& link : adj.links) {
            if (link.lv_id != cell.id)
                continue;
            out << ' ' << link.cell.xp << ' ' << link.cell.yp << ' ' << link.cell.tp << "; "
                << detail::format_double(link.weight);
            linked = true;
            break;
        }
        if (!linked)
            throw std::logic_error("save_landmarks: local view cell without adjacency link");
        out << '\n';
    }
}

inline void save_landmarks(const std::filesystem::path& path, const LandmarkStore& store, const Adjacency& adj)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write landmark store " + path.string());
    save_landmarks(out, store, adj);
}

inline std::pair<LandmarkStore, Adjacency> load_landmarks(std::istream& in)
{
    LandmarkStore store;
    Adjacency adj;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ';');)
            fields.push_back(f);
        if (fields.size() != 5)
            throw ParseError("landmark record needs 5 ';'-separated fields", line_no);
        auto tokens = [](const std::string& s) {
            std::vector<std::string> t;
            std::istringstream is(s);
            for (std::string w; is >> w;)
                t.push_back(w);
            return t;
        };
        const auto id_tok = tokens(fields[0]);
        const auto n_tok = tokens(fields[1]);
        const auto kp_tok = tokens(fields[2]);
        const auto anchor_tok = tokens(fields[3]);
        const auto w_tok = tokens(fields[4]);
        if (id_tok.size() != 1 || n_tok.size() != 1 || anchor_tok.size() != 3 || w_tok.size() != 1)
            throw ParseError("malformed landmark record", line_no);
        const int id = detail::parse_int(id_tok[0], line_no, "id");
        const int n = detail::parse_int(n_tok[0], line_no, "kp_count");
        if (id != static_cast<int>(store.cells.size()))
            throw ParseError("landmark ids must be sequential from 0", line_no);
        if (n < 0 || kp_tok.size() != static_cast<std::size_t>(2 * n))
            throw ParseError("keypoint list does not match kp_count", line_no);
        std::vector<Point2> kps;
        for (int k = 0; k < n; ++k)
            kps.push_back({detail::parse_double(kp_tok[static_cast<std::size_t>(2 * k)], line_no, "keypoint x"),
                           detail::parse_double(kp_tok[static_cast<std::size_t>(2 * k + 1)], line_no, "keypoint y")});
        const CellIndex anchor{detail::parse_int(anchor_tok[0], line_no, "anchor_xp"),
                               detail::parse_int(anchor_tok[1], line_no, "anchor_yp"),
                               detail::parse_int(anchor_tok[2], line_no, "anchor_tp")};
        const double w = detail::parse_double(w_tok[0], line_no, "weight");
        if (!(w >= 0.0))
            throw ParseError("negative adjacency weight", line_no);
        store.cells.push_back({id, Landmark::from_keypoints(std::move(kps)), 0.0, false});
        adj.links.push_back({id, anchor, w});
    }
    return {std::move(store), std::move(adj)};
}

inline std::pair<LandmarkStore, Adjacency> load_landmarks(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open landmark store " + path.string(), 0);
    return load_landmarks(in);
}

}  // namespace bioloc
