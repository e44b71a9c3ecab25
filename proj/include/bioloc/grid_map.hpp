#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace bioloc {

/// 2D occupancy grid. Cell (0, 0) has its lower-left corner at `origin`;
/// `cells` is row-major with row 0 at the bottom (lowest y).
struct OccupancyGrid {
    int width = 0;
    int height = 0;
    double resolution = 0.1;
    Pose origin;
    std::vector<double> cells;

    OccupancyGrid() = default;
    OccupancyGrid(int w, int h, double res, Pose org, double fill = 0.0)
        : width(w), height(h), resolution(res), origin(org),
          cells(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill)
    {
        validate();
    }

    void validate() const
    {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("OccupancyGrid: empty grid");
        if (!(resolution > 0.0))
            throw std::invalid_argument("OccupancyGrid: resolution must be positive");
        if (cells.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw std::invalid_argument("OccupancyGrid: cell array does not match width*height");
        for (double v : cells)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("OccupancyGrid: occupancy outside [0,1]");
    }

    bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width && iy < height; }

    double& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * width + ix]; }
    double at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * width + ix]; }

    double extent_x() const { return width * resolution; }
    double extent_y() const { return height * resolution; }

    /// Largest |coordinate| reached by the map; sizes a network centred on the origin.
    double max_abs_coord() const
    {
        return std::max({std::abs(origin.x), std::abs(origin.y), std::abs(origin.x + extent_x()),
                         std::abs(origin.y + extent_y())});
    }

    /// World coordinates of the centre of cell (ix, iy).
    std::pair<double, double> cell_center(int ix, int iy) const
    {
        return {origin.x + (ix + 0.5) * resolution, origin.y + (iy + 0.5) * resolution};
    }

    friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;
};

/// Total lookup: out-of-bounds cells read as 0 (unknown space matches nothing).
inline double occupancy_at(const OccupancyGrid& m, int ix, int iy)
{
    return m.in_bounds(ix, iy) ? m.at(ix, iy) : 0.0;
}

inline std::pair<int, int> world_to_grid(const OccupancyGrid& m, double x, double y)
{
    return {static_cast<int>(std::floor((x - m.origin.x) / m.resolution)),
            static_cast<int>(std::floor((y - m.origin.y) / m.resolution))};
}

inline bool is_free_world(const OccupancyGrid& m, double x, double y, double occ_threshold = 0.5)
{
    const auto [ix, iy] = world_to_grid(m, x, y);
    return m.in_bounds(ix, iy) && m.at(ix, iy) < occ_threshold;
}

/// Distance from `from` along world bearing from.theta + bearing to the first
/// cell with occupancy >= occ_threshold, using an exact cell-by-cell walk.
/// Returns max_range when nothing is hit (including leaving the map).
inline double raycast(const OccupancyGrid& m, const Pose& from, double bearing, double max_range,
                      double occ_threshold = 0.5)
{
    if (max_range < 0.0)
        throw std::invalid_argument("raycast: negative max_range");
    const double gx = (from.x - m.origin.x) / m.resolution;
    const double gy = (from.y - m.origin.y) / m.resolution;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    if (!m.in_bounds(ix, iy))
        throw std::out_of_range("raycast: start pose outside grid");
    if (max_range == 0.0)
        return 0.0;
    if (m.at(ix, iy) >= occ_threshold)
        return 0.0;

    const double angle = from.theta + bearing;
    const double dx = std::cos(angle), dy = std::sin(angle);
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    // parametric distance (in cells) to the next vertical / horizontal boundary
    double t_max_x = step_x > 0 ? (ix + 1 - gx) / dx : (step_x < 0 ? (ix - gx) / dx : inf);
    double t_max_y = step_y > 0 ? (iy + 1 - gy) / dy : (step_y < 0 ? (iy - gy) / dy : inf);
    const double t_delta_x = step_x != 0 ? std::abs(1.0 / dx) : inf;
    const double t_delta_y = step_y != 0 ? std::abs(1.0 / dy) : inf;
    const double t_limit = max_range / m.resolution;

    while (true) {
        double t;
        if (t_max_x < t_max_y) {
            t = t_max_x;
            t_max_x += t_delta_x;
            ix += step_x;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            iy += step_y;
        }
        if (t >= t_limit || !m.in_bounds(ix, iy))
            return max_range;
        if (m.at(ix, iy) >= occ_threshold)
            return t * m.resolution;
    }
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok, std::size_t line, const char* what)
{
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError(std::string("expected number for ") + what + ", got '" + tok + "'", line);
    return v;
}

inline int parse_int(const std::string& tok, std::size_t line, const char* what)
{
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError(std::string("expected integer for ") + what + ", got '" + tok + "'", line);
    return v;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open file " + path.string(), 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline OccupancyGrid parse_ascii_map(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return true;
        }
        return false;
    };
    if (!next_line())
        throw ParseError("empty map file", 1);
    std::istringstream header(line);
    std::vector<std::string> tok;
    for (std::string t; header >> t;)
        tok.push_back(t);
    if (tok.size() != 5)
        throw ParseError("header must be 'cols rows resolution origin_x origin_y'", line_no);
    const int cols = parse_int(tok[0], line_no, "cols");
    const int rows = parse_int(tok[1], line_no, "rows");
    const double res = parse_double(tok[2], line_no, "resolution");
    const double ox = parse_double(tok[3], line_no, "origin_x");
    const double oy = parse_double(tok[4], line_no, "origin_y");
    if (cols <= 0 || rows <= 0 || !(res > 0.0))
        throw ParseError("non-positive map dimensions", line_no);

    OccupancyGrid g(cols, rows, res, Pose(ox, oy, 0.0));
    for (int r = 0; r < rows; ++r) {
        if (!next_line())
            throw ParseError("missing map row", line_no + 1);
        if (static_cast<int>(line.size()) != cols)
            throw ParseError("row has " + std::to_string(line.size()) + " characters, expected " +
                                 std::to_string(cols),
                             line_no);
        const int iy = rows - 1 - r;
        for (int c = 0; c < cols; ++c) {
            const char ch = line[static_cast<std::size_t>(c)];
            double v;
            if (ch == '#')
                v = 1.0;
            else if (ch == '.')
                v = 0.0;
            else if (ch >= '0' && ch <= '9')
                v = (ch - '0') / 9.0;
            else
                throw ParseError(std::string("invalid map character '") + ch + "'", line_no);
            g.at(c, iy) = v;
        }
    }
    return g;
}

inline void skip_pgm_space(const std::string& data, std::size_t& pos)
{
    while (pos < data.size()) {
        if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n')
                ++pos;
        } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
}

inline int read_pgm_int(const std::string& data, std::size_t& pos)
{
    skip_pgm_space(data, pos);
    const std::size_t start = pos;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos])))
        ++pos;
    if (start == pos)
        throw ParseError("malformed PGM header", start);
    return std::stoi(data.substr(start, pos - start));
}

inline std::filesystem::path pgm_sidecar(const std::filesystem::path& pgm)
{
    auto yaml = pgm;
    yaml.replace_extension(".yaml");
    if (std::filesystem::exists(yaml))
        return yaml;
    auto meta = pgm;
    meta += ".meta";
    return meta;
}

inline OccupancyGrid parse_pgm_map(const std::string& data, const std::filesystem::path& sidecar)
{
    std::size_t pos = 2;
    const int w = read_pgm_int(data, pos);
    const int h = read_pgm_int(data, pos);
    const int maxval = read_pgm_int(data, pos);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw ParseError("invalid PGM dimensions or maxval", pos);
    ++pos;  // single whitespace before raster
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bpp;
    if (data.size() < pos + need)
        throw ParseError("truncated PGM raster", data.size());

    double res = 0.0, ox = 0.0, oy = 0.0;
    bool have_res = false, have_origin = false;
    {
        std::istringstream meta(read_file(sidecar));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(meta, line)) {
            ++line_no;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            if (key == "resolution:") {
                std::string v;
                ls >> v;
                res = parse_double(v, line_no, "resolution");
                have_res = true;
            } else if (key == "origin:") {
                std::string vx, vy, vt;
                ls >> vx >> vy >> vt;
                ox = parse_double(vx, line_no, "origin x");
                oy = parse_double(vy, line_no, "origin y");
                if (!vt.empty() && parse_double(vt, line_no, "origin theta") != 0.0)
                    throw ParseError("rotated map origins are not supported", line_no);
                have_origin = true;
            }
        }
        if (!have_res || !have_origin)
            throw ParseError("sidecar needs 'resolution:' and 'origin:' lines", line_no);
    }

    OccupancyGrid g(w, h, res, Pose(ox, oy, 0.0));
    const auto* raster = reinterpret_cast<const unsigned char*>(data.data() + pos);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t i = (static_cast<std::size_t>(r) * w + c) * bpp;
            const int gray = bpp == 1 ? raster[i] : (raster[i] << 8) | raster[i + 1];
            if (gray > maxval)
                throw ParseError("PGM pixel exceeds maxval", pos + i);
            g.at(c, h - 1 - r) = 1.0 - static_cast<double>(gray) / maxval;
        }
    }
    return g;
}

}  // namespace detail

/// Loads a binary PGM (P5, with a `.yaml` or `.meta` sidecar holding
/// `resolution:` and `origin:` lines) or the ASCII grid format.
inline OccupancyGrid load_map(const std::filesystem::path& path)
{
    const std::string data = detail::read_file(path);
    if (data.size() >= 2 && data[0] == 'P' && data[1] == '5')
        return detail::parse_pgm_map(data, detail::pgm_sidecar(path));
    return detail::parse_ascii_map(data);
}

inline char occupancy_char(double v)
{
    if (v >= 1.0)
        return '#';
    if (v <= 0.0)
        return '.';
    return static_cast<char>('0' + static_cast<int>(std::lround(v * 9.0)));
}

inline std::string to_ascii(const OccupancyGrid& g)
{
    std::string out = std::to_string(g.width) + " " + std::to_string(g.height) + " " +
                      detail::format_double(g.resolution) + " " + detail::format_double(g.origin.x) + " " +
                      detail::format_double(g.origin.y) + "\n";
    for (int iy = g.height - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < g.width; ++ix)
            out.push_back(occupancy_char(g.at(ix, iy)));
        out.push_back('\n');
    }
    return out;
}

/// Writes the ASCII format. Values other than 0, 1 and k/9 are quantized.
inline void save_map(const OccupancyGrid& g, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write map " + path.string());
    out << to_ascii(g);
}

/// Writes a P5 PGM plus `<stem>.yaml` sidecar.
inline void save_pgm(const OccupancyGrid& g, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write map " + path.string());
    out << "P5\n" << g.width << ' ' << g.height << "\n255\n";
    for (int iy = g.height - 1; iy >= 0; --iy)
        for (int ix = 0; ix < g.width; ++ix)
            out.put(static_cast<char>(std::lround((1.0 - g.at(ix, iy)) * 255.0)));
    auto side = path;
    side.replace_extension(".yaml");
    std::ofstream meta(side);
    meta << "resolution: " << detail::format_double(g.resolution) << "\n"
         << "origin: " << detail::format_double(g.origin.x) << ' ' << detail::format_double(g.origin.y)
         << " 0\n";
}

}  // namespace bioloc
