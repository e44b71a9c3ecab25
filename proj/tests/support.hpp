#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <bioloc/bioloc.hpp>

namespace testing_support {

using namespace bioloc;

// Closed square room of `cells` x `cells` with one-cell walls, centred on the origin.
inline OccupancyGrid square_room(int cells, double res = 0.1)
{
    OccupancyGrid g(cells, cells, res, Pose(-0.5 * cells * res, -0.5 * cells * res, 0.0));
    for (int i = 0; i < cells; ++i) {
        g.at(i, 0) = g.at(i, cells - 1) = 1.0;
        g.at(0, i) = g.at(cells - 1, i) = 1.0;
    }
    return g;
}

// Square room with an asymmetric L-shaped partition and a pillar: corner rich.
inline OccupancyGrid feature_room(int cells = 80, double res = 0.1)
{
    OccupancyGrid g = square_room(cells, res);
    for (int i = 10; i < 35; ++i)
        g.at(i, 25) = g.at(i, 26) = 1.0;
    for (int j = 26; j < 40; ++j)
        g.at(34, j) = g.at(35, j) = 1.0;
    for (int i = 55; i < 61; ++i)
        for (int j = 50; j < 58; ++j)
            g.at(i, j) = 1.0;
    for (int j = 60; j < cells - 1; ++j)
        g.at(20, j) = 1.0;
    return g;
}

// Disc of free space of radius r (m) inside a filled square.
inline OccupancyGrid circular_arena(double r, double res = 0.1)
{
    const int n = static_cast<int>(std::ceil(2 * r / res)) + 6;
    OccupancyGrid g(n, n, res, Pose(-0.5 * n * res, -0.5 * n * res, 0.0), 1.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const auto [cx, cy] = g.cell_center(x, y);
            if (std::hypot(cx, cy) < r)
                g.at(x, y) = 0.0;
        }
    return g;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("bioloc_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing_support
