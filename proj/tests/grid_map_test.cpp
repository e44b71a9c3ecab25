#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include <bioloc/grid_map.hpp>

#include "support.hpp"

using namespace bioloc;
using testing_support::temp_dir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// n x n random map centred on the origin
OccupancyGrid random_map(int n, std::uint64_t seed, double fill = 0.15)
{
    OccupancyGrid g(n, n, 0.1, Pose(-0.05 * n, -0.05 * n, 0));
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution occ(fill);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            g.at(x, y) = (x == 0 || y == 0 || x == n - 1 || y == n - 1 || occ(rng)) ? 1.0 : 0.0;
    return g;
}

OccupancyGrid rotate90(const OccupancyGrid& m)
{
    OccupancyGrid r = m;
    const int n = m.width;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            r.at(n - 1 - y, x) = m.at(x, y);
    return r;
}

}  // namespace

TEST(LoadMap, AsciiRing)
{
    const auto dir = temp_dir("ascii_ring");
    write_text(dir / "ring.txt", "3 3 1.0 0 0\n###\n#.#\n###\n");
    const auto g = load_map(dir / "ring.txt");
    ASSERT_EQ(g.width, 3);
    ASSERT_EQ(g.height, 3);
    int ones = 0;
    for (double v : g.cells)
        ones += v == 1.0;
    EXPECT_EQ(ones, 8);
    EXPECT_EQ(g.at(1, 1), 0.0);
}

TEST(LoadMap, AsciiDigitsAndRowOrder)
{
    const auto dir = temp_dir("ascii_digits");
    write_text(dir / "m.txt", "2 2 0.5 -1 2\r\n9.\r\n03\r\n");
    const auto g = load_map(dir / "m.txt");
    EXPECT_EQ(g.at(0, 1), 1.0);  // top row is written first
    EXPECT_EQ(g.at(1, 1), 0.0);
    EXPECT_EQ(g.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(g.at(1, 0), 3.0 / 9.0);
    EXPECT_EQ(g.origin.x, -1.0);
    EXPECT_EQ(g.origin.y, 2.0);
    EXPECT_EQ(g.resolution, 0.5);
}

TEST(LoadMap, AsciiErrorsCarryLine)
{
    const auto dir = temp_dir("ascii_err");
    write_text(dir / "a.txt", "3 2 1.0 0 0\n###\n#x#\n");
    try {
        load_map(dir / "a.txt");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.location(), 3u);
    }
    write_text(dir / "b.txt", "3 2 1.0 0\n###\n###\n");
    EXPECT_THROW(load_map(dir / "b.txt"), ParseError);
    write_text(dir / "c.txt", "3 2 1.0 0 0\n###\n");
    EXPECT_THROW(load_map(dir / "c.txt"), ParseError);
    write_text(dir / "d.txt", "3 1 1.0 0 0\n####\n");
    EXPECT_THROW(load_map(dir / "d.txt"), ParseError);
    EXPECT_THROW(load_map(dir / "missing.txt"), ParseError);
}

TEST(LoadMap, PgmDarkIsOccupied)
{
    const auto dir = temp_dir("pgm");
    std::string raster = "P5\n# comment\n2 1\n255\n";
    raster.push_back(static_cast<char>(0));
    raster.push_back(static_cast<char>(255));
    write_text(dir / "m.pgm", raster);
    write_text(dir / "m.yaml", "image: m.pgm\nresolution: 0.05\norigin: -1.5 2.0 0.0\n");
    const auto g = load_map(dir / "m.pgm");
    EXPECT_EQ(g.at(0, 0), 1.0);
    EXPECT_EQ(g.at(1, 0), 0.0);
    EXPECT_EQ(g.resolution, 0.05);
    EXPECT_EQ(g.origin.x, -1.5);

    write_text(dir / "bad.pgm", "P5\n2 2\n255\n\x01");
    write_text(dir / "bad.yaml", "resolution: 0.05\norigin: 0 0 0\n");
    EXPECT_THROW(load_map(dir / "bad.pgm"), ParseError);
}

TEST(LoadMap, PgmRoundTrip)
{
    const auto dir = temp_dir("pgm_rt");
    const auto g = random_map(12, 4);
    save_pgm(g, dir / "r.pgm");
    EXPECT_EQ(load_map(dir / "r.pgm"), g);
}

TEST(SaveMap, AsciiRoundTrip)
{
    const auto dir = temp_dir("ascii_rt");
    auto g = random_map(17, 9);
    for (int k = 0; k <= 9; ++k)
        g.at(k + 3, 5) = k / 9.0;
    g.origin = Pose(-0.85, 1.25, 0);
    save_map(g, dir / "g.txt");
    EXPECT_EQ(load_map(dir / "g.txt"), g);
}

TEST(OccupancyAt, OutOfBoundsIsFree)
{
    const auto g = testing_support::square_room(5);
    EXPECT_EQ(occupancy_at(g, 0, 0), 1.0);
    EXPECT_EQ(occupancy_at(g, -1, 2), 0.0);
    EXPECT_EQ(occupancy_at(g, g.width, 2), 0.0);
    EXPECT_EQ(occupancy_at(g, 2, g.height), 0.0);
}

TEST(WorldToGrid, Floors)
{
    const OccupancyGrid g(20, 20, 0.1, Pose(0, 0, 0));
    EXPECT_EQ(world_to_grid(g, 0.05, 0.05), std::make_pair(0, 0));
    EXPECT_EQ(world_to_grid(g, 1.0, 0.0), std::make_pair(10, 0));
    EXPECT_EQ(world_to_grid(g, -0.01, 0.0), std::make_pair(-1, 0));
}

TEST(Raycast, WallAtFiveMetres)
{
    // 10 x 10 m centred on the origin, wall column at x = 5 m (outside) replaced by x in [5, 5.1)
    OccupancyGrid g(110, 100, 0.1, Pose(-5, -5, 0));
    for (int y = 0; y < g.height; ++y)
        g.at(100, y) = 1.0;
    EXPECT_NEAR(raycast(g, Pose(0, 0, 0), 0.0, 20.0), 5.0, 0.05);
    EXPECT_NEAR(raycast(g, Pose(0, 0, kPi / 2), -kPi / 2, 20.0), 5.0, 0.05);
    // oblique: distance to the plane x = 5 is 5/cos(a)
    EXPECT_NEAR(raycast(g, Pose(0, 0, 0), 0.5, 20.0), 5.0 / std::cos(0.5), 1e-9);
}

TEST(Raycast, Degenerate)
{
    const OccupancyGrid free(50, 50, 0.1, Pose(-2.5, -2.5, 0));
    EXPECT_EQ(raycast(free, Pose(0, 0, 0), 1.0, 3.0), 3.0);
    EXPECT_EQ(raycast(free, Pose(0, 0, 0), 1.0, 0.0), 0.0);
    EXPECT_THROW(raycast(free, Pose(10, 0, 0), 0.0, 1.0), std::out_of_range);
}

TEST(Raycast, ThinDiagonalWallDoesNotLeak)
{
    OccupancyGrid g(40, 40, 0.1, Pose(0, 0, 0));
    for (int i = 0; i < 40; ++i)
        g.at(i, 39 - i) = 1.0;  // anti-diagonal, one cell thick
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const Pose p(0.2 + u(rng), 0.2 + u(rng), 0.0);
        const double r = raycast(g, p, kPi / 4 + (u(rng) - 0.5), 10.0);
        EXPECT_LT(r, 10.0);
    }
}

TEST(Raycast, MonotoneInMaxRange)
{
    const auto g = random_map(40, 21);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(-1.8, 1.8), ang(-kPi, kPi), rng_max(0.0, 6.0);
    for (int k = 0; k < 2000; ++k) {
        const Pose p(pos(rng), pos(rng), 0.0);
        if (!is_free_world(g, p.x, p.y))
            continue;
        const double b = ang(rng);
        const double m1 = rng_max(rng), m2 = m1 + rng_max(rng);
        const double r1 = raycast(g, p, b, m1), r2 = raycast(g, p, b, m2);
        EXPECT_LE(r1, m1);
        EXPECT_LE(r2, m2);
        EXPECT_LE(r1, r2);
    }
}

TEST(Raycast, RotationSymmetry)
{
    const auto g = random_map(40, 13);
    const auto r = rotate90(g);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> pos(-1.9, 1.9), ang(-kPi, kPi);
    int checked = 0;
    while (checked < 1000) {
        const Pose p(pos(rng), pos(rng), ang(rng));
        if (!is_free_world(g, p.x, p.y))
            continue;
        const Pose q(-p.y, p.x, p.theta + kPi / 2);
        const double b = ang(rng);
        EXPECT_NEAR(raycast(g, p, b, 5.0), raycast(r, q, b, 5.0), g.resolution);
        ++checked;
    }
}

TEST(OccupancyGrid, Validation)
{
    EXPECT_THROW(OccupancyGrid(0, 3, 0.1, Pose()), std::invalid_argument);
    EXPECT_THROW(OccupancyGrid(3, 3, 0.0, Pose()), std::invalid_argument);
    EXPECT_THROW(OccupancyGrid(3, 3, 0.1, Pose(), 1.5), std::invalid_argument);
}
