#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <bioloc/localizer.hpp>
#include <bioloc/observation.hpp>

#include "support.hpp"

using namespace bioloc;

namespace {

// Endpoint-by-endpoint evaluation straight from the map.
double brute_likelihood(const OccupancyGrid& m, const LidarScan& z, const CellIndex& c, const NetworkGeometry& g)
{
    const Pose p = cell_to_pose(c, g);
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < z.ranges.size(); ++i) {
        if (z.ranges[i] >= z.max_range)
            continue;
        const double a = p.theta + z.angle_min + static_cast<double>(i) * z.angle_increment;
        const double u = (p.x + z.ranges[i] * std::cos(a) - m.origin.x) / m.resolution;
        const double v = (p.y + z.ranges[i] * std::sin(a) - m.origin.y) / m.resolution;
        double best = 0.0;
        for (double eu : {-0.5, 0.5})
            for (double ev : {-0.5, 0.5})
                best = std::max(best, occupancy_at(m, static_cast<int>(std::floor(u + eu)),
                                                   static_cast<int>(std::floor(v + ev))));
        sum += best;
        ++n;
    }
    return n ? sum / n : 0.0;
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

OccupancyGrid fuzz_map(std::mt19937_64& rng, int n)
{
    OccupancyGrid g(n, n, 0.1, Pose(-0.05 * n, -0.05 * n, 0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : g.cells)
        v = u(rng) < 0.7 ? 0.0 : u(rng);
    return g;
}

LidarScan fuzz_scan(std::mt19937_64& rng, int beams, double max_range)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LidarScan z;
    z.max_range = max_range;
    z.angle_min = -kPi + u(rng);
    z.angle_increment = kTwoPi / beams * (0.5 + u(rng));
    for (int i = 0; i < beams; ++i)
        z.ranges.push_back(u(rng) < 0.1 ? max_range : max_range * u(rng));
    return z;
}

}  // namespace

TEST(ScanLikelihood, AllEndpointsOnWalls)
{
    const auto m = testing_support::square_room(40);
    const auto g = default_geometry(m);
    const CellIndex c = pose_to_cell(Pose(0.0, 0.0, 0.0), g);
    const auto z = simulate_scan(m, cell_to_pose(c, g), 360, kTwoPi, 8.0, 0.0, 1u);
    EXPECT_DOUBLE_EQ(scan_likelihood(m, z, c, g), 1.0);
}

TEST(ScanLikelihood, FreeMapScoresZero)
{
    const OccupancyGrid m(40, 40, 0.1, Pose(-2, -2, 0));
    const auto g = default_geometry(m);
    LidarScan z;
    z.ranges.assign(90, 1.0);
    z.angle_increment = kTwoPi / 90;
    EXPECT_EQ(scan_likelihood(m, z, pose_to_cell(Pose(0, 0, 0), g), g), 0.0);
}

TEST(ScanLikelihood, HalfOnWalls)
{
    OccupancyGrid m(40, 40, 0.1, Pose(-2, -2, 0));
    for (int y = 0; y < 40; ++y)
        m.at(35, y) = 1.0;  // wall at x in [1.5, 1.6)
    const auto g = default_geometry(m);
    const CellIndex c = pose_to_cell(Pose(0.0, 0.0, 0.0), g);
    const Pose p = cell_to_pose(c, g);
    // heading layer 18 points at +k/2; two beams: one into the wall, one into open space
    LidarScan z;
    z.angle_min = -p.theta;
    z.angle_increment = kPi;
    z.ranges = {1.5 - p.x + 0.05, 1.0};
    EXPECT_DOUBLE_EQ(scan_likelihood(m, z, c, g), 0.5);
    EXPECT_DOUBLE_EQ(brute_likelihood(m, z, c, g), 0.5);
}

TEST(ScanLikelihood, EmptyScanRejected)
{
    const auto m = testing_support::square_room(10);
    LidarScan z;
    EXPECT_THROW(scan_likelihood(m, z, {0, 0, 0}, default_geometry(m)), std::invalid_argument);
}

TEST(ScanLikelihood, MaxRangeBeamsExcluded)
{
    const auto m = testing_support::square_room(40);
    const auto g = default_geometry(m);
    const CellIndex c = pose_to_cell(Pose(0.0, 0.0, 0.0), g);
    auto z = simulate_scan(m, cell_to_pose(c, g), 36, kTwoPi, 8.0, 0.0, 1u);
    const double full = scan_likelihood(m, z, c, g);
    for (std::size_t i = 0; i < z.ranges.size(); i += 2)
        z.ranges[i] = z.max_range;
    EXPECT_DOUBLE_EQ(scan_likelihood(m, z, c, g), full);
    z.ranges.assign(z.ranges.size(), z.max_range);
    EXPECT_EQ(scan_likelihood(m, z, c, g), 0.0);
}

TEST(ScanLikelihood, MatchesBruteForce)
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = fuzz_map(rng, 30);
        const auto g = NetworkGeometry::with_headings(0.1, 40, 36);
        const auto z = fuzz_scan(rng, 60, 3.0);
        ScanMatcher matcher(m, g);
        matcher.set_scan(z);
        std::uniform_int_distribution<int> xy(0, 39), th(0, 35);
        for (int k = 0; k < 200; ++k) {
            const CellIndex c{xy(rng), xy(rng), th(rng)};
            EXPECT_NEAR(matcher.likelihood(c), brute_likelihood(m, z, c, g), 1e-12);
        }
    }
}

TEST(ScanLikelihood, FuzzedBounds)
{
    std::mt19937_64 rng(32);
    std::uniform_int_distribution<int> beams(1, 120);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = fuzz_map(rng, 20);
        const auto g = NetworkGeometry::with_headings(0.1, 30, 36);
        const auto z = fuzz_scan(rng, beams(rng), 5.0);
        ScanMatcher matcher(m, g, 1 + trial % 3);
        matcher.set_scan(z);
        std::uniform_int_distribution<int> xy(0, 29), th(0, 35);
        std::uniform_real_distribution<double> pos(-4, 4), ang(-kPi, kPi);
        for (int k = 0; k < 50; ++k) {
            const double a = matcher.likelihood(CellIndex{xy(rng), xy(rng), th(rng)});
            const double b = matcher.likelihood(Pose(pos(rng), pos(rng), ang(rng)));
            ASSERT_GE(a, 0.0);
            ASSERT_LE(a, 1.0);
            ASSERT_GE(b, 0.0);
            ASSERT_LE(b, 1.0);
        }
    }
}

TEST(ScanLikelihood, RotationInvariant)
{
    const auto m = testing_support::feature_room(80);
    const auto r = rotate90(m);
    const auto g = default_geometry(m);
    const int n = g.n_xy;
    ASSERT_EQ(g.n_theta % 4, 0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pos(-3.5, 3.5), ang(-kPi, kPi);
    int done = 0;
    while (done < 200) {
        const Pose p(pos(rng), pos(rng), ang(rng));
        if (!is_free_world(m, p.x, p.y))
            continue;
        const auto z = simulate_scan(m, p, 180, kTwoPi, 8.0, 0.01, rng);
        const CellIndex c = pose_to_cell(Pose(pos(rng), pos(rng), ang(rng)), g);
        const CellIndex cr{n - 1 - c.yp, c.xp, (c.tp + g.n_theta / 4) % g.n_theta};
        EXPECT_NEAR(scan_likelihood(m, z, c, g), scan_likelihood(r, z, cr, g), 1e-6);
        ++done;
    }
}

TEST(ScanLikelihood, TrueCellBeatsDistantCells)
{
    const auto m = testing_support::feature_room(80);
    const auto g = default_geometry(m);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> pos(-3.5, 3.5), ang(-kPi, kPi);
    int trials = 0;
    while (trials < 10) {
        const CellIndex truth = pose_to_cell(Pose(pos(rng), pos(rng), ang(rng)), g);
        const Pose tp = cell_to_pose(truth, g);
        if (!is_free_world(m, tp.x, tp.y))
            continue;
        const auto z = simulate_scan(m, tp, 360, kTwoPi, 8.0, 0.0, rng);
        ScanMatcher matcher(m, g);
        matcher.set_scan(z);
        const double best = matcher.likelihood(truth);
        for (int y = 0; y < g.n_xy; ++y)
            for (int x = 0; x < g.n_xy; ++x) {
                if (std::max(std::abs(x - truth.xp), std::abs(y - truth.yp)) < 5)
                    continue;
                for (int t = 0; t < g.n_theta; ++t)
                    ASSERT_GE(best, matcher.likelihood(CellIndex{x, y, t})) << "trial " << trials;
            }
        ++trials;
    }
}

TEST(SimulateScan, NoiselessEqualsRaycast)
{
    const auto m = testing_support::square_room(40);
    const Pose p(0.0, 0.0, 0.3);
    const auto z = simulate_scan(m, p, 360, kTwoPi, 8.0, 0.0, 1u);
    ASSERT_EQ(z.ranges.size(), 360u);
    for (std::size_t i = 0; i < z.ranges.size(); ++i)
        EXPECT_EQ(z.ranges[i], raycast(m, p, z.bearing(i), 8.0));
}

TEST(SimulateScan, SeededDeterminism)
{
    const auto m = testing_support::feature_room();
    const Pose p(1.0, -1.0, 2.0);
    EXPECT_EQ(simulate_scan(m, p, 360, kTwoPi, 8.0, 0.02, 77u), simulate_scan(m, p, 360, kTwoPi, 8.0, 0.02, 77u));
    EXPECT_NE(simulate_scan(m, p, 360, kTwoPi, 8.0, 0.02, 77u), simulate_scan(m, p, 360, kTwoPi, 8.0, 0.02, 78u));
}

TEST(SimulateScan, NoiseStd)
{
    OccupancyGrid m(200, 200, 0.1, Pose(-10, -10, 0));
    for (int y = 0; y < 200; ++y)
        m.at(150, y) = 1.0;  // flat wall at x = 5
    const Pose p(0.0, 0.0, 0.0);
    const auto z = simulate_scan(m, p, 10000, 0.5, 20.0, 0.02, 123u);
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < z.ranges.size(); ++i) {
        const double d = z.ranges[i] - raycast(m, p, z.bearing(i), 20.0);
        s += d;
        s2 += d * d;
    }
    const double n = static_cast<double>(z.ranges.size());
    const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
    EXPECT_NEAR(sd, 0.02, 0.002);
}

TEST(SimulateScan, RejectsOccupiedPose)
{
    const auto m = testing_support::square_room(20);
    EXPECT_THROW(simulate_scan(m, Pose(-0.95, 0, 0), 10, kTwoPi, 8.0, 0.0, 1u), std::invalid_argument);
}

TEST(ScanCsv, RoundTrip)
{
    std::mt19937_64 rng(3);
    const auto z = fuzz_scan(rng, 17, 6.5);
    std::ostringstream out;
    write_scan_csv_row(out, 42, z);
    std::string line = out.str();
    line.pop_back();
    const auto [t, back] = parse_scan_csv_row(line, 1);
    EXPECT_EQ(t, 42);
    EXPECT_EQ(back, z);
    EXPECT_THROW(parse_scan_csv_row("1,3,0,0.1,8,1,2", 5), ParseError);
    EXPECT_THROW(parse_scan_csv_row("1,2,0,0.1,8,1,9", 5), ParseError);
}
