#include <gtest/gtest.h>

#include <random>

#include <bioloc/geometry.hpp>

using namespace bioloc;

namespace {

NetworkGeometry g100() { return NetworkGeometry::with_headings(0.1, 100, 36); }

void expect_cell(CellIndex c, int xp, int yp, int tp)
{
    EXPECT_EQ(c.xp, xp);
    EXPECT_EQ(c.yp, yp);
    EXPECT_EQ(c.tp, tp);
}

}  // namespace

TEST(PoseToCell, OriginIsNetworkCentre)
{
    expect_cell(pose_to_cell(Pose(0, 0, 0), g100()), 50, 50, 18);
}

TEST(PoseToCell, HandEvaluated)
{
    // floor(1.23/0.1 + 50) = 62, floor(-0.51/0.1 + 50) = 44, floor((pi/18)/(pi/18) + 18) = 19
    expect_cell(pose_to_cell(Pose(1.23, -0.51, kPi / 18), g100()), 62, 44, 19);
    expect_cell(pose_to_cell(Pose(-0.05, 0, -kPi), g100()), 49, 50, 0);
}

TEST(PoseToCell, OutOfExtentNamesAxis)
{
    try {
        pose_to_cell(Pose(0, 5.0, 0), g100());
        FAIL();
    } catch (const std::out_of_range& e) {
        EXPECT_NE(std::string(e.what()).find(" y "), std::string::npos);
    }
    EXPECT_THROW(pose_to_cell(Pose(-5.01, 0, 0), g100()), std::out_of_range);
    EXPECT_NO_THROW(pose_to_cell(Pose(-5.0, 4.99, 0), g100()));
}

TEST(CellToPose, CellCentres)
{
    const Pose a = cell_to_pose({50, 50, 18}, g100());
    EXPECT_NEAR(a.x, 0.05, 1e-12);
    EXPECT_NEAR(a.y, 0.05, 1e-12);
    EXPECT_NEAR(a.theta, kPi / 36, 1e-12);
    const Pose b = cell_to_pose({0, 0, 0}, g100());
    EXPECT_NEAR(b.x, -4.95, 1e-12);
    EXPECT_NEAR(b.y, -4.95, 1e-12);
    EXPECT_NEAR(b.theta, -kPi * 35 / 36, 1e-12);
    EXPECT_THROW(cell_to_pose({100, 0, 0}, g100()), std::out_of_range);
    EXPECT_THROW(cell_to_pose({0, -1, 0}, g100()), std::out_of_range);
    EXPECT_THROW(cell_to_pose({0, 0, 36}, g100()), std::out_of_range);
}

TEST(CellToPose, RoundTripIsExact)
{
    for (double k : {0.1, 0.05, 0.25}) {
        const auto g = NetworkGeometry::with_headings(k, 8, 8);
        for (int x = 0; x < 8; ++x)
            for (int y = 0; y < 8; ++y)
                for (int t = 0; t < 8; ++t) {
                    const CellIndex c{x, y, t};
                    EXPECT_EQ(pose_to_cell(cell_to_pose(c, g), g), c);
                }
    }
    const auto g = g100();
    for (int x = 0; x < 100; x += 7)
        for (int y = 0; y < 100; y += 3)
            for (int t = 0; t < 36; ++t) {
                const CellIndex c{x, y, t};
                ASSERT_EQ(pose_to_cell(cell_to_pose(c, g), g), c);
            }
}

TEST(PoseToCell, PoseInsideItsCell)
{
    const auto g = g100();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> xy(-4.99, 4.99), th(-kPi, kPi);
    for (int i = 0; i < 2000; ++i) {
        const Pose p(xy(rng), xy(rng), th(rng));
        const Pose c = cell_to_pose(pose_to_cell(p, g), g);
        EXPECT_LE(std::abs(p.x - c.x), g.k_xy / 2 + 1e-12);
        EXPECT_LE(std::abs(p.y - c.y), g.k_xy / 2 + 1e-12);
        EXPECT_LE(std::abs(normalize_angle(p.theta - c.theta)), g.k_theta / 2 + 1e-12);
    }
}

TEST(NormalizeAngle, Examples)
{
    EXPECT_EQ(normalize_angle(0.0), 0.0);
    EXPECT_NEAR(normalize_angle(3 * kPi), -kPi, 1e-12);
    EXPECT_EQ(normalize_angle(-kPi), -kPi);
    EXPECT_EQ(normalize_angle(kPi), -kPi);
    EXPECT_THROW(normalize_angle(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
    EXPECT_THROW(normalize_angle(std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST(NormalizeAngle, RangeAndCongruence)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> a(-100.0, 100.0);
    for (int i = 0; i < 10000; ++i) {
        const double v = a(rng);
        const double r = normalize_angle(v);
        ASSERT_GE(r, -kPi);
        ASSERT_LT(r, kPi);
        EXPECT_NEAR(std::sin(r), std::sin(v), 1e-9);
        EXPECT_NEAR(std::cos(r), std::cos(v), 1e-9);
        EXPECT_EQ(normalize_angle(r), r);
    }
}

TEST(ComposeDelta, Examples)
{
    const PoseDelta z = compose_delta(Pose(1, 2, 0.3), Pose(1, 2, 0.3));
    EXPECT_EQ(z.dx, 0.0);
    EXPECT_EQ(z.dy, 0.0);
    EXPECT_EQ(z.dtheta, 0.0);

    const PoseDelta a = compose_delta(Pose(0, 0, 0), Pose(1, 0, 0));
    EXPECT_DOUBLE_EQ(a.dx, 1.0);
    EXPECT_DOUBLE_EQ(a.forward, 1.0);
    EXPECT_NEAR(a.lateral, 0.0, 1e-12);

    const PoseDelta b = compose_delta(Pose(0, 0, kPi / 2), Pose(0, 1, kPi / 2));
    EXPECT_NEAR(b.dx, 0.0, 1e-12);
    EXPECT_NEAR(b.dy, 1.0, 1e-12);
    EXPECT_NEAR(b.dtheta, 0.0, 1e-12);
    EXPECT_NEAR(b.forward, 1.0, 1e-12);
    EXPECT_NEAR(b.lateral, 0.0, 1e-12);
}

TEST(ComposeDelta, ApplyInverts)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 1000; ++i) {
        const Pose a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
        const PoseDelta d = compose_delta(a, b);
        const Pose c = apply_delta(a, d.forward, d.lateral, d.dtheta);
        EXPECT_NEAR(c.x, b.x, 1e-9);
        EXPECT_NEAR(c.y, b.y, 1e-9);
        EXPECT_NEAR(std::abs(normalize_angle(c.theta - b.theta)), 0.0, 1e-9);
    }
}

TEST(CircularMean, WrapBoundary)
{
    const std::vector<double> a{kPi - 0.1, -kPi + 0.1};
    const double m = circular_mean(a, [](double v) { return v; }, [](double) { return 1.0; });
    EXPECT_NEAR(std::abs(normalize_angle(m - kPi)), 0.0, 1e-9);
}

TEST(NetworkGeometry, Validation)
{
    EXPECT_THROW(NetworkGeometry(0.0, kTwoPi / 36, 100, 36), std::invalid_argument);
    EXPECT_THROW(NetworkGeometry(0.1, 0.1, 100, 36), std::invalid_argument);
    EXPECT_THROW(NetworkGeometry::with_headings(0.1, 1, 36), std::invalid_argument);
}
