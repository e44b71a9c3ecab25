#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <bioloc/localizer.hpp>

#include "support.hpp"

using namespace bioloc;

namespace {

Landmark transformed(const Landmark& l, double angle, double tx, double ty)
{
    std::vector<Point2> kps;
    const double c = std::cos(angle), s = std::sin(angle);
    for (const auto& p : l.keypoints)
        kps.push_back({c * p.x - s * p.y + tx, s * p.x + c * p.y + ty});
    return Landmark::from_keypoints(kps);
}

Landmark random_landmark(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<Point2> kps;
    for (int i = 0; i < n; ++i)
        kps.push_back({u(rng), u(rng)});
    return Landmark::from_keypoints(kps);
}

LidarScan room_scan(const Pose& p, int cells = 40)
{
    return simulate_scan(testing_support::square_room(cells), p, 360, kTwoPi, 8.0, 0.0, 1u);
}

}  // namespace

TEST(PreprocessScan, Dedup)
{
    LidarScan z;
    z.angle_min = 0.0;
    z.angle_increment = 0.001;
    z.ranges = {1.0, 1.0};
    EXPECT_EQ(preprocess_scan(z, 0.05).size(), 1u);
}

TEST(PreprocessScan, AllMaxRangeIsEmpty)
{
    LidarScan z;
    z.ranges.assign(50, z.max_range);
    EXPECT_TRUE(preprocess_scan(z, 0.05).empty());
    EXPECT_THROW(preprocess_scan(z, 0.0), std::invalid_argument);
}

TEST(PreprocessScan, CountMatchesBruteForce)
{
    const auto z = room_scan(Pose(0.13, -0.27, 0.4));
    const auto pts = preprocess_scan(z, 0.05);
    // pairwise dedup of snapped endpoints
    std::vector<Point2> uniq;
    for (std::size_t i = 0; i < z.ranges.size(); ++i) {
        if (z.ranges[i] >= z.max_range)
            continue;
        const double a = z.angle_min + i * z.angle_increment;
        const Point2 q{std::round(z.ranges[i] * std::cos(a) / 0.05), std::round(z.ranges[i] * std::sin(a) / 0.05)};
        bool seen = false;
        for (const auto& u : uniq)
            seen = seen || (u.x == q.x && u.y == q.y);
        if (!seen)
            uniq.push_back(q);
    }
    EXPECT_EQ(pts.size(), uniq.size());
    for (std::size_t i = 1; i < pts.size(); ++i)
        EXPECT_TRUE(pts[i - 1].x < pts[i].x || (pts[i - 1].x == pts[i].x && pts[i - 1].y < pts[i].y));
}

TEST(ExtractLandmark, SquareRoomCorners)
{
    const double tol = 0.05;
    for (const Pose p : {Pose(0.1, -0.2, 0.3), Pose(-0.6, 0.4, -2.0), Pose(0, 0, 0)}) {
        const auto lm = extract_landmark(preprocess_scan(room_scan(p), 0.05), tol);
        ASSERT_TRUE(lm.has_value());
        ASSERT_EQ(lm->keypoints.size(), 4u);
        // interior faces of the walls are at +-1.9 m
        const double c = std::cos(-p.theta), s = std::sin(-p.theta);
        std::vector<Point2> corners;
        for (double cx : {-1.9, 1.9})
            for (double cy : {-1.9, 1.9})
                corners.push_back({c * (cx - p.x) - s * (cy - p.y), s * (cx - p.x) + c * (cy - p.y)});
        for (const auto& k : corners) {
            double best = 1e9;
            for (const auto& q : lm->keypoints)
                best = std::min(best, distance(k, q));
            // snapping adds up to half a lattice diagonal on top of the fit tolerance
            EXPECT_LE(best, tol + 0.05 * std::sqrt(0.5));
        }
    }
}

TEST(ExtractLandmark, StraightWallHasNoCorners)
{
    std::vector<Point2> pts;
    for (int i = -40; i <= 40; ++i)
        pts.push_back({1.5, i * 0.05});
    EXPECT_FALSE(extract_landmark(pts, 0.05).has_value());
    EXPECT_FALSE(extract_landmark({}, 0.05).has_value());
}

TEST(ExtractLandmark, CircularArenaHasNoCorners)
{
    const auto m = testing_support::circular_arena(3.0);
    const auto z = simulate_scan(m, Pose(0.4, -0.3, 0.2), 360, kTwoPi, 8.0, 0.0, 1u);
    EXPECT_FALSE(extract_landmark(preprocess_scan(z, 0.05), 0.05).has_value());
}

TEST(Landmark, SignatureRigidInvariance)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> a(-kPi, kPi), t(-5, 5);
    std::uniform_int_distribution<int> n(2, 16);
    for (int k = 0; k < 500; ++k) {
        const auto l = random_landmark(rng, n(rng));
        const auto m = transformed(l, a(rng), t(rng), t(rng));
        ASSERT_EQ(l.signature.size(), m.signature.size());
        EXPECT_TRUE(std::is_sorted(m.signature.begin(), m.signature.end()));
        for (std::size_t i = 0; i < l.signature.size(); ++i)
            EXPECT_NEAR(l.signature[i], m.signature[i], 1e-9);
    }
}

TEST(Landmark, ScanSignatureIgnoresRobotHeading)
{
    const auto a = extract_landmark(preprocess_scan(room_scan(Pose(0.2, 0.1, 0.0)), 0.05), 0.05);
    const auto b = extract_landmark(preprocess_scan(room_scan(Pose(0.2, 0.1, kPi / 6)), 0.05), 0.05);
    ASSERT_TRUE(a && b);
    LandmarkStore store;
    Adjacency adj;
    register_landmark(store, adj, *a, {1, 1, 1}, NetworkGeometry::with_headings(0.1, 8, 8));
    const auto m = match_landmark(store, *b);
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(m->id, 0);
    EXPECT_GT(m->score, 0.9);
}

TEST(MatchLandmark, Examples)
{
    std::mt19937_64 rng(2);
    const auto g = NetworkGeometry::with_headings(0.1, 8, 8);
    LandmarkStore store;
    Adjacency adj;
    const auto l0 = random_landmark(rng, 5);
    EXPECT_FALSE(match_landmark(store, l0).has_value());
    register_landmark(store, adj, random_landmark(rng, 4), {0, 0, 0}, g);
    register_landmark(store, adj, l0, {1, 0, 0}, g);
    register_landmark(store, adj, random_landmark(rng, 6), {2, 0, 0}, g);

    auto m = match_landmark(store, l0);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->id, 1);
    EXPECT_EQ(m->score, 1.0);

    m = match_landmark(store, transformed(l0, kPi / 6, 0, 0));
    ASSERT_TRUE(m);
    EXPECT_EQ(m->id, 1);
    EXPECT_NEAR(m->score, 1.0, 1e-9);
}

TEST(MatchLandmark, SelfMatchTotality)
{
    std::mt19937_64 rng(3);
    const auto g = NetworkGeometry::with_headings(0.1, 8, 8);
    LandmarkStore store;
    Adjacency adj;
    std::uniform_int_distribution<int> n(2, 8);
    for (int i = 0; i < 40; ++i)
        register_landmark(store, adj, random_landmark(rng, n(rng)), {i % 8, 0, 0}, g);
    for (const auto& cell : store.cells) {
        const auto m = match_landmark(store, cell.landmark);
        ASSERT_TRUE(m);
        EXPECT_EQ(m->id, cell.id);
        EXPECT_EQ(m->score, 1.0);
    }
}

TEST(SignatureDistance, UnequalLengths)
{
    EXPECT_EQ(signature_distance({1, 2, 3}, {1, 2, 3}), 0.0);
    EXPECT_NEAR(signature_distance({1, 3}, {1, 2, 3}), 0.0, 1e-12);
    EXPECT_NEAR(signature_distance({1, 2}, {2, 3}), 1.0, 1e-12);
    EXPECT_TRUE(std::isinf(signature_distance({}, {1.0})));
}

TEST(RegisterLandmark, IdsAndDedup)
{
    std::mt19937_64 rng(4);
    const auto g = NetworkGeometry::with_headings(0.1, 8, 8);
    LandmarkStore store;
    Adjacency adj;
    const auto a = random_landmark(rng, 4), b = random_landmark(rng, 4);
    EXPECT_EQ(register_landmark(store, adj, a, {3, 4, 5}, g), 0);
    ASSERT_EQ(adj.size(), 1u);
    EXPECT_EQ(adj.links[0].weight, 1.0);
    EXPECT_EQ(adj.links[0].cell, (CellIndex{3, 4, 5}));
    EXPECT_EQ(store.at(0).activity, 0.0);
    EXPECT_EQ(register_landmark(store, adj, b, {1, 1, 1}, g), 1);
    EXPECT_EQ(register_landmark(store, adj, a, {2, 2, 2}, g), 0);
    EXPECT_EQ(store.size(), 2u);
    EXPECT_EQ(adj.size(), 2u);
    EXPECT_THROW(register_landmark(store, adj, random_landmark(rng, 3), {8, 0, 0}, g), std::out_of_range);
}

TEST(Activation, SetAndDecay)
{
    std::mt19937_64 rng(5);
    const auto g = NetworkGeometry::with_headings(0.1, 8, 8);
    LandmarkStore store;
    Adjacency adj;
    register_landmark(store, adj, random_landmark(rng, 3), {0, 0, 0}, g);
    set_activation(store, 0, 1.0);
    EXPECT_EQ(store.at(0).activity, 1.0);
    decay_activations(store);  // end of the detecting iteration
    EXPECT_EQ(store.at(0).activity, 1.0);
    decay_activations(store);
    EXPECT_EQ(store.at(0).activity, 0.5);
    for (int i = 1; i < 20; ++i)
        decay_activations(store);
    EXPECT_LT(store.at(0).activity, 1e-6);
    EXPECT_EQ(store.at(0).activity, 0.0);
    EXPECT_THROW(set_activation(store, 0, 1.5), std::invalid_argument);
    EXPECT_THROW(set_activation(store, 3, 0.5), std::out_of_range);
}

TEST(Inject, Examples)
{
    std::mt19937_64 rng(6);
    const auto g = NetworkGeometry::with_headings(0.1, 8, 8);
    LandmarkStore store;
    Adjacency adj;
    register_landmark(store, adj, random_landmark(rng, 3), {2, 2, 2}, g);
    register_landmark(store, adj, random_landmark(rng, 5), {5, 5, 5}, g);
    PoseCellNetwork net(g);
    net.set_activity({1, 1, 1}, 0.3);
    const auto before = net.active_cells();
    EXPECT_EQ(inject(net, store, adj, 0.1), 0.0);
    EXPECT_EQ(net.active_cells(), before);

    set_activation(store, 0, 1.0);
    EXPECT_DOUBLE_EQ(inject(net, store, adj, 0.1), 0.1);
    EXPECT_DOUBLE_EQ(net.activity({2, 2, 2}), 0.1);

    PoseCellNetwork two(g);
    adj.links[1].cell = {2, 2, 2};
    set_activation(store, 1, 0.5);
    EXPECT_DOUBLE_EQ(inject(two, store, adj, 0.1), 0.15);
    EXPECT_DOUBLE_EQ(two.activity({2, 2, 2}), 0.15);
}

TEST(Inject, MassBookkeeping)
{
    std::mt19937_64 rng(7);
    const auto g = NetworkGeometry::with_headings(0.1, 8, 8);
    std::uniform_int_distribution<int> ix(0, 7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        LandmarkStore store;
        Adjacency adj;
        double expected = 0.0;
        const double s_v = 0.2 * u(rng);
        for (int i = 0; i < 10; ++i) {
            register_landmark(store, adj, random_landmark(rng, 3 + i % 4), {ix(rng), ix(rng), ix(rng)}, g);
            adj.links.back().weight = u(rng);
            if (u(rng) < 0.5) {
                set_activation(store, static_cast<int>(i), u(rng));
                expected += s_v * adj.links.back().weight * store.at(i).activity;
            }
        }
        PoseCellNetwork net(g);
        net.set_activity({0, 0, 0}, 0.5);
        const double before = net.total_activity();
        const double mass = inject(net, store, adj, s_v);
        EXPECT_NEAR(mass, expected, 1e-12);
        // pruning of sub-epsilon additions is the only source of slack
        EXPECT_NEAR(net.total_activity() - before, mass, 10 * net.prune_epsilon());
        for (const auto& [c, v] : net.active_cells())
            EXPECT_GT(v, 0.0);
    }
}

TEST(LandmarkStoreFile, RoundTrip)
{
    std::mt19937_64 rng(9);
    const auto g = NetworkGeometry::with_headings(0.1, 100, 36);
    LandmarkStore store;
    Adjacency adj;
    for (int i = 0; i < 25; ++i)
        register_landmark(store, adj, random_landmark(rng, 2 + i % 10), {i, 2 * i, i % 36}, g);
    adj.links[3].weight = 0.123456789012345;
    std::ostringstream a;
    save_landmarks(a, store, adj);
    std::istringstream in(a.str());
    const auto [s2, a2] = load_landmarks(in);
    ASSERT_EQ(s2.size(), store.size());
    for (std::size_t i = 0; i < store.size(); ++i)
        EXPECT_EQ(s2.cells[i].landmark, store.cells[i].landmark);
    EXPECT_EQ(a2.links, adj.links);
    std::ostringstream b;
    save_landmarks(b, s2, a2);
    EXPECT_EQ(a.str(), b.str());
}

TEST(LandmarkStoreFile, Errors)
{
    std::istringstream bad_ids("1; 2; 0 0 1 1; 1 1 1; 1\n");
    EXPECT_THROW(load_landmarks(bad_ids), ParseError);
    std::istringstream bad_kp("0; 3; 0 0 1 1; 1 1 1; 1\n");
    EXPECT_THROW(load_landmarks(bad_kp), ParseError);
    std::istringstream neg("0; 2; 0 0 1 1; 1 1 1; -1\n");
    EXPECT_THROW(load_landmarks(neg), ParseError);
    std::istringstream fields("0; 2; 0 0 1 1; 1 1 1\n");
    EXPECT_THROW(load_landmarks(fields), ParseError);
}
