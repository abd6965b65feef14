#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "iftw/geometry.hpp"

using namespace iftw;

namespace {

constexpr double kPi = 3.14159265358979323846;

TopologyConfig cfg(double dw, double theta, double dl, double phi = 30.0) {
    TopologyConfig c;
    c.road_width_m = dw;
    c.road_length_m = dl;
    c.theta_deg = theta;
    c.phi_deg = phi;
    return c;
}

// Independent oracle: sample the segment densely and test each point against
// the disk, instead of the closed-form projection used by the library.
bool blocked_by_sampling(const Topology& t, const Link& l, const Obstacle& o) {
    const auto [a, b] = t.segment(l);
    const int steps = 20000;
    for (int i = 0; i <= steps; ++i) {
        const double u = static_cast<double>(i) / steps;
        const double x = a.x + u * (b.x - a.x);
        const double y = a.y + u * (b.y - a.y);
        if (std::hypot(x - o.center.x, y - o.center.y) <= o.radius + 1e-9)
            return true;
    }
    return false;
}

}  // namespace

TEST_CASE("topology node count and spacing follow the layout formulas") {
    // d0 = 20/tan(45deg) = 20, N = floor(200/20) + 1 = 11
    const Topology t = build_topology(cfg(20, 45, 200));
    CHECK(t.spacing() == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(t.node_count() == 11);

    // Exactly one spacing of road: two base stations, no relays.
    const Topology t2 = build_topology(cfg(20, 45, 20));
    CHECK(t2.node_count() == 2);

    // tan(26.565 deg) ~= 0.5, d0 = 10/0.5 = 20, N = floor(100/20)+1 = 6
    const Topology t3 = build_topology(cfg(10, 26.565, 100));
    CHECK(t3.spacing() == doctest::Approx(20.0).epsilon(1e-4));
    CHECK(t3.node_count() == 6);
}

TEST_CASE("node placement alternates sides at fixed spacing") {
    const Topology t = build_topology(cfg(20, 50, 300));
    CHECK(t.node(0).pos.x == 0.0);
    CHECK(t.node(0).pos.y == 0.0);
    CHECK_FALSE(t.node(0).north);
    for (int k = 0; k < t.node_count(); ++k) {
        CHECK(t.node(k).north == (k % 2 == 1));
        CHECK(t.node(k).pos.y == ((k % 2) ? 20.0 : 0.0));
        CHECK(t.node(k).pos.x ==
              doctest::Approx(k * t.spacing()).epsilon(1e-12));
    }
    // Consecutive link length is d_w / sin(theta).
    const double want = 20.0 / std::sin(50.0 * kPi / 180.0);
    for (const Link& l : t.original_links()) {
        const auto [a, b] = t.segment(l);
        CHECK(std::hypot(b.x - a.x, b.y - a.y) ==
              doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("degenerate configs are rejected") {
    CHECK_THROWS_AS(build_topology(cfg(20, 0, 100)), InvalidGeometry);
    CHECK_THROWS_AS(build_topology(cfg(20, 90, 100)), InvalidGeometry);
    CHECK_THROWS_AS(build_topology(cfg(20, 45, 10)), InvalidGeometry);  // N < 2
    CHECK_THROWS_AS(build_topology(cfg(-1, 45, 100)), InvalidGeometry);
}

TEST_CASE("link kinds by separation") {
    const Topology t = build_topology(cfg(20, 45, 200));
    CHECK(Link{3, 4}.kind() == LinkKind::Original);
    CHECK(Link{3, 5}.kind() == LinkKind::SkipOne);
    CHECK(Link{3, 6}.kind() == LinkKind::SkipTwo);
    CHECK(t.has_link(0, 1));
    CHECK(t.has_link(0, 3));
    CHECK_FALSE(t.has_link(0, 4));
    CHECK(t.original_links().size() == 10);
    CHECK(t.alternative_links().size() == 9 + 8);
}

TEST_CASE("interference margin matches the closed forms") {
    // arctan(tan 60 / 3) = arctan(1/sqrt(3)) = 30 exactly.
    const auto m1 = interference_free_margin(60, 30);
    CHECK(m1.margin_deg == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(m1.satisfied);

    // Boundary case: strictly greater is required.
    const auto m2 = interference_free_margin(60, 60);
    CHECK(m2.margin_deg == doctest::Approx(30.0).epsilon(1e-12));
    CHECK_FALSE(m2.satisfied);

    // 45 - arctan(1/3) = 26.56505117707799 (numeric evaluation).
    const auto m3 = interference_free_margin(45, 50);
    CHECK(m3.margin_deg == doctest::Approx(26.56505117707799).epsilon(1e-10));
    CHECK(m3.satisfied);
}

TEST_CASE("margin rises with theta up to its peak at 60 degrees") {
    // d(margin)/d(theta) = (2 - 2 tan^2(theta)/3) / (3 + tan^2(theta)/3),
    // zero exactly at tan^2(theta) = 3, i.e. theta = 60.
    double prev = -1e9;
    for (double th = 1.0; th <= 60.0; th += 0.5) {
        const double m = interference_free_margin(th, 10).margin_deg;
        CHECK(m > prev);
        prev = m;
    }
    for (double th = 60.5; th < 90.0; th += 0.5) {
        const double m = interference_free_margin(th, 10).margin_deg;
        CHECK(m < prev);
        prev = m;
    }
}

TEST_CASE("blocked_links agrees with a sampling oracle") {
    const Topology t = build_topology(cfg(20, 50, 300));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(0, 300), uy(0, 20), ur(0, 4);
    for (int trial = 0; trial < 40; ++trial) {
        const Obstacle o{{ux(rng), uy(rng)}, ur(rng), 0};
        const auto got = blocked_links(t, o);
        const std::set<Link> got_set(got.begin(), got.end());
        for (const Link& l : t.all_links()) {
            // Points within 1e-6 of the radius boundary may legitimately
            // differ between the two methods; skip the knife edge.
            const auto [a, b] = t.segment(l);
            const double d = point_segment_distance(o.center, a, b);
            if (std::abs(d - o.radius) < 1e-6) continue;
            CHECK(got_set.count(l) == (blocked_by_sampling(t, l, o) ? 1u : 0u));
        }
    }
}

TEST_CASE("blocked link basics") {
    const Topology t = build_topology(cfg(20, 50, 300));
    // Midpoint of e(0,1): only that link is nearby at the road start.
    const auto [a, b] = t.segment({0, 1});
    const Obstacle tiny{{(a.x + b.x) / 2, (a.y + b.y) / 2}, 0.1, 0};
    const auto got = blocked_links(t, tiny);
    REQUIRE(got.size() == 1);
    CHECK(got.front() == Link{0, 1});

    // Radius zero off every segment blocks nothing.
    const Obstacle off{{1.0, 19.0}, 0.0, 0};
    CHECK(blocked_links(t, off).empty());

    // A disk swallowing node 5 takes out every link incident to it.
    const Obstacle on5{t.position(5), 0.5, 0};
    const auto got5 = blocked_links(t, on5);
    std::set<Link> want;
    for (int i : {2, 3, 4})
        want.insert(Link{i, 5});
    for (int j : {6, 7, 8})
        want.insert(Link{5, j});
    CHECK(std::set<Link>(got5.begin(), got5.end()) == want);
}

TEST_CASE("blocked_links is monotone in the radius") {
    const Topology t = build_topology(cfg(20, 50, 300));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(0, 300), uy(0, 20), ur(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec2 c{ux(rng), uy(rng)};
        double r1 = ur(rng), r2 = ur(rng);
        if (r1 > r2) std::swap(r1, r2);
        const auto small = blocked_links(t, {c, r1, 0});
        const auto big = blocked_links(t, {c, r2, 0});
        const std::set<Link> big_set(big.begin(), big.end());
        for (const Link& l : small) CHECK(big_set.count(l) == 1);
    }
}

TEST_CASE("oracle classifies the four canonical patterns") {
    const Topology t = build_topology(cfg(20, 50, 300));
    const int k = 6;

    // Only the original link: type I at N_k.
    {
        const auto v = classify_oracle(t, {{k, k + 1}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::I);
        CHECK(v.entries[0].affected_node == k);
        CHECK(v.residual.empty());
    }
    // Original plus the adjacent diagonal out of N_k: type II at N_k.
    {
        const auto v = classify_oracle(t, {{k, k + 1}, {k, k + 3}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::II);
        CHECK(v.entries[0].affected_node == k);
    }
    // Original plus the adjacent diagonal into N_{k+1}: type II at N_{k+1}.
    {
        const auto v = classify_oracle(t, {{k, k + 1}, {k - 2, k + 1}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::II);
        CHECK(v.entries[0].affected_node == k + 1);
    }
    // Original plus the crossing diagonal: type III.
    {
        const auto v = classify_oracle(t, {{k, k + 1}, {k - 1, k + 2}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::III);
        CHECK(v.entries[0].affected_node == k);
    }
    // Every TX link of N_k: type IV at N_k.
    {
        const auto v =
            classify_oracle(t, {{k, k + 1}, {k, k + 2}, {k, k + 3}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::IV);
        CHECK(v.entries[0].affected_node == k);
    }
    // Every RX link of N_{k+1}: type IV at N_{k+1}.
    {
        const auto v =
            classify_oracle(t, {{k, k + 1}, {k - 2, k + 1}, {k - 1, k + 1}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::IV);
        CHECK(v.entries[0].affected_node == k + 1);
    }
}

TEST_CASE("oracle reports II and III together when both diagonals fail") {
    const Topology t = build_topology(cfg(20, 50, 300));
    const int k = 6;
    const auto v =
        classify_oracle(t, {{k, k + 1}, {k, k + 3}, {k - 1, k + 2}});
    REQUIRE(v.entries.size() == 2);
    auto typed = v.typed_set();
    CHECK(typed[0] == std::pair{BlockageType::II, k});
    CHECK(typed[1] == std::pair{BlockageType::III, k});
}

TEST_CASE("oracle decomposition covers every blocked link exactly once") {
    const Topology t = build_topology(cfg(20, 50, 300));
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ux(0, 300), uy(0, 20), ur(0.2, 5);
    for (int trial = 0; trial < 200; ++trial) {
        const Obstacle o{{ux(rng), uy(rng)}, ur(rng), 0};
        const auto blocked = blocked_links(t, o);
        const auto v = classify_oracle(t, blocked);
        std::multiset<Link> seen;
        for (const auto& e : v.entries)
            for (const Link& l : e.evidence) seen.insert(l);
        for (const Link& l : v.residual) seen.insert(l);
        const std::multiset<Link> want(blocked.begin(), blocked.end());
        CHECK(seen == want);
        // Every blocked original appears in exactly one entry.
        for (const Link& l : blocked)
            if (l.kind() == LinkKind::Original)
                CHECK(std::count_if(v.entries.begin(), v.entries.end(),
                                    [&](const VerdictEntry& e) {
                                        return std::count(e.evidence.begin(),
                                                          e.evidence.end(),
                                                          l) > 0;
                                    }) == 1);
    }
}

TEST_CASE("single blocked original with clear alternates is always type I") {
    const Topology t = build_topology(cfg(20, 50, 300));
    for (int k = 0; k + 1 < t.node_count(); ++k) {
        const auto v = classify_oracle(t, {{k, k + 1}});
        REQUIRE(v.entries.size() == 1);
        CHECK(v.entries[0].type == BlockageType::I);
        CHECK(v.entries[0].affected_node == k);
    }
}

TEST_CASE("alternates with no blocked original are residual") {
    const Topology t = build_topology(cfg(20, 50, 300));
    const auto v = classify_oracle(t, {{4, 6}, {7, 10}});
    CHECK(v.entries.empty());
    CHECK(v.residual.size() == 2);
}
