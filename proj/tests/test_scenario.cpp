#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>

#include "doctest.h"
#include "iftw/scenario.hpp"

using namespace iftw;

namespace {

const char* kMinimal = R"(# smallest useful scenario
[topology]
road_width_m = 20
road_length_m = 300
theta_deg = 50

[obstacle]
x_m = 104
y_m = 6
radius_m = 1
)";

const char* kSweep = R"(
[topology]
road_width_m = 20
road_length_m = 120
theta_deg = 50
phi_deg = 30
slot_ticks = 100
control_slot_ticks = 4

[sweep]
x_min_m = 60
x_max_m = 70
x_step_m = 2
y_min_m = 4
y_max_m = 16
y_step_m = 4
radii_m = 0.5,2
)";

}  // namespace

TEST_CASE("minimal scenario fills the documented defaults") {
    const auto sc = parse_scenario(kMinimal);
    CHECK(sc.config.phi_deg == 30.0);
    CHECK(sc.config.slot_ticks == 100);
    CHECK(sc.config.control_slot_ticks == 4);
    CHECK(sc.config.detection_interval_ticks == 32);  // 8 control slots
    REQUIRE(sc.obstacles.size() == 1);
    CHECK(sc.obstacles.front().appear_tick ==
          default_appear_tick(sc.config));
    CHECK(sc.warnings.empty());
}

TEST_CASE("interference violations warn by default and reject when strict") {
    std::string text = kMinimal;
    text.replace(text.find("theta_deg = 50"), 14, "theta_deg = 10");
    const auto lax = parse_scenario(text, false);
    REQUIRE(lax.warnings.size() == 1);
    CHECK(lax.warnings.front().find("interference-free") != std::string::npos);
    CHECK_THROWS_AS(parse_scenario(text, true), ValidationError);
}

TEST_CASE("parse rejects malformed and invalid input") {
    CHECK_THROWS_AS(parse_scenario("garbage"), ParseError);
    CHECK_THROWS_AS(parse_scenario("[nope]\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario("[topology]\nbad_key = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario("[topology]\nroad_width_m = x\n"),
                    ParseError);
    // Negative radius.
    std::string text = kMinimal;
    text.replace(text.find("radius_m = 1"), 12, "radius_m = -1");
    CHECK_THROWS_AS(parse_scenario(text), ValidationError);
    // Obstacle outside the road.
    std::string text2 = kMinimal;
    text2.replace(text2.find("y_m = 6"), 7, "y_m = 25");
    CHECK_THROWS_AS(parse_scenario(text2), ValidationError);
    // No obstacle source at all.
    CHECK_THROWS_AS(
        parse_scenario(
            "[topology]\nroad_width_m = 20\nroad_length_m = 300\n"
            "theta_deg = 50\n"),
        ValidationError);
}

TEST_CASE("emit then parse round-trips") {
    for (const char* text : {kMinimal, kSweep}) {
        const auto sc = parse_scenario(text);
        const std::string emitted = emit_scenario(sc);
        const auto back = parse_scenario(emitted);
        CHECK(emit_scenario(back) == emitted);
    }
}

TEST_CASE("sweep cells enumerate row-major x, then y, then radius") {
    const auto sc = parse_scenario(kSweep);
    const auto cells = enumerate_cells(sc);
    REQUIRE(cells.size() == 6u * 4u * 2u);
    CHECK(cells[0].center.x == 60.0);
    CHECK(cells[0].center.y == 4.0);
    CHECK(cells[0].radius == 0.5);
    CHECK(cells[1].radius == 2.0);
    CHECK(cells[2].center.y == 8.0);
    CHECK(cells[8].center.x == 62.0);
}

TEST_CASE("random cells are deterministic per seed") {
    std::string text = kMinimal;
    text.replace(text.find("[obstacle]"), 10, "[random]");
    text.replace(text.find("x_m = 104"), 9, "count = 12");
    text.replace(text.find("y_m = 6"), 7, "seed = 99");
    text.replace(text.find("radius_m = 1"), 12, "radii_m = 1,2");
    const auto sc = parse_scenario(text);
    const auto a = enumerate_cells(sc);
    const auto b = enumerate_cells(sc);
    REQUIRE(a.size() == 12);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].center.x == b[i].center.x);
        CHECK(a[i].center.y == b[i].center.y);
        CHECK(a[i].radius == b[i].radius);
    }
}

TEST_CASE("sweep reports are identical for one worker and many") {
    const auto sc = parse_scenario(kSweep);
    const auto serial = run_sweep(sc, 1);
    const auto parallel = run_sweep(sc, 4);
    CHECK(serial.table_tsv() == parallel.table_tsv());
    CHECK(serial.summary() == parallel.summary());
    CHECK(serial.blockage_cells > 0);
}

TEST_CASE("sweep aggregates are consistent") {
    const auto sc = parse_scenario(kSweep);
    const auto rep = run_sweep(sc, 1);
    int hist_total = 0, none = 0;
    for (const auto& [name, count] : rep.histogram) {
        hist_total += count;
        if (name == "none") none = count;
    }
    CHECK(hist_total == static_cast<int>(rep.cells.size()));
    CHECK(hist_total - none == rep.blockage_cells);
    CHECK(rep.agreement_rate >= 0.0);
    CHECK(rep.agreement_rate <= 1.0);
}

TEST_CASE("an all-miss sweep reports no blockages") {
    std::string text = kSweep;
    // A corner strip of the road that no link crosses.
    text.replace(text.find("x_min_m = 60"), 12, "x_min_m = 2");
    text.replace(text.find("x_max_m = 70"), 12, "x_max_m = 4");
    text.replace(text.find("y_min_m = 4"), 11, "y_min_m = 14");
    text.replace(text.find("y_max_m = 16"), 12, "y_max_m = 16");
    text.replace(text.find("radii_m = 0.5,2"), 15, "radii_m = 0.2");
    const auto rep = run_sweep(parse_scenario(text), 1);
    CHECK(rep.blockage_cells == 0);
    CHECK(rep.summary().find("no blockages") != std::string::npos);
}

TEST_CASE("file helpers round-trip bytes") {
    const std::string path = "/tmp/iftw_scenario_io_test.txt";
    write_text_file(path, "a\tb\nc\n");
    CHECK(read_text_file(path) == "a\tb\nc\n");
    std::remove(path.c_str());
    CHECK_THROWS(read_text_file("/nonexistent/iftw"));
}
