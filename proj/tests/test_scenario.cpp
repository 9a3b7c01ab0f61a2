#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mecsim/scenario.hpp"

using namespace mecsim;

namespace {
bool close(double a, double b, double rel = 1e-9) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace

TEST_CASE("line of sight probability") {
    CHECK(los_probability(10.0) == 1.0);
    CHECK(los_probability(18.0) == doctest::Approx(1.0).epsilon(1e-12));
    // 0.5*(1 - e^-1) + e^-1, evaluated independently
    CHECK(close(los_probability(36.0), 0.6839397205857212));
    CHECK_THROWS_AS(los_probability(0.0), std::domain_error);
    CHECK_THROWS_AS(los_probability(-5.0), std::domain_error);
    // bounded and eventually decreasing
    double prev = 1.0;
    for (double d = 18.0; d <= 1e4; d *= 1.17) {
        double p = los_probability(d);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(p <= prev + 1e-12);
        prev = p;
    }
}

TEST_CASE("path loss closed forms") {
    CHECK(close(path_loss_db(50.0, 3.5, true), 76.25870098239793));
    CHECK(close(path_loss_db(50.0, 3.5, false), 99.19796831223906));
    CHECK(path_loss_db(1.0, 1.0, true) == doctest::Approx(28.0).epsilon(1e-12));
    CHECK_THROWS_AS(path_loss_db(0.0, 3.5, true), std::domain_error);
    CHECK_THROWS_AS(path_loss_db(10.0, 0.0, false), std::domain_error);
}

TEST_CASE("path loss monotone in distance and carrier") {
    for (bool los : {true, false}) {
        double prev = -1e9;
        for (double d = 5.0; d < 500.0; d += 7.3) {
            double v = path_loss_db(d, 3.5, los);
            CHECK(v > prev);
            prev = v;
        }
        CHECK(path_loss_db(80.0, 5.0, los) > path_loss_db(80.0, 3.5, los));
    }
    // NLoS sits above LoS across the deployment range
    for (double d = 3.0; d < 400.0; d += 3.7)
        CHECK(path_loss_db(d, 3.5, false) > path_loss_db(d, 3.5, true));
}

TEST_CASE("expected channel gain") {
    // pure line of sight below 18 m
    for (double d : {5.0, 12.0, 17.9}) {
        double g = expected_channel_gain(d, 3.5);
        CHECK(close(g, std::pow(10.0, -path_loss_db(d, 3.5, true) / 10.0)));
    }
    // mixture value frozen from a scalar side computation
    CHECK(close(expected_channel_gain(50.0, 3.5), 2.4900396841913834e-10));
    CHECK(expected_channel_gain(60.0, 3.5) < expected_channel_gain(30.0, 3.5));
    CHECK_THROWS_AS(expected_channel_gain(-1.0, 3.5), std::domain_error);
}

TEST_CASE("station grid for the default deployment") {
    GeometryConfig geom;
    SystemParams params;
    Scenario sc = place_network(geom, params, 7);
    REQUIRE(sc.num_sbs() == 4);
    CHECK(sc.sbs_pos[0].x == doctest::Approx(50.0));
    CHECK(sc.sbs_pos[0].y == doctest::Approx(50.0));
    CHECK(sc.sbs_pos[1].x == doctest::Approx(150.0));
    CHECK(sc.sbs_pos[1].y == doctest::Approx(50.0));
    CHECK(sc.sbs_pos[2].x == doctest::Approx(75.0));
    CHECK(sc.sbs_pos[2].y == doctest::Approx(150.0));
    CHECK(sc.sbs_pos[3].x == doctest::Approx(175.0));
    CHECK(sc.sbs_pos[3].y == doctest::Approx(150.0));
}

TEST_CASE("placement respects the square, the exclusion radius and nearest association") {
    GeometryConfig geom;
    SystemParams params;
    Scenario sc = place_network(geom, params, 123);
    REQUIRE(sc.num_users() == 30);
    int total = 0;
    for (const auto& users : sc.cell_users) total += static_cast<int>(users.size());
    CHECK(total == 30);
    for (int u = 0; u < sc.num_users(); ++u) {
        CHECK(sc.user_pos[u].x >= 0.0);
        CHECK(sc.user_pos[u].x <= geom.area_side);
        CHECK(sc.user_pos[u].y >= 0.0);
        CHECK(sc.user_pos[u].y <= geom.area_side);
        for (int k = 0; k < sc.num_sbs(); ++k) {
            CHECK(sc.dist(u, k) >= geom.min_user_sbs_distance - 1e-12);
            CHECK(sc.dist(u, sc.assoc[u]) <= sc.dist(u, k) + 1e-12);
        }
    }
}

TEST_CASE("impossible exclusion radius fails loudly") {
    GeometryConfig geom;
    geom.area_side = 50.0;
    geom.num_sbs = 4;
    geom.min_user_sbs_distance = 100.0;
    SystemParams params;
    CHECK_THROWS_AS(place_network(geom, params, 1), std::runtime_error);
}

TEST_CASE("task assignment basics") {
    GeometryConfig geom;
    geom.num_users = 3000;
    SystemParams params;
    Scenario sc = make_scenario(geom, params, 5);
    int counts[3] = {0, 0, 0};
    for (int u = 0; u < sc.num_users(); ++u) {
        REQUIRE(sc.task_type[u] >= 0);
        REQUIRE(sc.task_type[u] < 3);
        ++counts[sc.task_type[u]];
        CHECK(sc.volume[u] >= params.task_volume_lo);
        CHECK(sc.volume[u] <= params.task_volume_hi);
    }
    for (int m = 0; m < 3; ++m)
        CHECK(std::abs(counts[m] / 3000.0 - 1.0 / 3.0) < 0.05);
}

TEST_CASE("determinism and serialization round trip") {
    GeometryConfig geom;
    SystemParams params;
    Scenario a = make_scenario(geom, params, 42);
    Scenario b = make_scenario(geom, params, 42);
    CHECK(serialize_scenario(a) == serialize_scenario(b));
    Scenario c = make_scenario(geom, params, 43);
    CHECK(serialize_scenario(a) != serialize_scenario(c));

    Scenario back = parse_scenario(serialize_scenario(a));
    CHECK(serialize_scenario(back) == serialize_scenario(a));
    CHECK(back.assoc == a.assoc);
    CHECK(back.task_type == a.task_type);
    CHECK(back.gain.isApprox(a.gain, 0.0));
}

TEST_CASE("serialization rejects other formats and versions") {
    GeometryConfig geom;
    SystemParams params;
    std::string text = serialize_scenario(make_scenario(geom, params, 9));
    CHECK_THROWS(parse_scenario("format=other\nversion=1\n"));
    std::string bumped = text;
    auto pos = bumped.find("version=1");
    REQUIRE(pos != std::string::npos);
    bumped.replace(pos, 9, "version=9");
    CHECK_THROWS(parse_scenario(bumped));
}
