#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mecsim/model.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/subsolvers.hpp"

using namespace mecsim;

namespace {

bool close(double a, double b, double rel = 1e-9) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

Scenario toy(int num_sbs, const std::vector<int>& assoc, double gain_own, double gain_cross,
             const std::vector<double>& volume, const std::vector<int>& types) {
    Scenario sc;
    const int U = static_cast<int>(assoc.size());
    sc.geom.num_sbs = num_sbs;
    sc.geom.num_users = U;
    for (int k = 0; k < num_sbs; ++k) sc.sbs_pos.push_back({50.0 + 100.0 * k, 50.0});
    for (int u = 0; u < U; ++u) sc.user_pos.push_back({25.0 + 10.0 * u, 60.0});
    sc.assoc = assoc;
    sc.dist = Eigen::MatrixXd::Constant(U, num_sbs, 40.0);
    sc.gain = Eigen::MatrixXd::Constant(U, num_sbs, gain_cross);
    for (int u = 0; u < U; ++u) sc.gain(u, assoc[u]) = gain_own;
    sc.task_type = types;
    sc.volume = volume;
    sc.cell_users.assign(num_sbs, {});
    for (int u = 0; u < U; ++u) sc.cell_users[assoc[u]].push_back(u);
    return sc;
}

}  // namespace

// --- surrogate bounds -------------------------------------------------------

TEST_CASE("bilinear minorant stays below the product and is tight at the anchor") {
    CHECK(close(bilinear_minorant(0.3, 5.0, 0.5, 4.0), 1.34));
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double r = rng.uniform(0.0, 10.0);
        const double l = rng.uniform(0.0, 10.0);
        const double r0 = rng.uniform(0.0, 10.0);
        const double l0 = rng.uniform(0.0, 10.0);
        CHECK(bilinear_minorant(r, l, r0, l0) <= r * l + 1e-9);
        CHECK(close(bilinear_minorant(r0, l0, r0, l0), r0 * l0, 1e-12));
    }
}

TEST_CASE("log tangent sits above the log and is tight at the anchor") {
    CHECK(log_upper_tangent(2.0, 1.0) == doctest::Approx(1.0));
    Rng rng(8);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.uniform(0.01, 100.0);
        const double a = rng.uniform(0.01, 100.0);
        CHECK(log_upper_tangent(v, a) >= std::log(v) - 1e-12);
        CHECK(close(log_upper_tangent(a, a), std::log(a), 1e-12));
    }
}

TEST_CASE("interference-tangent rate bound stays below the true rate") {
    CHECK(rate_lower_bound(255.0, 0.0, 0.0) == doctest::Approx(8.0));
    const double tight = std::log2(104.0) - std::log2(4.0);
    CHECK(close(rate_lower_bound(100.0, 3.0, 3.0), tight, 1e-12));
    Rng rng(9);
    for (int i = 0; i < 2000; ++i) {
        const double snr = rng.uniform(0.1, 1000.0);
        const double intf = rng.uniform(0.0, 50.0);
        const double anchor = rng.uniform(0.0, 50.0);
        const double truth = std::log2(snr + 1.0 + intf) - std::log2(1.0 + intf);
        CHECK(rate_lower_bound(snr, intf, anchor) <= truth + 1e-9);
        CHECK(close(rate_lower_bound(snr, intf, intf), truth, 1e-10));
    }
}

// --- share optimization -----------------------------------------------------

namespace {

SystemParams share_params() {
    SystemParams p;
    p.num_subcarriers = 2;
    p.task_types = {{0.060, 85.0, 1}};
    return p;
}

// SNR 255 -> 8 bit/s/Hz ceiling, SNR 15 -> 4.
const double kGainStrong = 255.0 * 1e-13 / 0.1;
const double kGainWeak = 15.0 * 1e-13 / 0.1;

AllocationState offload_state(const Scenario& sc, const SystemParams& p, double eps) {
    AllocationState st = all_local_state(sc, p);
    st.offload.setOnes();
    st.compression.setConstant(eps);
    st.capacity.setConstant(1e11);
    return st;
}

}  // namespace

TEST_CASE("share split between two interference-free users matches the analytic optimum") {
    SystemParams p = share_params();
    Scenario sc = toy(1, {0, 0}, kGainStrong, 0.0, {120.0, 120.0}, {0, 0});
    sc.gain(1, 0) = kGainWeak;
    AllocationState st = offload_state(sc, p, 1.25);
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;

    SubcarrierConfig cfg;
    SubcarrierResult res = optimize_subcarriers(sc, p, st, cfg);

    // each user ends up with one subcarrier's worth of share in total
    CHECK(res.converged);
    CHECK(res.included == std::vector<int>{0, 1});
    CHECK(res.dropped.empty());
    CHECK_FALSE(res.floors_relaxed);
    CHECK(res.objective == doctest::Approx(std::log(32.0)).epsilon(1e-3));
    for (int n = 0; n < 2; ++n) {
        CHECK(res.assign.col(n).sum() <= 1.0 + 1e-6);
        for (int u = 0; u < 2; ++u) {
            CHECK(res.assign(u, n) >= -1e-9);
            CHECK(res.assign(u, n) <= 1.0 + 1e-9);
        }
    }
    CHECK(res.assign.row(0).sum() == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(res.assign.row(1).sum() == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(res.trace.size() == static_cast<size_t>(res.rounds));
    for (size_t i = 1; i < res.trace.size(); ++i)
        CHECK(res.trace[i] >= res.trace[i - 1] - 1e-4);
}

TEST_CASE("a binding rate floor shifts shares toward the constrained user") {
    SystemParams p = share_params();
    p.task_types = {{0.060, 85.0, 1}, {0.0032, 85.0, 1}};
    Scenario sc = toy(1, {0, 0}, kGainStrong, 0.0, {120.0, 120.0}, {0, 1});
    sc.gain(1, 0) = kGainWeak;
    AllocationState st = offload_state(sc, p, 1.25);
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;

    // floor for user 1 in efficiency units, same arithmetic as the solver
    const double b_bits = 120.0 / 1.25 * p.bits_per_unit;
    const double t_comp = p.cycles_per_unit * (120.0 / 1.25) / 1e11;
    const double slack = 0.0032 - t_comp;
    const double floor = b_bits * 2.0 / (p.bandwidth * slack);
    REQUIRE(floor > 4.0);   // otherwise the floor would not bind
    REQUIRE(floor < 8.0);   // otherwise user 1 could never comply

    SubcarrierConfig cfg;
    SubcarrierResult res = optimize_subcarriers(sc, p, st, cfg);
    // expected: user 1 takes floor/4 of the two-subcarrier budget, user 0 the rest
    const double t1 = floor / 4.0;
    const double expected = std::log(8.0 * (2.0 - t1)) + std::log(floor);
    CHECK(res.converged);
    CHECK_FALSE(res.floors_relaxed);
    CHECK(res.objective == doctest::Approx(expected).epsilon(5e-3));
    CHECK(res.assign.row(1).sum() >= t1 - 5e-3);
}

TEST_CASE("users that cannot transmit usefully are dropped") {
    SystemParams p = share_params();
    p.task_types = {{0.060, 85.0, 1}, {1e-4, 85.0, 1}};
    Scenario sc = toy(1, {0, 0}, kGainStrong, 0.0, {120.0, 120.0}, {0, 1});
    AllocationState st = offload_state(sc, p, 1.25);
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;
    st.capacity(0) = 0.0;  // no server share yet -> delay cannot be bounded

    SubcarrierConfig cfg;
    SubcarrierResult res = optimize_subcarriers(sc, p, st, cfg);
    CHECK(res.dropped == std::vector<int>{0, 1});
    CHECK(res.included.empty());
    CHECK(res.assign.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.converged);
}

TEST_CASE("local users do not transmit") {
    SystemParams p = share_params();
    Scenario sc = toy(1, {0, 0}, kGainStrong, 0.0, {120.0, 120.0}, {0, 0});
    AllocationState st = offload_state(sc, p, 1.0);
    st.offload(1) = 0.0;
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;  // stale share from a previous iterate

    SubcarrierConfig cfg;
    SubcarrierResult res = optimize_subcarriers(sc, p, st, cfg);
    CHECK(res.included == std::vector<int>{0});
    CHECK(res.assign.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.assign.row(0).sum() > 1.5);  // the lone transmitter grabs both subcarriers
}

TEST_CASE("interference-coupled cells reach the grid optimum") {
    SystemParams p = share_params();
    p.num_subcarriers = 1;
    Scenario sc = toy(2, {0, 1}, 1e-10, 1e-11, {120.0, 120.0}, {0, 0});
    AllocationState st = offload_state(sc, p, 1.0);
    st.assign(0, 0) = 1.0;
    st.assign(1, 0) = 1.0;

    SubcarrierConfig cfg;
    SubcarrierResult res = optimize_subcarriers(sc, p, st, cfg);

    auto eff = [](double other) { return std::log2(1.0 + 100.0 / (1.0 + 10.0 * other)); };
    double best = -1e30;
    for (int i = 1; i <= 100; ++i) {
        for (int j = 1; j <= 100; ++j) {
            const double r1 = 0.01 * i;
            const double r2 = 0.01 * j;
            best = std::max(best, std::log(r1 * eff(r2)) + std::log(r2 * eff(r1)));
        }
    }
    CHECK(res.objective >= best - 0.02 * std::abs(best));
    CHECK(res.objective <= best + 0.01);
}

TEST_CASE("share rounding keeps the strongest user and respects the threshold") {
    Scenario sc = toy(2, {0, 0, 1}, 1e-10, 0.0, {120.0, 120.0, 120.0}, {0, 0, 0});
    Eigen::MatrixXd rel(3, 3);
    rel << 0.6, 0.0005, 0.3,
           0.6, 0.0004, 0.29,
           0.7, 0.001, 0.5;
    Eigen::MatrixXd snapped = round_subcarriers(sc, rel);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    expect(0, 0) = 1.0;  // tie against user 1, lower index wins
    expect(0, 2) = 1.0;
    expect(2, 0) = 1.0;
    expect(2, 1) = 1.0;  // exactly at the threshold counts
    expect(2, 2) = 1.0;
    CHECK((snapped - expect).cwiseAbs().maxCoeff() == 0.0);
}

// --- capacity allocation ----------------------------------------------------

namespace {

SystemParams capacity_params() {
    SystemParams p;
    p.num_subcarriers = 2;
    p.task_types = {{0.060, 85.0, 1}};
    return p;
}

Scenario capacity_scenario(const SystemParams&) {
    Scenario sc = toy(1, {0, 0}, kGainStrong, 0.0, {200.0, 200.0}, {0, 0});
    return sc;
}

}  // namespace

TEST_CASE("identical offloaders split the server evenly") {
    SystemParams p = capacity_params();
    Scenario sc = capacity_scenario(p);
    AllocationState st = all_local_state(sc, p);
    st.offload.setOnes();
    st.compression.setOnes();
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;

    CapacityAllocResult res = allocate_capacity(sc, p, st);
    CHECK(res.strained_cells.empty());
    CHECK(res.delay_infeasible.empty());
    CHECK(res.capacity(0) == doctest::Approx(1e11).epsilon(1e-6));
    CHECK(res.capacity(1) == doctest::Approx(1e11).epsilon(1e-6));
    // rate 4e7 -> uplink 5 ms, compute 4e7 cycles / 1e11
    const double expected = 2.0 * std::log(0.005 + 4e7 / 1e11);
    CHECK(res.objective == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("fractional offload scales cost and blends the delay offset") {
    SystemParams p = capacity_params();
    Scenario sc = capacity_scenario(p);
    AllocationState st = all_local_state(sc, p);
    st.offload << 1.0, 0.5;
    st.compression.setOnes();
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;

    CapacityAllocResult res = allocate_capacity(sc, p, st);

    Eigen::VectorXd costs(2), offsets(2), floors(2);
    costs << 4e7, 2e7;
    offsets << 0.005, 0.5 * (p.cycles_per_unit * 200.0 / p.local_capacity) + 0.5 * 0.005;
    floors << costs(0) / (0.060 - offsets(0)), costs(1) / (0.060 - offsets(1));
    CapacityResult direct = bisect_capacity(costs, offsets, floors, p.mec_capacity);
    CHECK(res.capacity(0) == doctest::Approx(direct.f(0)).epsilon(1e-9));
    CHECK(res.capacity(1) == doctest::Approx(direct.f(1)).epsilon(1e-9));
}

TEST_CASE("impossible delay floors strain the cell and fall back to the utility split") {
    SystemParams p = capacity_params();
    p.task_types = {{0.0051, 85.0, 1}};
    Scenario sc = capacity_scenario(p);
    AllocationState st = all_local_state(sc, p);
    st.offload.setOnes();
    st.compression.setOnes();
    st.assign(0, 0) = 1.0;
    st.assign(1, 1) = 1.0;

    CapacityAllocResult res = allocate_capacity(sc, p, st);
    CHECK(res.strained_cells == std::vector<int>{0});
    CHECK(res.capacity(0) == doctest::Approx(1e11).epsilon(1e-6));
    CHECK(res.capacity(1) == doctest::Approx(1e11).epsilon(1e-6));
}

TEST_CASE("an offloader with no rate is flagged and local users get nothing") {
    SystemParams p = capacity_params();
    Scenario sc = toy(1, {0, 0, 0}, kGainStrong, 0.0, {200.0, 200.0, 200.0}, {0, 0, 0});
    AllocationState st = all_local_state(sc, p);
    st.offload << 1.0, 1.0, 0.0;
    st.compression.setOnes();
    st.assign(0, 0) = 1.0;  // user 1 never got a subcarrier

    CapacityAllocResult res = allocate_capacity(sc, p, st);
    CHECK(res.delay_infeasible == std::vector<int>{1});
    CHECK(res.capacity(2) == 0.0);
    CHECK(res.capacity(0) > 0.0);
    CHECK(res.capacity(0) + res.capacity(1) == doctest::Approx(p.mec_capacity).epsilon(1e-9));
}

// --- offload and compression ------------------------------------------------

namespace {

SystemParams offload_params(double delay_limit, double accuracy_limit) {
    SystemParams p;
    p.num_subcarriers = 2;
    p.task_types = {{delay_limit, accuracy_limit, 1}};
    return p;
}

AllocationState rated_state(const Scenario& sc, const SystemParams& p, double f) {
    AllocationState st = all_local_state(sc, p);
    st.offload.setConstant(0.5);
    st.compression.setOnes();
    st.capacity.setConstant(f);
    for (int u = 0; u < sc.num_users(); ++u)
        for (int n = 0; n < p.num_subcarriers; ++n) st.assign(u, n) = 1.0;
    return st;
}

}  // namespace

TEST_CASE("device too slow: compression runs to the accuracy floor") {
    SystemParams p = offload_params(0.040, 90.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {300.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);

    OffloadConfig cfg;
    OffloadResult res = optimize_offload(sc, p, st, cfg);
    CHECK(res.infeasible.empty());
    CHECK(res.pinned_local.empty());
    CHECK(res.offload(0) == 1.0);  // local branch misses the deadline, x is pinned

    // optimum sits on the accuracy floor: alpha = 32 units
    const double keep_min = 32.0 / 300.0;
    CHECK(1.0 / res.compression(0) == doctest::Approx(keep_min).epsilon(2e-3));
    const double unit_off = 300.0 * p.bits_per_unit / 8e7 + p.cycles_per_unit * 300.0 / 1e10;
    const double expected = std::log(unit_off * keep_min) - std::log(90.0);
    CHECK(res.objective == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("golden-section oracle agrees with the pinned-offload solve") {
    SystemParams p = offload_params(0.040, 90.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {300.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);

    OffloadConfig cfg;
    OffloadResult res = optimize_offload(sc, p, st, cfg);

    const double unit_off = 300.0 * p.bits_per_unit / 8e7 + p.cycles_per_unit * 300.0 / 1e10;
    auto objective = [&](double keep) {
        const double y = p.fit_p - p.fit_q * std::pow(300.0 * keep, -p.fit_r);
        return std::log(unit_off * keep) - std::log(y);
    };
    double lo = 32.0 / 300.0, hi = 1.0;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
    for (int it = 0; it < 200; ++it) {
        if (objective(c) < objective(d)) hi = d; else lo = c;
        c = hi - phi * (hi - lo);
        d = lo + phi * (hi - lo);
    }
    const double oracle = objective(0.5 * (lo + hi));
    CHECK(res.objective <= oracle + 1e-4);
    CHECK(res.objective >= oracle - 1e-6);
}

TEST_CASE("no uplink pins the user local") {
    SystemParams p = offload_params(0.040, 90.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {120.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);
    st.assign.setZero();

    OffloadConfig cfg;
    OffloadResult res = optimize_offload(sc, p, st, cfg);
    CHECK(res.pinned_local == std::vector<int>{0});
    CHECK(res.offload(0) == 0.0);
    CHECK(res.compression(0) == 1.0);
}

TEST_CASE("accuracy floor above the raw volume marks the user infeasible") {
    SystemParams p = offload_params(0.040, 95.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {90.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);

    OffloadConfig cfg;
    OffloadResult res = optimize_offload(sc, p, st, cfg);
    CHECK(res.infeasible == std::vector<int>{0});
}

TEST_CASE("delay infeasible on both branches is flagged") {
    SystemParams p = offload_params(0.010, 85.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {400.0}, {0});
    AllocationState st = rated_state(sc, p, 1e8);  // slow server

    OffloadConfig cfg;
    OffloadResult res = optimize_offload(sc, p, st, cfg);
    CHECK(res.infeasible == std::vector<int>{0});
}

TEST_CASE("clear offload advantage drives the relaxed decision toward the edge") {
    SystemParams p = offload_params(0.030, 85.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {150.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);

    OffloadConfig cfg;
    OffloadResult res = optimize_offload(sc, p, st, cfg);
    CHECK(res.infeasible.empty());
    CHECK(res.pinned_local.empty());
    CHECK(res.offload(0) > 0.9);

    // more refinement rounds never worsen the objective
    OffloadConfig one;
    one.max_rounds = 1;
    OffloadResult first = optimize_offload(sc, p, st, one);
    CHECK(res.objective <= first.objective + 1e-6);
}

// --- decision rounding ------------------------------------------------------

TEST_CASE("rounding snaps up, clips compression to the accuracy floor") {
    SystemParams p = offload_params(0.040, 90.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {300.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);
    st.offload(0) = 0.7;
    st.compression(0) = 50.0;

    RoundedOffload r = round_offload(sc, p, st);
    CHECK(r.offload(0) == 1.0);
    CHECK(r.compression(0) == doctest::Approx(300.0 / 32.0).epsilon(1e-12));
    CHECK(r.flipped.empty());
    CHECK(r.infeasible.empty());
}

TEST_CASE("offload choice without a rate flips to a healthy local branch") {
    SystemParams p = offload_params(0.040, 90.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {120.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);
    st.assign.setZero();
    st.offload(0) = 0.9;

    RoundedOffload r = round_offload(sc, p, st);
    CHECK(r.offload(0) == 0.0);
    CHECK(r.flipped == std::vector<int>{0});
    CHECK(r.infeasible.empty());
}

TEST_CASE("rounding flags a user that fits neither branch") {
    SystemParams p = offload_params(0.010, 85.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {400.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);
    st.assign.setZero();
    st.offload(0) = 0.9;

    RoundedOffload r = round_offload(sc, p, st);
    CHECK(r.offload(0) == 1.0);
    CHECK(r.infeasible == std::vector<int>{0});
    CHECK(r.flipped.empty());
}

TEST_CASE("rounding keeps a sound local choice and sanitizes compression") {
    SystemParams p = offload_params(0.040, 90.0);
    Scenario sc = toy(1, {0}, kGainStrong, 0.0, {120.0}, {0});
    AllocationState st = rated_state(sc, p, 1e10);
    st.offload(0) = 0.3;
    st.compression(0) = 0.5;  // out-of-range input from a degenerate iterate

    RoundedOffload r = round_offload(sc, p, st);
    CHECK(r.offload(0) == 0.0);
    CHECK(r.compression(0) == 1.0);
    CHECK(r.flipped.empty());
    CHECK(r.infeasible.empty());
}
