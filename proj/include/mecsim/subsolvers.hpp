#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mecsim/cvxcore.hpp"
#include "mecsim/model.hpp"
#include "mecsim/scenario.hpp"

namespace mecsim {

// --- surrogate building blocks (exposed for direct verification) ---

// Lower bound on the product rho * l, tight at (rho0, l0):
//   rho*l = ((rho+l)^2 - (rho-l)^2) / 4  >=  c/2*(rho+l) - c^2/4 - (rho-l)^2/4
// with c = rho0 + l0 (tangent of the convex square term).
double bilinear_minorant(double rho, double l, double rho0, double l0);

// Upper bound on ln(value), tight at anchor > 0.
double log_upper_tangent(double value, double anchor);

// Lower bound on the per-subcarrier spectral efficiency
//   r(i) = log2(snr + 1 + i) - log2(1 + i)
// where snr and i are noise-normalized signal and interference powers.
// The subtracted concave term is replaced by its tangent at i0, so the
// bound is tight at i = i0 and valid for all i > -1.
double rate_lower_bound(double snr, double interference, double anchor);

// --- block 1: subcarrier assignment for fixed offload/compression/capacity ---

struct SubcarrierConfig {
    SolverSettings solver;
    double tol = 1e-4;              // stop when the objective moves less than this
    int max_rounds = 10;
    double include_threshold = 1e-6;  // offload fraction below which a user does not transmit
};

struct SubcarrierResult {
    Eigen::MatrixXd assign;        // relaxed shares, users x subcarriers
    double objective = 0.0;        // sum of ln(total spectral efficiency) over included users
    int rounds = 0;
    bool converged = false;
    std::vector<double> trace;     // objective after each convex solve
    std::vector<int> included;     // users that took part in the optimization
    std::vector<int> dropped;      // users whose delay budget leaves no room for transmission
    bool floors_relaxed = false;   // set when the joint rate floors clashed and were lifted
    SolveStatus last_status = SolveStatus::optimal;
};

SubcarrierResult optimize_subcarriers(const Scenario& sc, const SystemParams& par,
                                      const AllocationState& state,
                                      const SubcarrierConfig& cfg);

// Snap relaxed shares to a binary assignment: per (station, subcarrier) the
// largest share wins if it reaches the threshold, ties go to the lowest user
// index, and everything below the threshold leaves the subcarrier unassigned.
Eigen::MatrixXd round_subcarriers(const Scenario& sc, const Eigen::MatrixXd& assign,
                                  double threshold = 1e-3);

// --- block 2: computing-capacity split for fixed offload/compression/shares ---

struct CapacityAllocResult {
    Eigen::VectorXd capacity;          // per user, zero when the user does not offload
    std::vector<int> strained_cells;   // stations whose delay floors exceed the budget
    std::vector<int> delay_infeasible; // users whose delay limit is out of reach at any capacity
    double objective = 0.0;            // sum of ln(delay) over served offloaders
};

CapacityAllocResult allocate_capacity(const Scenario& sc, const SystemParams& par,
                                      const AllocationState& state);

// --- block 3: offload fraction and compression for fixed shares/capacity ---

struct OffloadConfig {
    SolverSettings solver;
    double tol = 1e-4;
    int max_rounds = 10;
};

struct OffloadResult {
    Eigen::VectorXd offload;       // relaxed x in [0,1]
    Eigen::VectorXd compression;   // ratio >= 1 (volume shrink factor)
    std::vector<int> infeasible;   // users no branch can serve within their limits
    std::vector<int> pinned_local; // users forced local (no rate or no capacity)
    double objective = 0.0;        // sum of ln(delay) - ln(accuracy) over served users
    int rounds = 0;                // largest refinement count across users
    bool converged = false;
};

OffloadResult optimize_offload(const Scenario& sc, const SystemParams& par,
                               const AllocationState& state, const OffloadConfig& cfg);

// Snap the relaxed offload/compression decision to a binary one. Offload wins
// at x >= 0.5; the compression ratio is clipped so the accuracy floor stays
// reachable; a user whose chosen branch breaks a limit while the other branch
// holds is flipped (recorded in `flipped`); users infeasible on both branches
// land in `infeasible` and keep the rounded decision.
struct RoundedOffload {
    Eigen::VectorXd offload;
    Eigen::VectorXd compression;
    std::vector<int> flipped;
    std::vector<int> infeasible;
};

RoundedOffload round_offload(const Scenario& sc, const SystemParams& par,
                             const AllocationState& state);

}  // namespace mecsim
