#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mecsim/model.hpp"
#include "mecsim/subsolvers.hpp"

namespace mecsim {

// Outer-loop controls for the alternating optimizer. The loop relaxes the
// binary variables, cycles the three blocks (subcarrier shares, capacity
// split, offload/compression), and stops when the relaxed objective moves
// less than `tol` between iterations.
struct OuterConfig {
    double tol = 1e-4;          // |delta objective| stopping threshold
    int max_outer = 10;
    double tol_shares = 1e-4;   // inner stopping threshold, share block
    double tol_offload = 1e-4;  // inner stopping threshold, offload block
    SolverSettings solver;      // barrier settings shared by the convex blocks

    void validate() const {
        if (tol <= 0 || tol_shares <= 0 || tol_offload <= 0)
            throw std::invalid_argument("outer config: tolerances must be positive");
        if (max_outer < 1) throw std::invalid_argument("outer config: max_outer must be >= 1");
    }
};

// Objective and total constraint severity of a state under the true model.
// Comparisons are lexicographic: less violation wins, then more objective.
struct StateScore {
    double objective = 0.0;
    double violation = 0.0;
};

struct OuterIterate {
    double objective = 0.0;  // relaxed objective after the three blocks
    double violation = 0.0;
    double rounded_objective = std::numeric_limits<double>::quiet_NaN();  // this iterate's rounded probe
    bool share_accepted = false;  // pick-better verdict per block
    bool capacity_accepted = false;
    bool offload_accepted = false;
    int share_rounds = 0;
    SolveStatus share_status = SolveStatus::optimal;
    int offload_rounds = 0;
    int strained_cells = 0;    // capacity block had to lift delay floors here
    int flagged_users = 0;     // users no capacity can serve at this iterate
    double wall_ms = 0.0;
};

struct SolveTrace {
    double initial_objective = 0.0;     // relaxed objective of the starting point
    std::vector<OuterIterate> iterations;
    bool converged = false;             // objective settled before max_outer
    double relaxed_objective = 0.0;     // last relaxed objective
    double rounded_objective = 0.0;     // objective of the returned binary state
    int repair_rounds = 0;
    std::vector<int> flipped_local;     // users moved to local by rounding or repair
};

struct RunResult {
    AllocationState state;   // binary, feasibility-repaired
    SolveTrace trace;
    UtilityReport report;    // scored on `state`
    std::vector<int> infeasible_users;  // neither local nor offload fits; flagged, kept local
    std::vector<Violation> violations;  // residual violations NOT tied to a flagged user
    bool all_infeasible = false;        // every user flagged: the run carries no utility
};

// Starting point of the alternating loop: everyone offloads, compression sits
// at the accuracy floor but keeps at least half the data, subcarriers go
// round-robin within each cell, and each server splits evenly over its users.
AllocationState initial_state(const Scenario& sc, const SystemParams& par);

// True-model score of a (possibly fractional) state: total utility over
// scored users plus the continuous constraint severity.
StateScore score_state(const Scenario& sc, const SystemParams& par,
                       const AllocationState& state);

// Plain split: every offloader (x > 0.5) of a cell gets the same share of
// the server, everyone else gets zero. Used as the second candidate of the
// capacity block and as the defining substitution of the averaged-computing
// baseline.
Eigen::VectorXd average_capacity_split(const Scenario& sc, const SystemParams& par,
                                       const AllocationState& state);

// Snap a relaxed state to binary decisions and repair delay violations by
// flipping offloaders back to local while their local branch fits, releasing
// their shares and capacity to the rest.
struct RoundOutcome {
    AllocationState state;
    std::vector<int> flipped;
    std::vector<int> infeasible;
    int repair_rounds = 0;
};

// How a scheme assigns server capacity to a (binary) state. The default
// (empty function) is the exact delay-optimal split.
using CapacityPolicy = std::function<Eigen::VectorXd(
    const Scenario&, const SystemParams&, const AllocationState&)>;

RoundOutcome round_and_repair(const Scenario& sc, const SystemParams& par,
                              const AllocationState& relaxed,
                              const CapacityPolicy& capacity_policy = {});

// The full pipeline: alternate the three blocks from `initial_state`, keep
// each block's result only when it does not degrade the true score
// (lexicographic on violation, then objective), and stop on a small
// objective delta. Every iterate is rounded and repaired as it is accepted;
// the best rounded candidate seen (same lexicographic rule) is returned,
// since rounding is not monotone along the relaxed trajectory.
RunResult run_joint_optimizer(const Scenario& sc, const SystemParams& par,
                              const OuterConfig& cfg = {});

// Structured text dump: config echo, trace, final state, per-user report.
std::string serialize_run(const Scenario& sc, const SystemParams& par, const OuterConfig& cfg,
                          const RunResult& run);

}  // namespace mecsim
