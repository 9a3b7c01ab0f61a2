#pragma once

#include "mecsim/model.hpp"

namespace mecsim {

// Exhaustive search over a discretized decision space, for validating the
// optimizer on instances small enough to enumerate. The grid fixes what
// "exhaustive" means:
//   - offload choice x is exact (every binary pattern),
//   - each subcarrier is owned outright by one offloader of each cell or
//     left dark (shares are not fractionally enumerated),
//   - compression ratios come from eps_grid,
//   - each cell's capacity is split into capacity_steps equal quanta and
//     every positive composition over its offloaders is tried (the full
//     budget is always spent; extra capacity never hurts).
struct BruteForceGrid {
    std::vector<double> eps_grid = {1.0, 1.5, 2.0, 3.0, 4.0};
    int capacity_steps = 20;
    // Refusal caps: the search space is exponential, so anything bigger than
    // this throws instead of silently running for hours.
    int max_users = 4;
    int max_subcarriers = 4;
};

struct OracleResult {
    AllocationState state;       // best feasible grid point (all-local if none beat it)
    double objective = 0.0;      // system utility of that state
    bool feasible_found = false; // false when no grid point passes every constraint
    long long evaluated = 0;     // candidate states scored
};

// Enumerate the full grid, score each candidate with the exact system model,
// discard anything with a constraint violation, return the feasible best.
// Throws std::invalid_argument when the instance exceeds the grid caps.
OracleResult brute_force(const Scenario& sc, const SystemParams& par,
                         const BruteForceGrid& grid = {});

// Project a binary state onto the oracle's grid: compression snaps to the
// nearest eps_grid value, capacity to a positive whole-quanta split of each
// cell's budget (largest remainder, every offloader keeps at least one
// quantum). Offload and subcarrier ownership must already be binary; they
// pass through unchanged. The result is a grid point, so a feasible snapped
// state can never score above brute_force on the same instance.
AllocationState snap_to_grid(const Scenario& sc, const SystemParams& par,
                             const AllocationState& state, const BruteForceGrid& grid = {});

}  // namespace mecsim
