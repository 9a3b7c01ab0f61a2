#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mecsim/params.hpp"
#include "mecsim/scenario.hpp"

namespace mecsim {

// Joint decision for every user: computing mode, subcarrier shares, granted
// server capacity, compression ratio. Entries are doubles so the same type
// carries both relaxed iterates and the final binary state.
struct AllocationState {
    Eigen::VectorXd offload;     // x per user: 0 local, 1 offload ([0,1] while relaxed)
    Eigen::MatrixXd assign;      // rho, U x N subcarrier shares
    Eigen::VectorXd capacity;    // f per user, cycles/s (0 for local users)
    Eigen::VectorXd compression; // eps per user, >= 1
};

// Everyone computes locally, nothing allocated. Handy zero point for tests
// and the repair path.
AllocationState all_local_state(const Scenario& sc, const SystemParams& params);

// Stand-in delay for "offloading but unserved" (no rate or no capacity).
// Finite so reports stay printable; always fails the delay check.
constexpr double kUnservedDelay = 1e9;

struct Violation {
    std::string constraint; // "C1".."C8"
    int user = -1;           // -1 when not tied to one user
    int sbs = -1;
    int subcarrier = -1;
    double amount = 0.0;     // how far past the limit, in the constraint's units
};

struct UserReport {
    int user = 0;
    double offload = 0.0;
    double rate = 0.0;      // bits/s
    double delay = 0.0;     // seconds
    double accuracy = 0.0;  // percent
    double utility = 0.0;
    bool counted = true;    // false when utility is undefined (flagged user)
    std::string violated;   // per-user constraint tags, e.g. "C6;C7"
};

struct UtilityReport {
    std::vector<UserReport> users;
    double total = 0.0;     // sum of counted users' utilities
    double revenue = 0.0;   // sum ln(y) over counted users
    double neg_cost = 0.0;  // -sum ln(t) over counted users
    int infeasible_users = 0;
};

// Interference power seen at each station on each subcarrier from users of
// other cells (own-cell users are orthogonal). K x N.
Eigen::MatrixXd interference_field(const Scenario& sc, const SystemParams& params,
                                   const AllocationState& state);

double uplink_rate(const Scenario& sc, const SystemParams& params,
                   const AllocationState& state, int user);
Eigen::VectorXd uplink_rates(const Scenario& sc, const SystemParams& params,
                             const AllocationState& state);

double local_delay(const SystemParams& params, double volume_units);
double compressed_volume(double volume_units, double eps);

// Server-side compute time for b units at capacity f, inflated by the
// parallel-unit degradation multiplier (1+d)^(parallelism-1).
double mec_delay(const SystemParams& params, double b_units, double f, int parallelism);
double degradation_multiplier(const SystemParams& params, int parallelism);

double total_delay(const Scenario& sc, const SystemParams& params,
                   const AllocationState& state, int user);
double total_delay_given_rate(const Scenario& sc, const SystemParams& params,
                              const AllocationState& state, int user, double rate);

// Effective data volume feeding the accuracy fit: (1-x)a + x*b.
double effective_volume(const Scenario& sc, const AllocationState& state, int user);
double accuracy(const SystemParams& params, double alpha_units);

double user_utility(const SystemParams& params, double y, double t);

UtilityReport system_utility(const Scenario& sc, const SystemParams& params,
                             const AllocationState& state);

// Exact check of every constraint of the joint problem on a binary state.
std::vector<Violation> check_feasible(const Scenario& sc, const SystemParams& params,
                                      const AllocationState& state);

// Total severity of the continuously-checkable constraints (shares, budgets,
// delay, accuracy, compression), ignoring integrality. Used to compare
// relaxed iterates.
double continuous_violation(const Scenario& sc, const SystemParams& params,
                            const AllocationState& state);

std::string report_csv(const UtilityReport& report);

}  // namespace mecsim
