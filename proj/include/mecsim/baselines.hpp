#pragma once

#include <string>

#include "mecsim/orchestrator.hpp"

namespace mecsim {

// Comparison schemes. Each replaces exactly one block of the alternating
// optimizer and leaves the rest untouched:
//  - fixed_channel: subcarriers stay on the initial round-robin grid; the
//    share block never runs.
//  - average_computing: each server splits its capacity evenly over its
//    offloading users instead of solving the delay-optimal split.
//  - no_compression: compression is pinned to 1 and the offload decision is a
//    per-user delay comparison that ignores the parallel-degradation
//    multiplier; the returned state is still scored under the true model.
enum class Scheme { proposed, fixed_channel, average_computing, no_compression };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);  // throws on unknown names

// Runs one scheme end to end with the orchestrator's contract: relaxed
// alternating loop, rounding, feasibility repair, true-model scoring.
// `proposed` delegates to run_joint_optimizer.
RunResult run_scheme(Scheme scheme, const Scenario& sc, const SystemParams& par,
                     const OuterConfig& cfg = {});

}  // namespace mecsim
