#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mecsim/baselines.hpp"
#include "mecsim/kv.hpp"

namespace mecsim {

// The experiment families the harness knows how to run. Each one varies a
// single knob (the "sweep" value) and measures every requested scheme over
// every requested seed and bandwidth:
//   convergence    no knob (sweep = 0); additionally records per-iteration traces
//   sweep_users    number of users, 10..45 step 5
//   sweep_capacity edge server capacity, 50..400 Gcycles/s step 50
//   sweep_parallel parallel units requested by every task type, 1..5
//   sweep_weight   utility weight, {1, 2, 5, 10, 20}
enum class Experiment {
    convergence,
    sweep_users,
    sweep_capacity,
    sweep_parallel,
    sweep_weight,
};

const char* to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);
std::vector<double> sweep_values(Experiment e);

// Everything one harness invocation needs. Flat key=value config files can
// override any field; command-line flags override the file.
struct HarnessConfig {
    SystemParams params;
    GeometryConfig geom;
    OuterConfig outer;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> bandwidths = {1e7, 5e7};
    std::vector<Scheme> schemes = {Scheme::proposed, Scheme::fixed_channel,
                                   Scheme::average_computing, Scheme::no_compression};
    int jobs = 0;  // worker threads; 0 picks the hardware concurrency
};

// One run of one scheme on one generated instance. `error` stays empty on
// success; when the run throws, the metrics are NaN and the message goes to
// the error log, so a sweep never aborts half way. A run that finishes but
// leaves constraint violations no infeasibility flag accounts for also sets
// `error` (keeping its metrics), so soundness problems surface in the log
// and the exit code.
struct RunRow {
    std::string experiment;
    std::string scheme;
    double sweep = 0.0;
    double bandwidth = 0.0;
    std::uint64_t seed = 0;
    double utility = std::numeric_limits<double>::quiet_NaN();
    double revenue = std::numeric_limits<double>::quiet_NaN();
    double neg_cost = std::numeric_limits<double>::quiet_NaN();
    int infeasible_users = 0;
    double wall_ms = 0.0;
    std::string error;
};

// One point of an outer-iteration objective trace (convergence experiment).
// Iteration 0 is the objective of the initial state; its violation is not
// tracked and serializes as nan.
struct TraceRow {
    std::string scheme;
    double bandwidth = 0.0;
    std::uint64_t seed = 0;
    int iteration = 0;
    double objective = 0.0;
    double violation = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
    std::vector<RunRow> rows;      // fixed order: sweep, bandwidth, scheme, seed
    std::vector<TraceRow> trace;   // convergence experiment only
};

// Run the full grid for one experiment. Work is spread over a thread pool;
// results land in a preallocated slot per run, so the output order never
// depends on scheduling. Each row checks the utility decomposition
// (total = served*ln(weight) + revenue + neg_cost) and reports a mismatch
// through the row's error field.
ExperimentResult run_experiment(Experiment e, const HarnessConfig& cfg);

// CSV renderers. Column order is part of the output contract:
//   results: experiment,scheme,sweep,bandwidth,seed,utility,revenue,neg_cost,infeasible_users,wall_ms
//   trace:   scheme,bandwidth,seed,iteration,objective,violation
// Reruns of the same configuration are byte-identical except the wall_ms
// column, which is what strip_wall_column exists for.
std::string results_csv(const std::vector<RunRow>& rows);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string errors_log(const std::vector<RunRow>& rows);  // failed rows only
std::string strip_wall_column(const std::string& results_text);

// Group a results CSV by (experiment, scheme, sweep, bandwidth): run count,
// failure count, mean and sample standard deviation of the utility, means of
// the other metrics, and the first difference of the utility mean against the
// previous sweep value of the same group. Failed rows are excluded from the
// statistics.
std::string summarize_csv(const std::string& results_text);

// Apply a parsed key=value config. Unknown keys throw so typos surface
// instead of silently running the defaults.
void apply_config(HarnessConfig& cfg, const KvFile& kv);

// Write results.csv, errors.log (only when something failed), the trace CSV
// (convergence only) and one SVG chart per experiment into out_dir. Returns
// the number of failed rows.
int write_outputs(Experiment e, const HarnessConfig& cfg, const ExperimentResult& res,
                  const std::string& out_dir);

}  // namespace mecsim
