#include "mecsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include "mecsim/svg.hpp"

namespace mecsim {

namespace {

std::string fmt_wall(double ms) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", ms);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

RunRow run_one(Experiment e, const HarnessConfig& cfg, double sweep, double bw,
               Scheme scheme, std::uint64_t seed, std::vector<TraceRow>* trace_out) {
    RunRow row;
    row.experiment = to_string(e);
    row.scheme = to_string(scheme);
    row.sweep = sweep;
    row.bandwidth = bw;
    row.seed = seed;
    try {
        SystemParams par = cfg.params;
        GeometryConfig geom = cfg.geom;
        par.bandwidth = bw;
        switch (e) {
            case Experiment::convergence: break;
            case Experiment::sweep_users: geom.num_users = static_cast<int>(sweep); break;
            case Experiment::sweep_capacity: par.mec_capacity = sweep * 1e9; break;
            case Experiment::sweep_parallel:
                for (auto& t : par.task_types) t.parallelism = static_cast<int>(sweep);
                break;
            case Experiment::sweep_weight: par.weight = sweep; break;
        }
        const Scenario sc = make_scenario(geom, par, seed);

        const auto t0 = std::chrono::steady_clock::now();
        const RunResult run = run_scheme(scheme, sc, par, cfg.outer);
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

        row.utility = run.report.total;
        row.revenue = run.report.revenue;
        row.neg_cost = run.report.neg_cost;
        row.infeasible_users = run.report.infeasible_users;

        int served = 0;
        for (const auto& u : run.report.users)
            if (u.counted) ++served;
        const double recomposed =
            served * std::log(par.weight) + row.revenue + row.neg_cost;
        if (std::abs(row.utility - recomposed) >
            1e-9 * std::max(1.0, std::abs(row.utility)))
            row.error = "utility decomposition mismatch: total=" +
                        format_double(row.utility) +
                        " recomposed=" + format_double(recomposed);
        else if (!run.violations.empty())
            row.error = std::to_string(run.violations.size()) +
                        " constraint violations not covered by infeasibility flags";

        if (trace_out) {
            TraceRow t;
            t.scheme = row.scheme;
            t.bandwidth = bw;
            t.seed = seed;
            t.iteration = 0;
            t.objective = run.trace.initial_objective;
            trace_out->push_back(t);
            for (std::size_t i = 0; i < run.trace.iterations.size(); ++i) {
                t.iteration = static_cast<int>(i) + 1;
                t.objective = run.trace.iterations[i].objective;
                t.violation = run.trace.iterations[i].violation;
                trace_out->push_back(t);
            }
        }
    } catch (const std::exception& ex) {
        row.utility = row.revenue = row.neg_cost =
            std::numeric_limits<double>::quiet_NaN();
        row.error = ex.what();
    }
    return row;
}

}  // namespace

const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::convergence: return "convergence";
        case Experiment::sweep_users: return "sweep_users";
        case Experiment::sweep_capacity: return "sweep_capacity";
        case Experiment::sweep_parallel: return "sweep_parallel";
        case Experiment::sweep_weight: return "sweep_weight";
    }
    return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
    if (name == "convergence") return Experiment::convergence;
    if (name == "sweep_users") return Experiment::sweep_users;
    if (name == "sweep_capacity") return Experiment::sweep_capacity;
    if (name == "sweep_parallel") return Experiment::sweep_parallel;
    if (name == "sweep_weight") return Experiment::sweep_weight;
    throw std::invalid_argument("unknown experiment: " + name);
}

std::vector<double> sweep_values(Experiment e) {
    switch (e) {
        case Experiment::convergence: return {0.0};
        case Experiment::sweep_users: return {10, 15, 20, 25, 30, 35, 40, 45};
        case Experiment::sweep_capacity: return {50, 100, 150, 200, 250, 300, 350, 400};
        case Experiment::sweep_parallel: return {1, 2, 3, 4, 5};
        case Experiment::sweep_weight: return {1, 2, 5, 10, 20};
    }
    return {};
}

ExperimentResult run_experiment(Experiment e, const HarnessConfig& cfg) {
    if (cfg.seeds.empty() || cfg.bandwidths.empty() || cfg.schemes.empty())
        throw std::invalid_argument("harness config: seeds, bandwidths and schemes must be non-empty");

    struct Task {
        double sweep;
        double bw;
        Scheme scheme;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (double sweep : sweep_values(e))
        for (double bw : cfg.bandwidths)
            for (Scheme scheme : cfg.schemes)
                for (std::uint64_t seed : cfg.seeds) tasks.push_back({sweep, bw, scheme, seed});

    ExperimentResult out;
    out.rows.resize(tasks.size());
    std::vector<std::vector<TraceRow>> traces(tasks.size());
    const bool want_trace = e == Experiment::convergence;

    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            const Task& t = tasks[i];
            out.rows[i] = run_one(e, cfg, t.sweep, t.bw, t.scheme, t.seed,
                                  want_trace ? &traces[i] : nullptr);
        }
    };
    int jobs = cfg.jobs > 0 ? cfg.jobs
                            : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min<int>(jobs, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < jobs; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    for (auto& tr : traces)
        out.trace.insert(out.trace.end(), tr.begin(), tr.end());
    return out;
}

std::string results_csv(const std::vector<RunRow>& rows) {
    std::string out =
        "experiment,scheme,sweep,bandwidth,seed,utility,revenue,neg_cost,"
        "infeasible_users,wall_ms\n";
    for (const auto& r : rows) {
        out += r.experiment + "," + r.scheme + "," + format_double(r.sweep) + "," +
               format_double(r.bandwidth) + "," + std::to_string(r.seed) + "," +
               format_double(r.utility) + "," + format_double(r.revenue) + "," +
               format_double(r.neg_cost) + "," + std::to_string(r.infeasible_users) + "," +
               fmt_wall(r.wall_ms) + "\n";
    }
    return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::string out = "scheme,bandwidth,seed,iteration,objective,violation\n";
    for (const auto& r : rows) {
        out += r.scheme + "," + format_double(r.bandwidth) + "," + std::to_string(r.seed) +
               "," + std::to_string(r.iteration) + "," + format_double(r.objective) + "," +
               format_double(r.violation) + "\n";
    }
    return out;
}

std::string errors_log(const std::vector<RunRow>& rows) {
    std::string out;
    for (const auto& r : rows)
        if (!r.error.empty())
            out += r.experiment + "," + r.scheme + "," + format_double(r.sweep) + "," +
                   format_double(r.bandwidth) + "," + std::to_string(r.seed) + ": " +
                   r.error + "\n";
    return out;
}

std::string strip_wall_column(const std::string& results_text) {
    std::string out;
    for (const std::string& line : split(results_text, '\n')) {
        if (line.empty()) continue;
        const std::size_t cut = line.rfind(',');
        out += line.substr(0, cut) + "\n";
    }
    return out;
}

std::string summarize_csv(const std::string& results_text) {
    const std::vector<std::string> lines = split(results_text, '\n');
    if (lines.empty() ||
        split(lines[0], ',') !=
            std::vector<std::string>{"experiment", "scheme", "sweep", "bandwidth", "seed",
                                     "utility", "revenue", "neg_cost", "infeasible_users",
                                     "wall_ms"})
        throw std::invalid_argument("summarize: unexpected results header");

    struct Group {
        int runs = 0;
        int failed = 0;
        double sum_u = 0.0, sum_u2 = 0.0;
        double sum_rev = 0.0, sum_cost = 0.0, sum_inf = 0.0, sum_wall = 0.0;
    };
    std::vector<std::string> order;   // group keys, first appearance
    std::map<std::string, Group> groups;

    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = split(lines[li], ',');
        if (f.size() != 10)
            throw std::invalid_argument("summarize: malformed row: " + lines[li]);
        const std::string key = f[0] + "," + f[1] + "," + f[2] + "," + f[3];
        auto it = groups.find(key);
        if (it == groups.end()) {
            order.push_back(key);
            it = groups.emplace(key, Group{}).first;
        }
        Group& g = it->second;
        ++g.runs;
        const double u = std::strtod(f[5].c_str(), nullptr);
        if (!std::isfinite(u)) {
            ++g.failed;
            continue;
        }
        g.sum_u += u;
        g.sum_u2 += u * u;
        g.sum_rev += std::strtod(f[6].c_str(), nullptr);
        g.sum_cost += std::strtod(f[7].c_str(), nullptr);
        g.sum_inf += std::strtod(f[8].c_str(), nullptr);
        g.sum_wall += std::strtod(f[9].c_str(), nullptr);
    }

    std::string out =
        "experiment,scheme,sweep,bandwidth,runs,failed,utility_mean,utility_std,"
        "revenue_mean,neg_cost_mean,infeasible_mean,wall_ms_mean,utility_diff\n";
    std::map<std::string, double> last_mean;  // (experiment, scheme, bandwidth) -> mean
    for (const std::string& key : order) {
        const Group& g = groups.at(key);
        const int n = g.runs - g.failed;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double mean = n > 0 ? g.sum_u / n : nan;
        double stdev = nan;
        if (n >= 2) {
            const double var = (g.sum_u2 - g.sum_u * g.sum_u / n) / (n - 1);
            stdev = std::sqrt(std::max(0.0, var));
        }
        const auto f = split(key, ',');
        const std::string diff_key = f[0] + "," + f[1] + "," + f[3];
        double diff = nan;
        if (const auto prev = last_mean.find(diff_key); prev != last_mean.end())
            diff = mean - prev->second;
        if (n > 0) last_mean[diff_key] = mean;

        out += f[0] + "," + f[1] + "," + f[2] + "," + f[3] + "," + std::to_string(g.runs) +
               "," + std::to_string(g.failed) + "," + format_double(mean) + "," +
               format_double(stdev) + "," + format_double(n > 0 ? g.sum_rev / n : nan) + "," +
               format_double(n > 0 ? g.sum_cost / n : nan) + "," +
               format_double(n > 0 ? g.sum_inf / n : nan) + "," +
               fmt_wall(n > 0 ? g.sum_wall / n : nan) + "," + format_double(diff) + "\n";
    }
    return out;
}

void apply_config(HarnessConfig& cfg, const KvFile& kv) {
    std::vector<double> delays, accs;
    std::vector<int> pars;
    for (const std::string& key : kv.keys()) {
        if (key == "bandwidth") cfg.params.bandwidth = kv.get_double(key);
        else if (key == "num_subcarriers") cfg.params.num_subcarriers = static_cast<int>(kv.get_int(key));
        else if (key == "tx_power") cfg.params.tx_power = kv.get_double(key);
        else if (key == "noise_power") cfg.params.noise_power = kv.get_double(key);
        else if (key == "mec_capacity") cfg.params.mec_capacity = kv.get_double(key);
        else if (key == "local_capacity") cfg.params.local_capacity = kv.get_double(key);
        else if (key == "cycles_per_unit") cfg.params.cycles_per_unit = kv.get_double(key);
        else if (key == "degradation") cfg.params.degradation = kv.get_double(key);
        else if (key == "max_parallel") cfg.params.max_parallel = static_cast<int>(kv.get_int(key));
        else if (key == "fit_p") cfg.params.fit_p = kv.get_double(key);
        else if (key == "fit_q") cfg.params.fit_q = kv.get_double(key);
        else if (key == "fit_r") cfg.params.fit_r = kv.get_double(key);
        else if (key == "weight") cfg.params.weight = kv.get_double(key);
        else if (key == "carrier_ghz") cfg.params.carrier_ghz = kv.get_double(key);
        else if (key == "bits_per_unit") cfg.params.bits_per_unit = kv.get_double(key);
        else if (key == "task_volume_lo") cfg.params.task_volume_lo = kv.get_double(key);
        else if (key == "task_volume_hi") cfg.params.task_volume_hi = kv.get_double(key);
        else if (key == "task_delay_limits") delays = kv.get_doubles(key);
        else if (key == "task_accuracy_limits") accs = kv.get_doubles(key);
        else if (key == "task_parallelism") pars = kv.get_ints(key);
        else if (key == "area_side") cfg.geom.area_side = kv.get_double(key);
        else if (key == "num_sbs") cfg.geom.num_sbs = static_cast<int>(kv.get_int(key));
        else if (key == "num_users") cfg.geom.num_users = static_cast<int>(kv.get_int(key));
        else if (key == "min_user_sbs_distance") cfg.geom.min_user_sbs_distance = kv.get_double(key);
        else if (key == "outer_tol") cfg.outer.tol = kv.get_double(key);
        else if (key == "max_outer") cfg.outer.max_outer = static_cast<int>(kv.get_int(key));
        else if (key == "tol_shares") cfg.outer.tol_shares = kv.get_double(key);
        else if (key == "tol_offload") cfg.outer.tol_offload = kv.get_double(key);
        else if (key == "seeds") {
            cfg.seeds.clear();
            for (int s : kv.get_ints(key)) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        } else if (key == "bandwidths") cfg.bandwidths = kv.get_doubles(key);
        else if (key == "schemes") {
            cfg.schemes.clear();
            for (const std::string& name : split(kv.get(key), ','))
                if (!name.empty()) cfg.schemes.push_back(scheme_from_string(name));
        } else if (key == "jobs") cfg.jobs = static_cast<int>(kv.get_int(key));
        else throw std::invalid_argument("unknown config key: " + key);
    }
    if (!delays.empty() || !accs.empty() || !pars.empty()) {
        if (delays.size() != accs.size() || accs.size() != pars.size() || delays.empty())
            throw std::invalid_argument(
                "task_delay_limits, task_accuracy_limits and task_parallelism must be "
                "given together with equal lengths");
        cfg.params.task_types.clear();
        for (std::size_t i = 0; i < delays.size(); ++i)
            cfg.params.task_types.push_back({delays[i], accs[i], pars[i]});
    }
}

int write_outputs(Experiment e, const HarnessConfig& cfg, const ExperimentResult& res,
                  const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + name + " in " + out_dir);
        f << text;
    };

    write("results.csv", results_csv(res.rows));
    int failed = 0;
    for (const auto& r : res.rows)
        if (!r.error.empty()) ++failed;
    if (failed > 0)
        write("errors.log", errors_log(res.rows));
    else
        fs::remove(fs::path(out_dir) / "errors.log");
    if (e == Experiment::convergence) write("convergence_trace.csv", trace_csv(res.trace));

    std::vector<Series> series;
    const auto label = [](const std::string& scheme, double bw) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s %.0f MHz", scheme.c_str(), bw / 1e6);
        return std::string(buf);
    };
    if (e == Experiment::convergence) {
        const std::uint64_t seed0 = cfg.seeds.front();
        for (double bw : cfg.bandwidths)
            for (Scheme s : cfg.schemes) {
                Series ser;
                ser.label = label(to_string(s), bw);
                for (const auto& t : res.trace)
                    if (t.scheme == to_string(s) && t.bandwidth == bw && t.seed == seed0) {
                        ser.x.push_back(t.iteration);
                        ser.y.push_back(t.objective);
                    }
                series.push_back(std::move(ser));
            }
        write(std::string(to_string(e)) + ".svg",
              line_chart("objective per outer iteration", "iteration", "objective", series));
    } else {
        for (double bw : cfg.bandwidths)
            for (Scheme s : cfg.schemes) {
                Series ser;
                ser.label = label(to_string(s), bw);
                for (double sweep : sweep_values(e)) {
                    double sum = 0.0;
                    int n = 0;
                    for (const auto& r : res.rows)
                        if (r.scheme == to_string(s) && r.bandwidth == bw &&
                            r.sweep == sweep && std::isfinite(r.utility)) {
                            sum += r.utility;
                            ++n;
                        }
                    ser.x.push_back(sweep);
                    ser.y.push_back(n > 0 ? sum / n
                                          : std::numeric_limits<double>::quiet_NaN());
                }
                series.push_back(std::move(ser));
            }
        write(std::string(to_string(e)) + ".svg",
              line_chart(std::string("mean utility, ") + to_string(e), to_string(e),
                         "system utility", series));
    }
    return failed;
}

}  // namespace mecsim
