// Command-line front end: runs experiment grids, summarizes result tables,
// and replays saved scenarios through any scheme.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mecsim/harness.hpp"

using namespace mecsim;

namespace {

constexpr const char* kColumnNote =
    "Output contract:\n"
    "  results.csv columns: experiment,scheme,sweep,bandwidth,seed,utility,revenue,\n"
    "                       neg_cost,infeasible_users,wall_ms\n"
    "  trace csv columns:   scheme,bandwidth,seed,iteration,objective,violation\n"
    "  summary columns:     experiment,scheme,sweep,bandwidth,runs,failed,utility_mean,\n"
    "                       utility_std,revenue_mean,neg_cost_mean,infeasible_mean,\n"
    "                       wall_ms_mean,utility_diff\n"
    "The sweep column holds the experiment's knob: user count (sweep_users), edge\n"
    "capacity in Gcycles/s (sweep_capacity), parallel units (sweep_parallel), the\n"
    "utility weight (sweep_weight), and 0 for convergence. Reruns of the same\n"
    "configuration are byte-identical except the wall_ms column. Failed runs keep\n"
    "their row (metrics nan) and the message lands in errors.log; they never abort\n"
    "the sweep. Exit codes: 0 all runs ok, 1 some runs failed, 2 invalid usage or\n"
    "configuration.\n";

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct CliFlags {
    std::vector<std::uint64_t> seeds;
    std::vector<double> bandwidths;
    std::vector<std::string> schemes;
    std::string config_path;
    std::string out_dir = "out";
    int jobs = 0;
};

// defaults -> config file -> explicit command-line values
HarnessConfig assemble(const CLI::App& cmd, const CliFlags& flags) {
    HarnessConfig cfg;
    if (!flags.config_path.empty()) apply_config(cfg, KvFile::read_file(flags.config_path));
    if (cmd.count("--seeds")) cfg.seeds = flags.seeds;
    if (cmd.count("--bandwidth")) cfg.bandwidths = flags.bandwidths;
    if (cmd.count("--schemes")) {
        cfg.schemes.clear();
        for (const auto& name : flags.schemes) cfg.schemes.push_back(scheme_from_string(name));
    }
    if (cmd.count("--jobs")) cfg.jobs = flags.jobs;
    cfg.params.validate();
    cfg.geom.validate();
    cfg.outer.validate();
    return cfg;
}

void add_common_flags(CLI::App* cmd, CliFlags& flags) {
    cmd->add_option("--seeds", flags.seeds, "Scenario seeds (default 1..10)");
    cmd->add_option("--bandwidth", flags.bandwidths,
                    "Uplink bandwidths in Hz (default 1e7 5e7)");
    cmd->add_option("--schemes", flags.schemes,
                    "Schemes to run: proposed fc ac wcr (default all)");
    cmd->add_option("--config", flags.config_path,
                    "key=value file overriding system/geometry/loop settings");
    cmd->add_option("--out-dir", flags.out_dir, "Output directory (default: out)");
    cmd->add_option("--jobs", flags.jobs, "Worker threads (default: hardware)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MEC offloading and resource allocation simulator"};
    app.footer(kColumnNote);
    app.require_subcommand(1);

    CliFlags flags;
    std::string experiment_name;
    CLI::App* run = app.add_subcommand(
        "run", "Run one experiment grid and write results.csv, charts and logs");
    run->add_option("experiment", experiment_name,
                    "convergence | sweep_users | sweep_capacity | sweep_parallel | sweep_weight")
        ->required();
    add_common_flags(run, flags);

    std::string summarize_in, summarize_out;
    CLI::App* summ = app.add_subcommand(
        "summarize", "Aggregate a results.csv into per-group statistics");
    summ->add_option("results", summarize_in, "Path to a results.csv")->required();
    summ->add_option("--out", summarize_out, "Write the summary here instead of stdout");

    std::string replay_path, replay_scheme = "proposed";
    std::uint64_t generate_seed = 0;
    CLI::App* replay = app.add_subcommand(
        "replay", "Re-run one scheme on a saved scenario file and dump the run");
    replay->add_option("scenario", replay_path, "Scenario file (key=value dump)")->required();
    replay->add_option("--scheme", replay_scheme, "proposed | fc | ac | wcr");
    replay->add_option("--generate-seed", generate_seed,
                       "First generate the scenario from this seed and save it to the "
                       "given path, then replay it");
    replay->add_option("--config", flags.config_path,
                       "key=value file overriding system/loop settings");
    replay->add_option("--out-dir", flags.out_dir,
                       "Also write the dump to <out-dir>/replay.txt");

    try {
        app.parse(argc, argv);

        if (*run) {
            const Experiment e = experiment_from_string(experiment_name);
            const HarnessConfig cfg = assemble(*run, flags);
            const ExperimentResult res = run_experiment(e, cfg);
            const int failed = write_outputs(e, cfg, res, flags.out_dir);
            std::printf("%s: %zu runs, %d failed, outputs in %s\n", to_string(e),
                        res.rows.size(), failed, flags.out_dir.c_str());
            return failed > 0 ? 1 : 0;
        }
        if (*summ) {
            const std::string summary = summarize_csv(read_text(summarize_in));
            if (summarize_out.empty()) {
                std::fputs(summary.c_str(), stdout);
            } else {
                std::ofstream f(summarize_out, std::ios::binary);
                if (!f) throw std::runtime_error("cannot write " + summarize_out);
                f << summary;
            }
            return 0;
        }
        if (*replay) {
            HarnessConfig cfg;
            if (!flags.config_path.empty())
                apply_config(cfg, KvFile::read_file(flags.config_path));
            cfg.params.validate();
            cfg.outer.validate();
            if (replay->count("--generate-seed")) {
                cfg.geom.validate();
                save_scenario(make_scenario(cfg.geom, cfg.params, generate_seed), replay_path);
            }
            const Scenario sc = load_scenario(replay_path);
            const Scheme scheme = scheme_from_string(replay_scheme);
            const RunResult result = run_scheme(scheme, sc, cfg.params, cfg.outer);
            const std::string dump = serialize_run(sc, cfg.params, cfg.outer, result);
            std::fputs(dump.c_str(), stdout);
            if (replay->count("--out-dir")) {
                std::filesystem::create_directories(flags.out_dir);
                std::ofstream f(std::filesystem::path(flags.out_dir) / "replay.txt",
                                std::ios::binary);
                f << dump;
            }
            return 0;
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
