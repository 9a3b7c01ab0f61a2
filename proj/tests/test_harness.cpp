#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mecsim/harness.hpp"
#include "mecsim/svg.hpp"

using namespace mecsim;

namespace {

// small instance so the full grid stays fast: one cell, three users
HarnessConfig tiny() {
    HarnessConfig cfg;
    cfg.geom.num_sbs = 1;
    cfg.geom.num_users = 3;
    cfg.params.num_subcarriers = 4;
    cfg.outer.max_outer = 2;
    cfg.seeds = {1, 2};
    cfg.bandwidths = {1e7};
    cfg.schemes = {Scheme::no_compression};
    cfg.jobs = 2;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("experiment names and sweep grids are pinned") {
    CHECK(sweep_values(Experiment::convergence) == std::vector<double>{0.0});
    CHECK(sweep_values(Experiment::sweep_users) ==
          std::vector<double>{10, 15, 20, 25, 30, 35, 40, 45});
    CHECK(sweep_values(Experiment::sweep_capacity) ==
          std::vector<double>{50, 100, 150, 200, 250, 300, 350, 400});
    CHECK(sweep_values(Experiment::sweep_parallel) == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(sweep_values(Experiment::sweep_weight) == std::vector<double>{1, 2, 5, 10, 20});
    for (Experiment e : {Experiment::convergence, Experiment::sweep_users,
                         Experiment::sweep_capacity, Experiment::sweep_parallel,
                         Experiment::sweep_weight})
        CHECK(experiment_from_string(to_string(e)) == e);
    CHECK_THROWS_AS(experiment_from_string("sweep_everything"), std::invalid_argument);
}

TEST_CASE("weight sweep fills the grid in pinned order and reruns identically") {
    HarnessConfig cfg = tiny();
    ExperimentResult res = run_experiment(Experiment::sweep_weight, cfg);
    REQUIRE(res.rows.size() == 5 * 1 * 1 * 2);  // sweeps x bandwidths x schemes x seeds

    std::size_t i = 0;
    for (double w : sweep_values(Experiment::sweep_weight))
        for (std::uint64_t seed : cfg.seeds) {
            const RunRow& r = res.rows[i++];
            CHECK(r.sweep == w);
            CHECK(r.seed == seed);
            CHECK(r.scheme == std::string("wcr"));
            CHECK(r.error.empty());
            CHECK(std::isfinite(r.utility));
            CHECK(r.wall_ms >= 0.0);
        }

    ExperimentResult again = run_experiment(Experiment::sweep_weight, cfg);
    CHECK(strip_wall_column(results_csv(res.rows)) ==
          strip_wall_column(results_csv(again.rows)));
    // the identity total = served*ln(w) + revenue + neg_cost held in every row
    // (run_experiment flags violations through the error field)
    for (const auto& r : res.rows) CHECK(r.error.empty());
}

TEST_CASE("convergence experiment records one trace per run") {
    HarnessConfig cfg = tiny();
    cfg.schemes = {Scheme::no_compression, Scheme::average_computing};
    ExperimentResult res = run_experiment(Experiment::convergence, cfg);
    REQUIRE(res.rows.size() == 4);

    for (const auto& row : res.rows) {
        int count = 0;
        int last_iter = -1;
        for (const auto& t : res.trace)
            if (t.scheme == row.scheme && t.seed == row.seed && t.bandwidth == row.bandwidth) {
                CHECK(t.iteration == last_iter + 1);  // contiguous from 0
                last_iter = t.iteration;
                ++count;
            }
        CHECK(count >= 2);                            // initial point plus >= 1 iteration
        CHECK(count <= cfg.outer.max_outer + 1);
    }
    const std::string csv = trace_csv(res.trace);
    CHECK(csv.rfind("scheme,bandwidth,seed,iteration,objective,violation\n", 0) == 0);
}

TEST_CASE("failed runs become rows instead of aborting the sweep") {
    HarnessConfig cfg = tiny();
    cfg.params.max_parallel = 3;  // parallel sweep asks for 4 and 5 -> invalid
    ExperimentResult res = run_experiment(Experiment::sweep_parallel, cfg);
    REQUIRE(res.rows.size() == 10);

    int ok = 0, failed = 0;
    for (const auto& r : res.rows) {
        if (r.error.empty()) {
            CHECK(std::isfinite(r.utility));
            CHECK(r.sweep <= 3);
            ++ok;
        } else {
            CHECK(std::isnan(r.utility));
            CHECK(r.sweep >= 4);
            ++failed;
        }
    }
    CHECK(ok == 6);
    CHECK(failed == 4);
    CHECK(errors_log(res.rows).find("parallelism") != std::string::npos);
    const std::string csv = results_csv(res.rows);
    CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("results csv strips to the same text with the wall column removed") {
    RunRow r;
    r.experiment = "sweep_weight";
    r.scheme = "proposed";
    r.sweep = 2;
    r.bandwidth = 1e7;
    r.seed = 7;
    r.utility = 12.5;
    r.revenue = 10.0;
    r.neg_cost = 2.5;
    r.infeasible_users = 1;
    r.wall_ms = 123.456;
    const std::string csv = results_csv({r});
    CHECK(csv ==
          "experiment,scheme,sweep,bandwidth,seed,utility,revenue,neg_cost,"
          "infeasible_users,wall_ms\n"
          "sweep_weight,proposed,2,10000000,7,12.5,10,2.5,1,123.456\n");
    CHECK(strip_wall_column(csv) ==
          "experiment,scheme,sweep,bandwidth,seed,utility,revenue,neg_cost,"
          "infeasible_users\n"
          "sweep_weight,proposed,2,10000000,7,12.5,10,2.5,1\n");
}

TEST_CASE("summaries compute group statistics and sweep differences") {
    const std::string csv =
        "experiment,scheme,sweep,bandwidth,seed,utility,revenue,neg_cost,"
        "infeasible_users,wall_ms\n"
        "sweep_weight,proposed,1,10000000,1,10,8,2,0,5.000\n"
        "sweep_weight,proposed,1,10000000,2,14,9,3,1,6.000\n"
        "sweep_weight,proposed,2,10000000,1,20,15,5,0,7.000\n"
        "sweep_weight,proposed,2,10000000,2,nan,nan,nan,0,0.000\n";
    const std::string sum = summarize_csv(csv);
    std::istringstream ss(sum);
    std::string header, g1, g2;
    std::getline(ss, header);
    std::getline(ss, g1);
    std::getline(ss, g2);
    CHECK(header ==
          "experiment,scheme,sweep,bandwidth,runs,failed,utility_mean,utility_std,"
          "revenue_mean,neg_cost_mean,infeasible_mean,wall_ms_mean,utility_diff");
    // group 1: mean 12, sample std sqrt(8) = 2*sqrt(2), no previous sweep
    CHECK(g1.rfind("sweep_weight,proposed,1,10000000,2,0,12,", 0) == 0);
    CHECK(g1.find("2.8284271247461903") != std::string::npos);
    CHECK(g1.substr(g1.size() - 4) == ",nan");
    // group 2: one failed row, mean 20, diff vs previous sweep mean = 8
    CHECK(g2.rfind("sweep_weight,proposed,2,10000000,2,1,20,", 0) == 0);
    CHECK(g2.substr(g2.size() - 2) == ",8");

    CHECK_THROWS_AS(summarize_csv("utility,wall\n1,2\n"), std::invalid_argument);
}

TEST_CASE("config files override only the keys they name") {
    HarnessConfig cfg;
    KvFile kv = KvFile::parse(
        "bandwidth=5e7\nnum_users=12\nmax_outer=4\nseeds=3,1,2\nschemes=proposed,wcr\n"
        "task_delay_limits=0.05,0.08\ntask_accuracy_limits=85,90\ntask_parallelism=1,2\n");
    apply_config(cfg, kv);
    CHECK(cfg.params.bandwidth == 5e7);
    CHECK(cfg.geom.num_users == 12);
    CHECK(cfg.outer.max_outer == 4);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 1, 2});
    REQUIRE(cfg.schemes.size() == 2);
    CHECK(cfg.schemes[0] == Scheme::proposed);
    CHECK(cfg.schemes[1] == Scheme::no_compression);
    REQUIRE(cfg.params.task_types.size() == 2);
    CHECK(cfg.params.task_types[1].delay_limit == 0.08);
    CHECK(cfg.params.task_types[1].parallelism == 2);
    // untouched fields keep their defaults
    CHECK(cfg.params.mec_capacity == 2e11);
    CHECK(cfg.geom.num_sbs == 4);

    CHECK_THROWS_AS(apply_config(cfg, KvFile::parse("bandwith=1e7\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_config(cfg, KvFile::parse("task_delay_limits=0.05\n")),
                    std::invalid_argument);
}

TEST_CASE("output writer drops the files in place and reports failures") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mecsim_harness_test";
    fs::remove_all(dir);

    HarnessConfig cfg = tiny();
    ExperimentResult res = run_experiment(Experiment::convergence, cfg);
    const int failed = write_outputs(Experiment::convergence, cfg, res, dir.string());
    CHECK(failed == 0);
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(fs::exists(dir / "convergence_trace.csv"));
    CHECK(fs::exists(dir / "convergence.svg"));
    CHECK_FALSE(fs::exists(dir / "errors.log"));
    CHECK(slurp(dir / "results.csv") == results_csv(res.rows));

    // now a partially failing sweep: errors.log appears
    HarnessConfig bad = tiny();
    bad.params.max_parallel = 3;
    ExperimentResult res2 = run_experiment(Experiment::sweep_parallel, bad);
    const int failed2 = write_outputs(Experiment::sweep_parallel, bad, res2, dir.string());
    CHECK(failed2 == 4);
    CHECK(fs::exists(dir / "errors.log"));
    CHECK(fs::exists(dir / "sweep_parallel.svg"));
    fs::remove_all(dir);
}

TEST_CASE("line charts are well-formed and skip non-finite points") {
    Series s1{"alpha", {1, 2, 3, 4}, {2.0, 2.5, std::nan(""), 4.0}};
    Series s2{"beta", {1, 2, 3, 4}, {1.0, 1.5, 2.0, 2.5}};
    const std::string svg = line_chart("demo", "x", "y", {s1, s2});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("alpha") != std::string::npos);
    CHECK(svg.find("beta") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    // the broken series splits into two polylines, the whole one stays single
    std::size_t polylines = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
         pos = svg.find("<polyline", pos + 1))
        ++polylines;
    CHECK(polylines == 3);

    const std::string empty = line_chart("empty", "x", "y", {});
    CHECK(empty.find("no data") != std::string::npos);
    const std::string esc = line_chart("a<b&c", "x", "y", {});
    CHECK(esc.find("a&lt;b&amp;c") != std::string::npos);
}
