#include "mecsim/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "mecsim/kv.hpp"

namespace mecsim {

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// Smallest data volume that still reaches the accuracy limit y = p - q*a^-r.
double min_volume_for_accuracy(const SystemParams& par, double accuracy_limit) {
    return std::pow(par.fit_q / (par.fit_p - accuracy_limit), 1.0 / par.fit_r);
}

// Lexicographic pick-better: a candidate replaces the incumbent when it is
// strictly less violating, or equally violating and not worse in objective.
bool better(const StateScore& cand, const StateScore& incumbent) {
    if (cand.violation < incumbent.violation - 1e-9) return true;
    if (cand.violation > incumbent.violation + 1e-9) return false;
    return cand.objective >= incumbent.objective - 1e-12;
}

void release_user(AllocationState& st, int u) {
    st.offload(u) = 0.0;
    st.compression(u) = 1.0;
    st.capacity(u) = 0.0;
    st.assign.row(u).setZero();
}

}  // namespace

AllocationState initial_state(const Scenario& sc, const SystemParams& par) {
    AllocationState st = all_local_state(sc, par);
    st.offload.setOnes();
    for (int u = 0; u < sc.num_users(); ++u) {
        const auto& task = par.task_types[sc.task_type[u]];
        const double amin = min_volume_for_accuracy(par, task.accuracy_limit);
        const double keep = std::min(1.0, std::max(amin / sc.volume[u], 0.5));
        st.compression(u) = 1.0 / keep;
    }
    for (int k = 0; k < sc.num_sbs(); ++k) {
        const auto& users = sc.cell_users[k];
        if (users.empty()) continue;
        for (int n = 0; n < par.num_subcarriers; ++n)
            st.assign(users[n % users.size()], n) = 1.0;
        const double share = par.mec_capacity / static_cast<double>(users.size());
        for (int u : users) st.capacity(u) = share;
    }
    return st;
}

StateScore score_state(const Scenario& sc, const SystemParams& par,
                       const AllocationState& state) {
    StateScore s;
    s.objective = system_utility(sc, par, state).total;
    s.violation = continuous_violation(sc, par, state);
    return s;
}

Eigen::VectorXd average_capacity_split(const Scenario& sc, const SystemParams& par,
                                       const AllocationState& state) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(sc.num_users());
    for (int k = 0; k < sc.num_sbs(); ++k) {
        std::vector<int> offloaders;
        for (int u : sc.cell_users[k])
            if (state.offload(u) > 0.5) offloaders.push_back(u);
        if (offloaders.empty()) continue;
        const double share = par.mec_capacity / static_cast<double>(offloaders.size());
        for (int u : offloaders) f(u) = share;
    }
    return f;
}

RoundOutcome round_and_repair(const Scenario& sc, const SystemParams& par,
                              const AllocationState& relaxed,
                              const CapacityPolicy& capacity_policy) {
    const auto split_capacity = [&](const AllocationState& s) {
        return capacity_policy ? capacity_policy(sc, par, s)
                               : allocate_capacity(sc, par, s).capacity;
    };
    RoundOutcome out;
    AllocationState st = relaxed;
    st.assign = round_subcarriers(sc, relaxed.assign);

    RoundedOffload ro = round_offload(sc, par, st);
    st.offload = ro.offload;
    st.compression = ro.compression;
    out.flipped = ro.flipped;
    std::set<int> infeasible(ro.infeasible.begin(), ro.infeasible.end());

    // local users hold no radio or server resources
    for (int u = 0; u < sc.num_users(); ++u)
        if (st.offload(u) < 0.5) release_user(st, u);
    st.capacity = split_capacity(st);

    // Delay repair: an offloader past its limit moves back to local when the
    // local branch fits. One flip per round, worst violation first: each flip
    // frees shares (less interference) and server capacity, which often heals
    // the remaining offloaders without further flips. Accuracy cannot be
    // repaired this way (compression is already clipped to the accuracy
    // floor), so pure accuracy violations mean the user is infeasible on both
    // branches.
    for (int round = 0; round < sc.num_users(); ++round) {
        int worst_user = -1;
        double worst_amount = 0.0;
        for (const auto& v : check_feasible(sc, par, st)) {
            if (v.user < 0 || st.offload(v.user) < 0.5) continue;
            if (v.constraint != "C6" && v.constraint != "C7") continue;
            const auto& task = par.task_types[sc.task_type[v.user]];
            const bool local_delay_ok =
                local_delay(par, sc.volume[v.user]) <= task.delay_limit * (1.0 + 1e-9);
            const bool local_accuracy_ok =
                accuracy(par, sc.volume[v.user]) >= task.accuracy_limit * (1.0 - 1e-9);
            if (!local_delay_ok || !local_accuracy_ok) continue;
            if (worst_user < 0 || v.amount > worst_amount ||
                (v.amount == worst_amount && v.user < worst_user)) {
                worst_user = v.user;
                worst_amount = v.amount;
            }
        }
        if (worst_user < 0) break;
        release_user(st, worst_user);
        out.flipped.push_back(worst_user);
        st.capacity = split_capacity(st);
        ++out.repair_rounds;
    }

    // whoever still breaks a per-user limit is infeasible on both branches
    for (const auto& v : check_feasible(sc, par, st))
        if (v.user >= 0 && (v.constraint == "C6" || v.constraint == "C7"))
            infeasible.insert(v.user);

    std::sort(out.flipped.begin(), out.flipped.end());
    out.flipped.erase(std::unique(out.flipped.begin(), out.flipped.end()), out.flipped.end());
    out.infeasible.assign(infeasible.begin(), infeasible.end());
    out.state = std::move(st);
    return out;
}

RunResult run_joint_optimizer(const Scenario& sc, const SystemParams& par,
                              const OuterConfig& cfg) {
    par.validate();
    cfg.validate();

    RunResult run;
    AllocationState st = initial_state(sc, par);
    StateScore cur = score_state(sc, par, st);
    run.trace.initial_objective = cur.objective;
    double prev_objective = cur.objective;

    RoundOutcome best;
    StateScore best_score;
    bool have_best = false;

    for (int q = 0; q < cfg.max_outer; ++q) {
        OuterIterate it;
        const double t_start = now_ms();

        SubcarrierConfig c1;
        c1.solver = cfg.solver;
        c1.tol = cfg.tol_shares;
        SubcarrierResult s1 = optimize_subcarriers(sc, par, st, c1);
        it.share_rounds = s1.rounds;
        it.share_status = s1.last_status;
        {
            AllocationState cand = st;
            cand.assign = s1.assign;
            StateScore cs = score_state(sc, par, cand);
            if ((it.share_accepted = better(cs, cur))) {
                st = std::move(cand);
                cur = cs;
            }
        }

        CapacityAllocResult s2 = allocate_capacity(sc, par, st);
        it.strained_cells = static_cast<int>(s2.strained_cells.size());
        it.flagged_users = static_cast<int>(s2.delay_infeasible.size());
        {
            AllocationState cand = st;
            cand.capacity = s2.capacity;
            StateScore cs = score_state(sc, par, cand);
            // The exact split is myopic when capacity is abundant: it
            // concentrates cycles on currently-heavy users and narrows the
            // offload block's room to move. The plain equal split competes as
            // a second candidate; the better one faces the guard.
            AllocationState even = st;
            even.capacity = average_capacity_split(sc, par, st);
            StateScore es = score_state(sc, par, even);
            if (better(es, cs)) {
                cand = std::move(even);
                cs = es;
            }
            if ((it.capacity_accepted = better(cs, cur))) {
                st = std::move(cand);
                cur = cs;
            }
        }

        OffloadConfig c3;
        c3.solver = cfg.solver;
        c3.tol = cfg.tol_offload;
        OffloadResult s3 = optimize_offload(sc, par, st, c3);
        it.offload_rounds = s3.rounds;
        {
            AllocationState cand = st;
            cand.offload = s3.offload;
            cand.compression = s3.compression;
            StateScore cs = score_state(sc, par, cand);
            if ((it.offload_accepted = better(cs, cur))) {
                st = std::move(cand);
                cur = cs;
            }
        }

        it.objective = cur.objective;
        it.violation = cur.violation;

        // snap-and-repair this iterate; the rounded quality is not monotone
        // along the relaxed trajectory, so the best candidate is kept
        RoundOutcome probe = round_and_repair(sc, par, st);
        const StateScore probe_score = score_state(sc, par, probe.state);
        it.rounded_objective = probe_score.objective;
        if (!have_best || better(probe_score, best_score)) {
            best = std::move(probe);
            best_score = probe_score;
            have_best = true;
        }

        it.wall_ms = now_ms() - t_start;
        run.trace.iterations.push_back(it);

        if (std::abs(cur.objective - prev_objective) <= cfg.tol) {
            run.trace.converged = true;
            break;
        }
        prev_objective = cur.objective;
    }
    run.trace.relaxed_objective = cur.objective;

    RoundOutcome rounded = std::move(best);
    run.state = std::move(rounded.state);
    run.trace.repair_rounds = rounded.repair_rounds;
    run.trace.flipped_local = rounded.flipped;
    run.infeasible_users = rounded.infeasible;
    run.report = system_utility(sc, par, run.state);
    run.trace.rounded_objective = run.report.total;
    run.all_infeasible =
        static_cast<int>(run.infeasible_users.size()) == sc.num_users();

    const std::set<int> flagged(run.infeasible_users.begin(), run.infeasible_users.end());
    for (const auto& v : check_feasible(sc, par, run.state))
        if (v.user < 0 || !flagged.count(v.user)) run.violations.push_back(v);
    return run;
}

std::string serialize_run(const Scenario& sc, const SystemParams& par, const OuterConfig& cfg,
                          const RunResult& run) {
    KvFile kv;
    kv.set_int("format_version", 1);
    kv.set_int("seed", static_cast<long long>(sc.seed));
    kv.set_int("users", sc.num_users());
    kv.set_int("stations", sc.num_sbs());
    kv.set_double("bandwidth", par.bandwidth);
    kv.set_int("subcarriers", par.num_subcarriers);
    kv.set_double("mec_capacity", par.mec_capacity);
    kv.set_double("weight", par.weight);
    kv.set_double("outer_tol", cfg.tol);
    kv.set_int("max_outer", cfg.max_outer);
    kv.set_double("initial_objective", run.trace.initial_objective);
    kv.set_double("relaxed_objective", run.trace.relaxed_objective);
    kv.set_double("rounded_objective", run.trace.rounded_objective);
    kv.set_int("outer_iterations", static_cast<long long>(run.trace.iterations.size()));
    kv.set_int("converged", run.trace.converged ? 1 : 0);
    kv.set_int("repair_rounds", run.trace.repair_rounds);
    kv.set_ints("flipped_local", run.trace.flipped_local);
    kv.set_ints("infeasible_users", run.infeasible_users);
    kv.set_int("residual_violations", static_cast<long long>(run.violations.size()));

    std::vector<double> trace;
    trace.reserve(run.trace.iterations.size());
    for (const auto& it : run.trace.iterations) trace.push_back(it.objective);
    kv.set_doubles("objective_trace", trace);

    std::vector<double> offload(run.state.offload.data(),
                                run.state.offload.data() + run.state.offload.size());
    std::vector<double> compression(run.state.compression.data(),
                                    run.state.compression.data() + run.state.compression.size());
    std::vector<double> capacity(run.state.capacity.data(),
                                 run.state.capacity.data() + run.state.capacity.size());
    kv.set_doubles("state_offload", offload);
    kv.set_doubles("state_compression", compression);
    kv.set_doubles("state_capacity", capacity);
    for (int u = 0; u < sc.num_users(); ++u) {
        std::vector<int> owned;
        for (int n = 0; n < par.num_subcarriers; ++n)
            if (run.state.assign(u, n) >= 0.5) owned.push_back(n);
        kv.set_ints("state_subcarriers_user" + std::to_string(u), owned);
    }

    std::ostringstream out;
    out << kv.serialize();
    out << "# per-user report\n" << report_csv(run.report);
    return out.str();
}

}  // namespace mecsim
