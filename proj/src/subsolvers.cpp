#include "mecsim/subsolvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace mecsim {

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

double bilinear_minorant(double rho, double l, double rho0, double l0) {
    const double c = rho0 + l0;
    const double diff = rho - l;
    return 0.5 * c * (rho + l) - 0.25 * c * c - 0.25 * diff * diff;
}

double log_upper_tangent(double value, double anchor) {
    return std::log(anchor) + (value - anchor) / anchor;
}

double rate_lower_bound(double snr, double interference, double anchor) {
    const double tangent = (std::log1p(anchor) + (interference - anchor) / (1.0 + anchor)) / kLn2;
    return std::log2(snr + 1.0 + interference) - tangent;
}

// ---------------------------------------------------------------------------
// block 1: subcarrier shares
// ---------------------------------------------------------------------------

namespace {

// Per-user slice of the share program. Variables for user slot i live at
// base..base+3N: shares rho(n), per-subcarrier efficiencies l(n), their
// products S(n), then the total w. Interference variables (noise-normalized)
// come after all user slices, one block of N per cell that both hosts an
// included user and sees at least one outside transmitter.
struct ShareBlock {
    int user = -1;
    int base = 0;
    double snr = 0.0;    // tx_power * gain / noise at the home station
    double lmax = 0.0;   // log2(1 + snr), per-subcarrier ceiling
    double floor = 0.0;  // minimum total efficiency to stay inside the delay limit
};

struct ShareLayout {
    std::vector<ShareBlock> blocks;
    std::vector<int> ivar_base;  // per cell, -1 when absent
    int subcarriers = 0;
    int total_vars = 0;

    int rho(int i, int n) const { return blocks[i].base + n; }
    int eff(int i, int n) const { return blocks[i].base + subcarriers + n; }
    int prod(int i, int n) const { return blocks[i].base + 2 * subcarriers + n; }
    int tot(int i) const { return blocks[i].base + 3 * subcarriers; }
};

Eigen::MatrixXd normalized_interference(const Scenario& sc, const SystemParams& par,
                                        const ShareLayout& lay, const Eigen::MatrixXd& rho) {
    const int K = sc.num_sbs();
    const int N = lay.subcarriers;
    Eigen::MatrixXd field = Eigen::MatrixXd::Zero(K, N);
    for (size_t i = 0; i < lay.blocks.size(); ++i) {
        const int u = lay.blocks[i].user;
        const int home = sc.assoc[u];
        for (int k = 0; k < K; ++k) {
            if (k == home) continue;
            const double coef = par.tx_power * sc.gain(u, k) / par.noise_power;
            if (coef <= 0.0) continue;
            for (int n = 0; n < N; ++n) field(k, n) += coef * rho(i, n);
        }
    }
    return field;
}

ConvexProgram build_share_program(const Scenario& sc, const SystemParams& par,
                                  const ShareLayout& lay, const Eigen::MatrixXd& rho0,
                                  const Eigen::MatrixXd& eff0, const Eigen::MatrixXd& field0,
                                  bool with_floors) {
    const int N = lay.subcarriers;
    const int K = sc.num_sbs();
    const int ni = static_cast<int>(lay.blocks.size());

    ConvexProgram prog;
    prog.init(lay.total_vars);

    for (int i = 0; i < ni; ++i) {
        const auto& b = lay.blocks[i];
        for (int n = 0; n < N; ++n) {
            prog.lower(lay.rho(i, n)) = 0.0;
            prog.upper(lay.rho(i, n)) = 1.0;
            prog.lower(lay.eff(i, n)) = 0.0;
            prog.upper(lay.eff(i, n)) = b.lmax;
            prog.lower(lay.prod(i, n)) = 0.0;
            prog.upper(lay.prod(i, n)) = b.lmax;
        }
        prog.lower(lay.tot(i)) = 1e-12;
        prog.upper(lay.tot(i)) = b.lmax * N + 1.0;

        Term obj;
        obj.vars = {lay.tot(i)};
        obj.eval = [idx = lay.tot(i)](const double* z, double* g, double* h) -> double {
            const double w = z[idx];
            if (w <= 0.0) return std::numeric_limits<double>::quiet_NaN();
            if (g) g[0] += -1.0 / w;
            if (h) h[0] += 1.0 / (w * w);
            return -std::log(w);
        };
        prog.objective.push_back(std::move(obj));

        if (with_floors && b.floor > 0.0) {
            Term fl;
            fl.vars = {lay.tot(i)};
            fl.eval = [idx = lay.tot(i), floor = b.floor](const double* z, double* g,
                                                          double*) -> double {
                if (g) g[0] += -1.0;
                return floor - z[idx];
            };
            prog.inequalities.push_back(std::move(fl));
        }
    }

    // product surrogate: S <= minorant(rho, l) around (rho0, l0)
    for (int i = 0; i < ni; ++i) {
        for (int n = 0; n < N; ++n) {
            const int si = lay.prod(i, n);
            const int ri = lay.rho(i, n);
            const int li = lay.eff(i, n);
            const double c = rho0(i, n) + eff0(i, n);
            Term t;
            t.vars = {si, ri, li};
            t.eval = [si, ri, li, c](const double* z, double* g, double* h) -> double {
                const double diff = z[ri] - z[li];
                if (g) {
                    g[0] += 1.0;
                    g[1] += -0.5 * c + 0.5 * diff;
                    g[2] += -0.5 * c - 0.5 * diff;
                }
                if (h) {
                    h[4] += 0.5;   // (rho, rho)
                    h[5] += -0.5;  // (rho, l)
                    h[7] += -0.5;  // (l, rho)
                    h[8] += 0.5;   // (l, l)
                }
                return z[si] - 0.5 * c * (z[ri] + z[li]) + 0.25 * c * c + 0.25 * diff * diff;
            };
            prog.inequalities.push_back(std::move(t));
        }
    }

    // efficiency cap against the interference seen at the home station
    for (int i = 0; i < ni; ++i) {
        const int home = sc.assoc[lay.blocks[i].user];
        if (lay.ivar_base[home] < 0) continue;
        const double snr = lay.blocks[i].snr;
        for (int n = 0; n < N; ++n) {
            const int li = lay.eff(i, n);
            const int ii = lay.ivar_base[home] + n;
            const double i0 = field0(home, n);
            Term t;
            t.vars = {li, ii};
            t.eval = [li, ii, snr, i0](const double* z, double* g, double* h) -> double {
                const double tot = snr + 1.0 + z[ii];
                if (tot <= 0.0) return std::numeric_limits<double>::quiet_NaN();
                const double tangent =
                    (std::log1p(i0) + (z[ii] - i0) / (1.0 + i0)) / kLn2;
                if (g) {
                    g[0] += 1.0;
                    g[1] += -1.0 / (tot * kLn2) + 1.0 / ((1.0 + i0) * kLn2);
                }
                if (h) h[3] += 1.0 / (tot * tot * kLn2);
                return z[li] - std::log2(tot) + tangent;
            };
            prog.inequalities.push_back(std::move(t));
        }
    }

    // one transmitter budget per home cell and subcarrier
    for (int k = 0; k < K; ++k) {
        std::vector<int> members;
        for (int i = 0; i < ni; ++i)
            if (sc.assoc[lay.blocks[i].user] == k) members.push_back(i);
        if (members.size() < 2) continue;  // the [0,1] box already covers one user
        for (int n = 0; n < N; ++n) {
            Term t;
            std::vector<int> vars;
            vars.reserve(members.size());
            for (int i : members) vars.push_back(lay.rho(i, n));
            const int m = static_cast<int>(vars.size());
            t.vars = vars;
            t.eval = [vars, m](const double* z, double* g, double*) -> double {
                double s = -1.0;
                for (int j = 0; j < m; ++j) s += z[vars[j]];
                if (g)
                    for (int j = 0; j < m; ++j) g[j] += 1.0;
                return s;
            };
            prog.inequalities.push_back(std::move(t));
        }
    }

    // equalities: w = sum S per user; I = external share-weighted powers
    std::vector<Eigen::Triplet<double>> trip;
    int rows = ni;
    for (int k = 0; k < K; ++k)
        if (lay.ivar_base[k] >= 0) rows += N;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
    int row = 0;
    for (int i = 0; i < ni; ++i, ++row) {
        trip.emplace_back(row, lay.tot(i), 1.0);
        for (int n = 0; n < N; ++n) trip.emplace_back(row, lay.prod(i, n), -1.0);
    }
    for (int k = 0; k < K; ++k) {
        if (lay.ivar_base[k] < 0) continue;
        for (int n = 0; n < N; ++n, ++row) {
            trip.emplace_back(row, lay.ivar_base[k] + n, 1.0);
            for (int i = 0; i < ni; ++i) {
                const int u = lay.blocks[i].user;
                if (sc.assoc[u] == k) continue;
                const double coef = par.tx_power * sc.gain(u, k) / par.noise_power;
                if (coef <= 0.0) continue;
                trip.emplace_back(row, lay.rho(i, n), -coef);
            }
        }
    }
    Eigen::SparseMatrix<double> a(rows, lay.total_vars);
    a.setFromTriplets(trip.begin(), trip.end());
    prog.eq_lhs = std::move(a);
    prog.eq_rhs = std::move(rhs);
    return prog;
}

}  // namespace

SubcarrierResult optimize_subcarriers(const Scenario& sc, const SystemParams& par,
                                      const AllocationState& state,
                                      const SubcarrierConfig& cfg) {
    const int U = sc.num_users();
    const int N = par.num_subcarriers;
    const int K = sc.num_sbs();

    SubcarrierResult out;
    out.assign = Eigen::MatrixXd::Zero(U, N);

    ShareLayout lay;
    lay.subcarriers = N;
    for (int u = 0; u < U; ++u) {
        const double x = state.offload(u);
        if (x <= cfg.include_threshold) continue;
        const int home = sc.assoc[u];
        const double snr = par.tx_power * sc.gain(u, home) / par.noise_power;
        if (snr <= 0.0) {
            out.dropped.push_back(u);
            continue;
        }
        const auto& task = par.task_types[sc.task_type[u]];
        const double eps = std::max(1.0, state.compression(u));
        const double b_units = sc.volume[u] / eps;
        double slack = task.delay_limit - (1.0 - x) * local_delay(par, sc.volume[u]);
        if (state.capacity(u) > 0.0)
            slack -= x * mec_delay(par, b_units, state.capacity(u), task.parallelism);
        else
            slack = -1.0;
        if (slack <= 0.0) {
            out.dropped.push_back(u);
            continue;
        }
        ShareBlock b;
        b.user = u;
        b.snr = snr;
        b.lmax = std::log2(1.0 + snr);
        b.floor = x * b_units * par.bits_per_unit * N / (par.bandwidth * slack);
        if (b.floor >= b.lmax * N) {
            out.dropped.push_back(u);
            continue;
        }
        lay.blocks.push_back(b);
        out.included.push_back(u);
    }

    const int ni = static_cast<int>(lay.blocks.size());
    if (ni == 0) {
        out.converged = true;
        return out;
    }
    const int per = 3 * N + 1;
    for (int i = 0; i < ni; ++i) lay.blocks[i].base = i * per;
    std::vector<int> incl_in_cell(K, 0);
    for (const auto& b : lay.blocks) ++incl_in_cell[sc.assoc[b.user]];
    lay.ivar_base.assign(K, -1);
    lay.total_vars = ni * per;
    for (int k = 0; k < K; ++k) {
        if (incl_in_cell[k] > 0 && ni - incl_in_cell[k] > 0) {
            lay.ivar_base[k] = lay.total_vars;
            lay.total_vars += N;
        }
    }

    // starting shares: current state clamped strictly inside the box, then
    // scaled so each cell-subcarrier budget keeps headroom
    Eigen::MatrixXd rho(ni, N);
    for (int i = 0; i < ni; ++i)
        for (int n = 0; n < N; ++n)
            rho(i, n) = std::min(1.0 - 1e-3, std::max(1e-3, state.assign(lay.blocks[i].user, n)));
    for (int k = 0; k < K; ++k) {
        for (int n = 0; n < N; ++n) {
            double s = 0.0;
            for (int i = 0; i < ni; ++i)
                if (sc.assoc[lay.blocks[i].user] == k) s += rho(i, n);
            if (s > 0.999) {
                const double scale = 0.999 / s;
                for (int i = 0; i < ni; ++i)
                    if (sc.assoc[lay.blocks[i].user] == k) rho(i, n) *= scale;
            }
        }
    }

    Eigen::MatrixXd field = normalized_interference(sc, par, lay, rho);
    Eigen::MatrixXd eff(ni, N);
    for (int i = 0; i < ni; ++i) {
        const int home = sc.assoc[lay.blocks[i].user];
        for (int n = 0; n < N; ++n) {
            const double truth = std::log2(lay.blocks[i].snr + 1.0 + field(home, n)) -
                                 std::log2(1.0 + field(home, n));
            eff(i, n) = 0.999 * truth;
        }
    }

    auto pack = [&](Eigen::VectorXd& z) {
        z.resize(lay.total_vars);
        for (int i = 0; i < ni; ++i) {
            double w = 0.0;
            for (int n = 0; n < N; ++n) {
                const double s = 0.999 * rho(i, n) * eff(i, n);
                z(lay.rho(i, n)) = rho(i, n);
                z(lay.eff(i, n)) = eff(i, n);
                z(lay.prod(i, n)) = s;
                w += s;
            }
            z(lay.tot(i)) = w;
        }
        for (int k = 0; k < K; ++k) {
            if (lay.ivar_base[k] < 0) continue;
            for (int n = 0; n < N; ++n) {
                double v = 0.0;
                for (int i = 0; i < ni; ++i) {
                    const int u = lay.blocks[i].user;
                    if (sc.assoc[u] == k) continue;
                    const double coef = par.tx_power * sc.gain(u, k) / par.noise_power;
                    if (coef > 0.0) v += coef * z(lay.rho(i, n));
                }
                z(lay.ivar_base[k] + n) = v;
            }
        }
    };

    Eigen::VectorXd z;
    pack(z);

    // Between rounds the carried point must be strictly feasible for the new
    // surrogates and exactly on the coupling equalities. Rebuild the dependent
    // coordinates from the shares: pull l a hair under the current true
    // efficiency (the new tangent is exact at the anchor), S under rho*l, then
    // recompute the totals and interference variables from scratch.
    auto repack = [&](Eigen::VectorXd& zz) {
        for (int i = 0; i < ni; ++i) {
            const int home = sc.assoc[lay.blocks[i].user];
            double w = 0.0;
            for (int n = 0; n < N; ++n) {
                const double iv = field(home, n);
                const double truth = std::log2(lay.blocks[i].snr + 1.0 + iv) -
                                     std::log2(1.0 + iv);
                const double l = std::min(eff(i, n), (1.0 - 1e-9) * truth);
                eff(i, n) = l;
                zz(lay.eff(i, n)) = l;
                const double s =
                    std::min(zz(lay.prod(i, n)), (1.0 - 1e-9) * rho(i, n) * l);
                zz(lay.prod(i, n)) = s;
                w += s;
            }
            zz(lay.tot(i)) = w;
        }
        for (int k = 0; k < K; ++k) {
            if (lay.ivar_base[k] < 0) continue;
            for (int n = 0; n < N; ++n) {
                double v = 0.0;
                for (int i = 0; i < ni; ++i) {
                    const int u = lay.blocks[i].user;
                    if (sc.assoc[u] == k) continue;
                    const double coef = par.tx_power * sc.gain(u, k) / par.noise_power;
                    if (coef > 0.0) v += coef * zz(lay.rho(i, n));
                }
                zz(lay.ivar_base[k] + n) = v;
            }
        }
    };

    bool with_floors = true;
    double prev_obj = std::numeric_limits<double>::quiet_NaN();
    for (int round = 0; round < cfg.max_rounds; ++round) {
        if (round > 0) repack(z);
        ConvexProgram prog = build_share_program(sc, par, lay, rho, eff, field, with_floors);
        SolverSettings settings = cfg.solver;
        // warm rounds start near the optimum, so skip the low-weight barrier
        // stages they no longer need
        if (round == 1) settings.t0 = std::max(settings.t0, 1e2);
        if (round >= 2) settings.t0 = std::max(settings.t0, 1e4);
        Solution sol = minimize(prog, z, settings);
        if (round == 0 && with_floors &&
            (sol.status == SolveStatus::infeasible || sol.status == SolveStatus::numeric_error)) {
            // the per-user rate floors clash; retry without them and let the
            // outer loop repair the delay violations
            with_floors = false;
            out.floors_relaxed = true;
            prog = build_share_program(sc, par, lay, rho, eff, field, false);
            sol = minimize(prog, z, settings);
        }
        out.last_status = sol.status;
        if (sol.status == SolveStatus::infeasible || sol.status == SolveStatus::numeric_error)
            break;  // keep the previous iterate

        z = sol.point;
        if (std::getenv("MECSIM_DEBUG_SHARES")) {
            double worst_prod = -1e30, worst_eff = -1e30, worst_eq = 0.0, worst_ivar = 0.0;
            Eigen::MatrixXd rho_now(ni, N);
            for (int i = 0; i < ni; ++i)
                for (int n = 0; n < N; ++n) rho_now(i, n) = z(lay.rho(i, n));
            Eigen::MatrixXd truef = normalized_interference(sc, par, lay, rho_now);
            for (int i = 0; i < ni; ++i) {
                const int home = sc.assoc[lay.blocks[i].user];
                double w_sum = 0.0;
                for (int n = 0; n < N; ++n) {
                    const double s = z(lay.prod(i, n));
                    const double r = z(lay.rho(i, n));
                    const double l = z(lay.eff(i, n));
                    w_sum += s;
                    worst_prod = std::max(worst_prod, s - r * l);
                    double iv = truef(home, n);
                    if (lay.ivar_base[home] >= 0) {
                        worst_ivar = std::max(worst_ivar,
                                              std::abs(z(lay.ivar_base[home] + n) - iv));
                        iv = z(lay.ivar_base[home] + n);
                    }
                    const double true_eff = std::log2(lay.blocks[i].snr + 1.0 + iv) -
                                            std::log2(1.0 + iv);
                    worst_eff = std::max(worst_eff, l - true_eff);
                }
                worst_eq = std::max(worst_eq, std::abs(z(lay.tot(i)) - w_sum));
            }
            std::printf("  [dbg] round status=%s steps=%d stages=%d gap=%.2e "
                        "worst S-rho*l=%.3e worst l-eff=%.3e worst w-sumS=%.3e "
                        "worst ivar drift=%.3e\n",
                        to_string(sol.status), sol.newton_steps, sol.barrier_stages,
                        sol.kkt_residual, worst_prod, worst_eff, worst_eq, worst_ivar);
        }
        for (int i = 0; i < ni; ++i)
            for (int n = 0; n < N; ++n) {
                rho(i, n) = z(lay.rho(i, n));
                eff(i, n) = z(lay.eff(i, n));
            }
        field = normalized_interference(sc, par, lay, rho);
        double obj = 0.0;
        for (int i = 0; i < ni; ++i) obj += std::log(z(lay.tot(i)));
        out.trace.push_back(obj);
        out.objective = obj;
        out.rounds = round + 1;
        if (round > 0 && std::abs(obj - prev_obj) <= cfg.tol) {
            out.converged = true;
            break;
        }
        prev_obj = obj;
    }

    for (int i = 0; i < ni; ++i)
        for (int n = 0; n < N; ++n) out.assign(lay.blocks[i].user, n) = rho(i, n);
    return out;
}

Eigen::MatrixXd round_subcarriers(const Scenario& sc, const Eigen::MatrixXd& assign,
                                  double threshold) {
    const int N = static_cast<int>(assign.cols());
    Eigen::MatrixXd snapped = Eigen::MatrixXd::Zero(assign.rows(), N);
    for (int k = 0; k < sc.num_sbs(); ++k) {
        for (int n = 0; n < N; ++n) {
            int winner = -1;
            double best = 0.0;
            for (int u : sc.cell_users[k]) {
                const double v = assign(u, n);
                if (v > best) {
                    best = v;
                    winner = u;
                }
            }
            if (winner >= 0 && best >= threshold) snapped(winner, n) = 1.0;
        }
    }
    return snapped;
}

// ---------------------------------------------------------------------------
// block 2: computing capacity
// ---------------------------------------------------------------------------

CapacityAllocResult allocate_capacity(const Scenario& sc, const SystemParams& par,
                                      const AllocationState& state) {
    const int U = sc.num_users();
    CapacityAllocResult out;
    out.capacity = Eigen::VectorXd::Zero(U);

    const Eigen::VectorXd rates = uplink_rates(sc, par, state);
    for (int k = 0; k < sc.num_sbs(); ++k) {
        std::vector<int> users;
        for (int u : sc.cell_users[k])
            if (state.offload(u) > 1e-6) users.push_back(u);
        if (users.empty()) continue;

        const int m = static_cast<int>(users.size());
        Eigen::VectorXd costs(m), offsets(m), floors(m);
        std::vector<char> servable(m, 1);
        for (int j = 0; j < m; ++j) {
            const int u = users[j];
            const double x = state.offload(u);
            const auto& task = par.task_types[sc.task_type[u]];
            const double eps = std::max(1.0, state.compression(u));
            const double b_units = sc.volume[u] / eps;
            costs(j) = x * par.cycles_per_unit * b_units *
                       degradation_multiplier(par, task.parallelism);
            double off = (1.0 - x) * local_delay(par, sc.volume[u]);
            if (rates(u) > 0.0)
                off += x * b_units * par.bits_per_unit / rates(u);
            else
                off += kUnservedDelay;
            offsets(j) = off;
            if (task.delay_limit > off) {
                floors(j) = costs(j) / (task.delay_limit - off);
            } else {
                floors(j) = 0.0;
                servable[j] = 0;
                out.delay_infeasible.push_back(u);
            }
        }

        CapacityResult split = bisect_capacity(costs, offsets, floors, par.mec_capacity);
        if (!split.feasible) {
            out.strained_cells.push_back(k);
            split = bisect_capacity(costs, offsets, Eigen::VectorXd::Zero(m), par.mec_capacity);
        }
        for (int j = 0; j < m; ++j) {
            out.capacity(users[j]) = split.f(j);
            if (servable[j] && split.f(j) > 0.0)
                out.objective += std::log(offsets(j) + costs(j) / split.f(j));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// block 3: offload fraction and compression
// ---------------------------------------------------------------------------

namespace {

struct OffloadContext {
    double local = 0.0;     // delay when computed on the device
    double unit_off = 0.0;  // offloaded delay per unit of kept volume fraction
    double limit = 0.0;     // delay limit
    double volume = 0.0;
    double keep_min = 0.0;  // smallest kept fraction that meets the accuracy floor
    double fit_p, fit_q, fit_r;
};

// Delay of the relaxed decision. keep is the blended fraction of the original
// volume still carried across both branches, so the share that rides the
// uplink is keep - (1 - x) and the delay is affine in (x, keep).
double blend_delay(const OffloadContext& c, double x, double keep) {
    return c.local * (1.0 - x) + c.unit_off * (keep - 1.0 + x);
}

double model_accuracy(const OffloadContext& c, double keep) {
    return c.fit_p - c.fit_q * std::pow(c.volume * keep, -c.fit_r);
}

// One user's joint (x, keep) refinement. keep is the blended kept fraction,
// so the delay and the accuracy are both exact in these variables; only the
// log of the delay needs a tangent cut. Variables: 0 = x, 1 = keep,
// 2 = delay-log epigraph. When pin_offload is set, x is fixed at 1 and the
// program shrinks to (keep, epigraph).
struct UserSolve {
    double x = 0.0;
    double keep = 1.0;
    double objective = 0.0;
    bool converged = false;
    int rounds = 0;
};

UserSolve solve_user(const OffloadContext& c, double x_start, double keep_start,
                     bool pin_offload, const OffloadConfig& cfg) {
    const bool has_x = !pin_offload;
    const int xi = 0;
    const int ki = has_x ? 1 : 0;
    const int vi = has_x ? 2 : 1;
    const int nvars = has_x ? 3 : 2;

    const double keep_lo = std::max(c.keep_min, 1e-4);
    const double band = 1.0 - keep_lo;
    double keep0 = keep_start;
    if (band <= 1e-9) {
        keep0 = 0.5 * (keep_lo + 1.0);
    } else {
        keep0 = std::min(1.0 - 0.01 * band, std::max(keep_lo + 0.01 * band, keep0));
    }
    double x0 = pin_offload ? 1.0 : std::min(1.0 - 1e-3, std::max(1e-3, x_start));
    if (has_x && keep0 + x0 < 1.0 + 1e-6)
        x0 = std::min(1.0 - 1e-3, 1.0 + 2e-6 - keep0);

    auto true_objective = [&](double x, double keep) {
        return std::log(blend_delay(c, x, keep)) - std::log(model_accuracy(c, keep));
    };

    UserSolve res;
    res.x = x0;
    res.keep = keep0;

    double prev = true_objective(x0, keep0);
    res.objective = prev;

    for (int round = 0; round < cfg.max_rounds; ++round) {
        // re-anchor the product majorant and the log tangent at the current
        // point: the surrogate is tight here and an upper bound everywhere,
        // so each exact round can only lower the true objective
        const double d = res.keep - res.x;
        const double t0 = blend_delay(c, res.x, res.keep);
        const bool anchor_fits = t0 <= c.limit * (1.0 + 1e-9);

        ConvexProgram prog;
        prog.init(nvars);
        if (has_x) {
            prog.lower(xi) = 0.0;
            prog.upper(xi) = 1.0;
        }
        prog.lower(ki) = keep_lo;
        prog.upper(ki) = 1.0;

        Term lin;
        lin.vars = {vi};
        lin.eval = [vi](const double* z, double* g, double*) -> double {
            if (g) g[0] += 1.0;
            return z[vi];
        };
        prog.objective.push_back(std::move(lin));

        Term acc;
        acc.vars = {ki};
        acc.eval = [ki, c](const double* z, double* g, double* h) -> double {
            const double alpha = c.volume * z[ki];
            if (alpha <= 0.0) return std::numeric_limits<double>::quiet_NaN();
            const double pw = std::pow(alpha, -c.fit_r);
            const double y = c.fit_p - c.fit_q * pw;
            if (y <= 0.0) return std::numeric_limits<double>::quiet_NaN();
            const double dy = c.fit_q * c.fit_r * pw / z[ki];
            const double d2y = -c.fit_q * c.fit_r * (c.fit_r + 1.0) * pw / (z[ki] * z[ki]);
            if (g) g[0] += -dy / y;
            if (h) h[0] += (dy * dy - d2y * y) / (y * y);
            return -std::log(y);
        };
        prog.objective.push_back(std::move(acc));

        // delay at the majorant for (x, keep); exact affine when x is pinned
        const auto maj_value = [c, d](double x, double keep) {
            const double s = keep + x;
            return c.local * (1.0 - x) +
                   c.unit_off * (0.25 * (s * s + d * d) - 0.5 * d * (keep - x));
        };

        Term limit;
        if (has_x) {
            limit.vars = {xi, ki};
            limit.eval = [c, d, maj_value](const double* z, double* g, double* h) -> double {
                const double s = z[1] + z[0];
                if (g) {
                    g[0] += -c.local + 0.5 * c.unit_off * (s + d);
                    g[1] += 0.5 * c.unit_off * (s - d);
                }
                if (h) {
                    const double q = 0.5 * c.unit_off;
                    h[0] += q;
                    h[1] += q;
                    h[2] += q;
                    h[3] += q;
                }
                return maj_value(z[0], z[1]) - c.limit;
            };
        } else {
            limit.vars = {ki};
            limit.eval = [c](const double* z, double* g, double*) -> double {
                if (g) g[0] += c.unit_off;
                return c.unit_off * z[0] - c.limit;
            };
        }
        prog.inequalities.push_back(std::move(limit));

        if (has_x) {
            Term tie;
            tie.vars = {xi, ki};
            tie.eval = [](const double* z, double* g, double*) -> double {
                if (g) {
                    g[0] += -1.0;
                    g[1] += -1.0;
                }
                return 1.0 - z[0] - z[1];
            };
            prog.inequalities.push_back(std::move(tie));
        }

        Term cut;
        if (has_x) {
            cut.vars = {xi, ki, vi};
            cut.eval = [c, d, t0, maj_value](const double* z, double* g, double* h) -> double {
                const double s = z[1] + z[0];
                if (g) {
                    g[0] += (-c.local + 0.5 * c.unit_off * (s + d)) / t0;
                    g[1] += 0.5 * c.unit_off * (s - d) / t0;
                    g[2] += -1.0;
                }
                if (h) {
                    const double q = 0.5 * c.unit_off / t0;
                    h[0] += q;
                    h[1] += q;
                    h[3] += q;
                    h[4] += q;
                }
                return std::log(t0) + (maj_value(z[0], z[1]) - t0) / t0 - z[2];
            };
        } else {
            cut.vars = {ki, vi};
            cut.eval = [c, t0](const double* z, double* g, double*) -> double {
                if (g) {
                    g[0] += c.unit_off / t0;
                    g[1] += -1.0;
                }
                return std::log(t0) + (c.unit_off * z[0] - t0) / t0 - z[1];
            };
        }
        prog.inequalities.push_back(std::move(cut));

        Eigen::VectorXd z0(nvars);
        const double v0 = std::log(t0) + 1e-3;
        if (has_x) z0 << res.x, res.keep, v0;
        else z0 << res.keep, v0;

        SolverSettings settings = cfg.solver;
        settings.force_dense = true;
        Solution sol = minimize(prog, z0, settings);
        if (sol.status == SolveStatus::infeasible || sol.status == SolveStatus::numeric_error)
            break;

        const double x_new = has_x ? sol.point(xi) : 1.0;
        const double keep_new = sol.point(ki);
        const double obj = true_objective(x_new, keep_new);
        // a solved round meets the delay limit (the majorant bounds the true
        // delay), so when the anchor was violating, take the repair no matter
        // the objective; otherwise only a barrier-exit wobble can push the
        // objective up, and that round is dropped
        if (anchor_fits && obj > prev + 1e-9) break;
        res.x = x_new;
        res.keep = keep_new;
        res.rounds = round + 1;
        res.objective = obj;
        if (anchor_fits && std::abs(obj - prev) <= cfg.tol) {
            res.converged = true;
            break;
        }
        prev = obj;
    }
    return res;
}

}  // namespace

OffloadResult optimize_offload(const Scenario& sc, const SystemParams& par,
                               const AllocationState& state, const OffloadConfig& cfg) {
    const int U = sc.num_users();
    OffloadResult out;
    out.offload = Eigen::VectorXd::Zero(U);
    out.compression = Eigen::VectorXd::Ones(U);
    out.converged = true;

    const Eigen::VectorXd rates = uplink_rates(sc, par, state);
    for (int u = 0; u < U; ++u) {
        const auto& task = par.task_types[sc.task_type[u]];
        const double a = sc.volume[u];

        OffloadContext c;
        c.volume = a;
        c.limit = task.delay_limit;
        c.local = local_delay(par, a);
        c.fit_p = par.fit_p;
        c.fit_q = par.fit_q;
        c.fit_r = par.fit_r;

        const double alpha_min =
            std::pow(par.fit_q / (par.fit_p - task.accuracy_limit), 1.0 / par.fit_r);
        c.keep_min = alpha_min / a;

        if (c.keep_min > 1.0) {
            // even the raw volume misses the accuracy floor; no branch helps
            out.infeasible.push_back(u);
            continue;
        }

        const bool local_ok = c.local <= c.limit;
        const double f = state.capacity(u);
        bool offload_ok = rates(u) > 0.0 && f > 0.0;
        if (offload_ok) {
            c.unit_off = a * par.bits_per_unit / rates(u) +
                         par.cycles_per_unit * a *
                             degradation_multiplier(par, task.parallelism) / f;
            offload_ok = c.unit_off * c.keep_min <= c.limit;
        }

        if (!local_ok && !offload_ok) {
            out.infeasible.push_back(u);
            continue;
        }
        if (local_ok && !offload_ok) {
            out.pinned_local.push_back(u);
            out.offload(u) = 0.0;
            out.compression(u) = 1.0;
            out.objective += std::log(c.local) - std::log(model_accuracy(c, 1.0));
            continue;
        }

        const double keep_start = 1.0 / std::max(1.0, state.compression(u));
        UserSolve us = solve_user(c, state.offload(u), keep_start, !local_ok, cfg);
        out.offload(u) = us.x;
        out.compression(u) = 1.0 / us.keep;
        out.objective += us.objective;
        out.rounds = std::max(out.rounds, us.rounds);
        if (!us.converged) out.converged = false;
    }
    return out;
}

RoundedOffload round_offload(const Scenario& sc, const SystemParams& par,
                             const AllocationState& state) {
    const int U = sc.num_users();
    RoundedOffload out;
    out.offload = Eigen::VectorXd::Zero(U);
    out.compression = Eigen::VectorXd::Ones(U);

    const Eigen::VectorXd rates = uplink_rates(sc, par, state);
    for (int u = 0; u < U; ++u) {
        const auto& task = par.task_types[sc.task_type[u]];
        const double a = sc.volume[u];
        const double alpha_min =
            std::pow(par.fit_q / (par.fit_p - task.accuracy_limit), 1.0 / par.fit_r);

        bool off = state.offload(u) >= 0.5;
        const double hi = std::max(1.0, a / alpha_min);
        const double eps = std::min(hi, std::max(1.0, state.compression(u)));

        const double tol_t = task.delay_limit * (1.0 + 1e-9);
        const double tol_y = task.accuracy_limit * (1.0 - 1e-9);

        const bool local_ok =
            local_delay(par, a) <= tol_t && accuracy(par, a) >= tol_y;
        bool offload_ok = false;
        const double f = state.capacity(u);
        if (rates(u) > 0.0 && f > 0.0) {
            const double b_units = a / eps;
            const double t_off = b_units * par.bits_per_unit / rates(u) +
                                 mec_delay(par, b_units, f, task.parallelism);
            offload_ok = t_off <= tol_t && accuracy(par, b_units) >= tol_y;
        }

        if (off && !offload_ok && local_ok) {
            off = false;
            out.flipped.push_back(u);
        } else if (!off && !local_ok && offload_ok) {
            off = true;
            out.flipped.push_back(u);
        } else if ((off && !offload_ok) || (!off && !local_ok)) {
            out.infeasible.push_back(u);
        }
        out.offload(u) = off ? 1.0 : 0.0;
        out.compression(u) = eps;
    }
    return out;
}

}  // namespace mecsim
