#include "mecsim/cvxcore.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

namespace mecsim {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::numeric_error: return "numeric_error";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TraceRow {
    int stage;
    int iter;
    double objective;
    double decrement;
};

bool finite_lb(double v) { return v > -kUnbounded * 0.5; }
bool finite_ub(double v) { return v < kUnbounded * 0.5; }

// Barrier evaluation helpers over one ConvexProgram at a fixed weight t.
class Barrier {
public:
    Barrier(const ConvexProgram& p) : p_(p) {
        max_support_ = 1;
        for (const auto& t : p.objective)
            max_support_ = std::max(max_support_, static_cast<int>(t.vars.size()));
        for (const auto& t : p.inequalities)
            max_support_ = std::max(max_support_, static_cast<int>(t.vars.size()));
        grad_buf_.resize(max_support_);
        hess_buf_.resize(static_cast<size_t>(max_support_) * max_support_);
        ineq_count_ = static_cast<int>(p.inequalities.size());
        for (int j = 0; j < p.n; ++j) {
            if (finite_lb(p.lower(j))) ++ineq_count_;
            if (finite_ub(p.upper(j))) ++ineq_count_;
        }
    }

    int inequality_count() const { return ineq_count_; }

    // true objective, no barrier; +inf outside a term's domain
    double objective_value(const Eigen::VectorXd& z) const {
        double v = 0.0;
        for (const auto& t : p_.objective) {
            double tv = t.eval(z.data(), nullptr, nullptr);
            if (!std::isfinite(tv)) return kInf;
            v += tv;
        }
        return v;
    }

    // t * objective + log barrier; +inf when z is not strictly feasible
    double merit(const Eigen::VectorXd& z, double t) const {
        double obj = objective_value(z);
        if (!std::isfinite(obj)) return kInf;
        double phi = 0.0;
        for (const auto& term : p_.inequalities) {
            double g = term.eval(z.data(), nullptr, nullptr);
            if (!std::isfinite(g) || g >= 0.0) return kInf;
            phi -= std::log(-g);
        }
        for (int j = 0; j < p_.n; ++j) {
            if (finite_lb(p_.lower(j))) {
                double d = z(j) - p_.lower(j);
                if (d <= 0.0) return kInf;
                phi -= std::log(d);
            }
            if (finite_ub(p_.upper(j))) {
                double d = p_.upper(j) - z(j);
                if (d <= 0.0) return kInf;
                phi -= std::log(d);
            }
        }
        return t * obj + phi;
    }

    bool strictly_feasible(const Eigen::VectorXd& z) const {
        for (const auto& term : p_.inequalities) {
            double g = term.eval(z.data(), nullptr, nullptr);
            if (!std::isfinite(g) || g >= -1e-12) return false;
        }
        for (int j = 0; j < p_.n; ++j) {
            if (finite_lb(p_.lower(j)) && z(j) - p_.lower(j) <= 0.0) return false;
            if (finite_ub(p_.upper(j)) && p_.upper(j) - z(j) <= 0.0) return false;
        }
        return std::isfinite(objective_value(z));
    }

    // Gradient and Hessian of the merit at z. The Hessian is delivered either
    // densely or as triplets (upper+lower both filled). Returns false if z
    // left the domain (should not happen between line searches).
    bool derivatives(const Eigen::VectorXd& z, double t, Eigen::VectorXd& grad,
                     Eigen::MatrixXd* hess_dense,
                     std::vector<Eigen::Triplet<double>>* hess_triplets) {
        grad.setZero(p_.n);
        if (hess_dense) hess_dense->setZero(p_.n, p_.n);
        auto add_hess = [&](int gi, int gj, double v) {
            if (v == 0.0) return;
            if (hess_dense) (*hess_dense)(gi, gj) += v;
            else hess_triplets->emplace_back(gi, gj, v);
        };

        for (const auto& term : p_.objective) {
            const int k = static_cast<int>(term.vars.size());
            prep(k);
            double v = term.eval(z.data(), grad_buf_.data(), hess_buf_.data());
            if (!std::isfinite(v)) return false;
            for (int i = 0; i < k; ++i) {
                grad(term.vars[i]) += t * grad_buf_[i];
                for (int j = 0; j < k; ++j)
                    add_hess(term.vars[i], term.vars[j], t * hess_buf_[k * i + j]);
            }
        }
        for (const auto& term : p_.inequalities) {
            const int k = static_cast<int>(term.vars.size());
            prep(k);
            double g = term.eval(z.data(), grad_buf_.data(), hess_buf_.data());
            if (!std::isfinite(g) || g >= 0.0) return false;
            const double inv = 1.0 / (-g);          // -1/g
            const double inv2 = inv * inv;          // 1/g^2
            for (int i = 0; i < k; ++i) {
                grad(term.vars[i]) += inv * grad_buf_[i];
                for (int j = 0; j < k; ++j)
                    add_hess(term.vars[i], term.vars[j],
                             inv2 * grad_buf_[i] * grad_buf_[j] + inv * hess_buf_[k * i + j]);
            }
        }
        for (int j = 0; j < p_.n; ++j) {
            if (finite_lb(p_.lower(j))) {
                double d = z(j) - p_.lower(j);
                if (d <= 0.0) return false;
                grad(j) -= 1.0 / d;
                add_hess(j, j, 1.0 / (d * d));
            }
            if (finite_ub(p_.upper(j))) {
                double d = p_.upper(j) - z(j);
                if (d <= 0.0) return false;
                grad(j) += 1.0 / d;
                add_hess(j, j, 1.0 / (d * d));
            }
        }
        return true;
    }

private:
    void prep(int k) {
        std::fill(grad_buf_.begin(), grad_buf_.begin() + k, 0.0);
        std::fill(hess_buf_.begin(), hess_buf_.begin() + static_cast<size_t>(k) * k, 0.0);
    }

    const ConvexProgram& p_;
    int max_support_ = 1;
    int ineq_count_ = 0;
    std::vector<double> grad_buf_;
    std::vector<double> hess_buf_;
};

// Solves the KKT system [H A^T; A 0] [dz; w] = [-g; r] densely or sparsely,
// where r is the current equality residual b - A z. Folding r into the step
// keeps the iterates on the equality manifold: finite-precision solve error
// from one step is pulled back by the next instead of accumulating.
class KktSolver {
public:
    KktSolver(const ConvexProgram& p, bool dense) : p_(p), dense_(dense) {
        dim_ = p.n + static_cast<int>(p.eq_lhs.rows());
    }

    bool solve(const Eigen::VectorXd& grad, const Eigen::VectorXd& eq_resid,
               Eigen::MatrixXd* hess_dense, std::vector<Eigen::Triplet<double>>* hess_triplets,
               Eigen::VectorXd& dz) {
        const int n = p_.n;
        const int m = static_cast<int>(p_.eq_lhs.rows());
        if (dense_) {
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim_, dim_);
            kkt.topLeftCorner(n, n) = *hess_dense;
            if (m > 0) {
                Eigen::MatrixXd a = Eigen::MatrixXd(p_.eq_lhs);
                kkt.bottomLeftCorner(m, n) = a;
                kkt.topRightCorner(n, m) = a.transpose();
            }
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_);
            rhs.head(n) = -grad;
            if (m > 0) rhs.tail(m) = eq_resid;
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
            Eigen::VectorXd sol = lu.solve(rhs);
            if (!sol.allFinite()) return false;
            dz = sol.head(n);
            return true;
        }
        // sparse path: factor a mildly regularized quasi-definite copy, then
        // refine the solution against the exact matrix so the regularization
        // does not bias the step (equality rows are sensitive to this)
        auto trip = *hess_triplets;  // copy; we append the A blocks
        for (int col = 0; col < p_.eq_lhs.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(p_.eq_lhs, col); it; ++it) {
                trip.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  it.value());
                trip.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()),
                                  it.value());
            }
        }
        Eigen::SparseMatrix<double> kkt(dim_, dim_);
        kkt.setFromTriplets(trip.begin(), trip.end());

        // per-coordinate shifts: relative to each diagonal so ill-scaled
        // barrier curvature cannot swamp the small-curvature coordinates
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
        for (const auto& tr : *hess_triplets)
            if (tr.row() == tr.col()) diag(tr.row()) += tr.value();
        for (int j = 0; j < n; ++j)
            trip.emplace_back(j, j, 1e-11 * std::max(1.0, std::abs(diag(j))));
        for (int r = 0; r < m; ++r) trip.emplace_back(n + r, n + r, -1e-11 * eq_scale());
        Eigen::SparseMatrix<double> kkt_reg(dim_, dim_);
        kkt_reg.setFromTriplets(trip.begin(), trip.end());

        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim_);
        rhs.head(n) = -grad;
        if (m > 0) rhs.tail(m) = eq_resid;
        const double rhs_scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());

        if (!pattern_ready_) {
            ldlt_.analyzePattern(kkt_reg);
            pattern_ready_ = true;
        }
        ldlt_.factorize(kkt_reg);
        if (ldlt_.info() == Eigen::Success) {
            Eigen::VectorXd sol = ldlt_.solve(rhs);
            if (sol.allFinite()) {
                double res_norm = kInf;
                for (int pass = 0; pass < 4; ++pass) {
                    Eigen::VectorXd resid = rhs - kkt * sol;
                    res_norm = resid.lpNorm<Eigen::Infinity>();
                    if (res_norm <= 1e-10 * rhs_scale) break;
                    Eigen::VectorXd corr = ldlt_.solve(resid);
                    if (!corr.allFinite()) break;
                    sol += corr;
                }
                if (sol.allFinite() && res_norm <= 1e-6 * rhs_scale) {
                    dz = sol.head(n);
                    return true;
                }
            }
        }

        // refinement could not recover; factor the exact matrix instead
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(kkt);
        lu.factorize(kkt);
        if (lu.info() != Eigen::Success) return false;
        Eigen::VectorXd sol = lu.solve(rhs);
        if (!sol.allFinite()) return false;
        Eigen::VectorXd resid = rhs - kkt * sol;
        Eigen::VectorXd corr = lu.solve(resid);
        if (corr.allFinite()) sol += corr;
        dz = sol.head(n);
        return true;
    }

private:
    double eq_scale() {
        if (eq_scale_ < 0.0) {
            eq_scale_ = 1.0;
            for (int col = 0; col < p_.eq_lhs.outerSize(); ++col)
                for (Eigen::SparseMatrix<double>::InnerIterator it(p_.eq_lhs, col); it; ++it)
                    eq_scale_ = std::max(eq_scale_, std::abs(it.value()));
        }
        return eq_scale_;
    }

    const ConvexProgram& p_;
    bool dense_;
    int dim_ = 0;
    bool pattern_ready_ = false;
    double eq_scale_ = -1.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

struct CenterResult {
    bool converged = false;
    bool numeric_ok = true;
    int steps = 0;
    bool stopped_early = false;
};

// Newton centering at fixed t. stop_fn, when set, is checked after every
// accepted step (used by phase I to bail out as soon as s goes negative).
CenterResult center(Barrier& bar, KktSolver& kkt, const ConvexProgram& p, Eigen::VectorXd& z,
                    double t, const SolverSettings& s, bool dense,
                    const std::function<bool(const Eigen::VectorXd&)>& stop_fn,
                    std::vector<TraceRow>* trace, int stage) {
    CenterResult res;
    const int m = static_cast<int>(p.eq_lhs.rows());
    Eigen::VectorXd grad(p.n), dz(p.n), eq_resid(m);
    Eigen::MatrixXd hess_dense;
    std::vector<Eigen::Triplet<double>> trip;
    for (int it = 0; it < s.max_newton; ++it) {
        trip.clear();
        bool ok = bar.derivatives(z, t, grad, dense ? &hess_dense : nullptr, dense ? nullptr : &trip);
        if (!ok) {
            res.numeric_ok = false;
            return res;
        }
        if (m > 0) eq_resid = p.eq_rhs - p.eq_lhs * z;
        if (!kkt.solve(grad, eq_resid, dense ? &hess_dense : nullptr, dense ? nullptr : &trip,
                       dz)) {
            res.numeric_ok = false;
            return res;
        }
        double dec2 = -grad.dot(dz);  // Newton decrement squared
        if (trace) trace->push_back({stage, it, bar.objective_value(z), dec2});
        if (!(dec2 > 2.0 * s.newton_tol)) {
            res.converged = true;
            return res;
        }
        const double merit0 = bar.merit(z, t);
        // negative except when the step is dominated by an equality pull-back;
        // clamping keeps the sufficient-decrease test meaningful then
        const double slope = std::min(grad.dot(dz), 0.0);
        double step = 1.0;
        double merit1 = kInf;
        int backtracks = 0;
        while (backtracks < 80) {
            merit1 = bar.merit(z + step * dz, t);
            if (merit1 <= merit0 + s.ls_alpha * step * slope) break;
            step *= s.ls_beta;
            ++backtracks;
        }
        if (backtracks >= 80 || !(merit1 < merit0)) {
            // No representable merit decrease is left at this point (for very
            // large t the predicted decrease can fall below one ulp of the
            // merit value). Classify by the decrement: tiny means centered.
            res.converged = dec2 <= 1e-3;
            return res;
        }
        z += step * dz;
        ++res.steps;
        if (stop_fn && stop_fn(z)) {
            res.stopped_early = true;
            res.converged = true;
            return res;
        }
    }
    return res;  // ran out of Newton iterations
}

Solution solve_impl(const ConvexProgram& p, const Eigen::VectorXd& start,
                    const SolverSettings& s,
                    const std::function<bool(const Eigen::VectorXd&)>& stop_fn) {
    Solution sol;
    sol.point = start;
    Barrier bar(p);
    const bool dense = s.force_dense || p.n < 500;
    KktSolver kkt(p, dense);
    std::vector<TraceRow> trace;

    Eigen::VectorXd z = start;
    const int m = bar.inequality_count();
    double t = std::max(s.t0, 1e-12);
    int stage = 0;
    bool all_converged = true;
    while (true) {
        CenterResult cr = center(bar, kkt, p, z, t, s, dense,
                                 stop_fn, s.debug_trace ? &trace : nullptr, stage);
        sol.newton_steps += cr.steps;
        ++stage;
        if (!cr.numeric_ok) {
            sol.status = SolveStatus::numeric_error;
            sol.point = z;
            sol.objective = bar.objective_value(z);
            return sol;
        }
        if (!cr.converged) all_converged = false;
        sol.stage_objectives.push_back(bar.objective_value(z));
        if (cr.stopped_early) break;
        if (m == 0 || static_cast<double>(m) / t <= s.duality_gap_tol) break;
        t *= s.barrier_mu;
    }
    sol.barrier_stages = stage;
    sol.final_t = t;
    sol.kkt_residual = m == 0 ? 0.0 : static_cast<double>(m) / t;
    sol.point = z;
    sol.objective = bar.objective_value(z);
    sol.status = all_converged ? SolveStatus::optimal : SolveStatus::max_iter;

    if (s.debug_trace && !s.trace_path.empty()) {
        std::ofstream out(s.trace_path, std::ios::app);
        out << "stage,iter,objective,residual\n";
        char buf[128];
        for (const auto& r : trace) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g\n", r.stage, r.iter, r.objective,
                          r.decrement);
            out << buf;
        }
    }
    return sol;
}

// Minimal phase I: minimize slack s with every constraint relaxed by s.
// Returns a strictly feasible point, or nullopt when none exists.
bool phase_one(const ConvexProgram& p, Eigen::VectorXd& z, const SolverSettings& s) {
    const int n = p.n;
    ConvexProgram ext;
    ext.init(n + 1);
    ext.lower.head(n) = p.lower;
    ext.upper.head(n) = p.upper;
    if (p.eq_lhs.rows() > 0) {
        Eigen::SparseMatrix<double> a(p.eq_lhs.rows(), n + 1);
        std::vector<Eigen::Triplet<double>> trip;
        for (int col = 0; col < p.eq_lhs.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(p.eq_lhs, col); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  it.value());
        a.setFromTriplets(trip.begin(), trip.end());
        ext.eq_lhs = a;
        ext.eq_rhs = p.eq_rhs;
    }
    Term obj;
    obj.vars = {n};
    obj.eval = [n](const double* zz, double* g, double*) {
        if (g) g[0] += 1.0;
        return zz[n];
    };
    ext.objective.push_back(obj);
    for (const auto& orig : p.inequalities) {
        Term w;
        w.vars = orig.vars;
        w.vars.push_back(n);
        const int k = static_cast<int>(orig.vars.size());
        auto gbuf = std::make_shared<std::vector<double>>(k);
        auto hbuf = std::make_shared<std::vector<double>>(static_cast<size_t>(k) * k);
        auto inner = orig.eval;
        const int slack_global = n;
        w.eval = [k, inner, gbuf, hbuf, slack_global](const double* zz, double* g,
                                                      double* h) -> double {
            double* gp = nullptr;
            double* hp = nullptr;
            if (g) {
                std::fill(gbuf->begin(), gbuf->end(), 0.0);
                gp = gbuf->data();
            }
            if (h) {
                std::fill(hbuf->begin(), hbuf->end(), 0.0);
                hp = hbuf->data();
            }
            double v = inner(zz, gp, hp);
            if (!std::isfinite(v)) return v;
            if (g) {
                for (int i = 0; i < k; ++i) g[i] += (*gbuf)[i];
                g[k] -= 1.0;
            }
            if (h)
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) h[(k + 1) * i + j] += (*hbuf)[k * i + j];
            return v - zz[slack_global];
        };
        ext.inequalities.push_back(std::move(w));
    }

    // interior start for the extended program
    Eigen::VectorXd ze(n + 1);
    for (int j = 0; j < n; ++j) {
        double v = z(j);
        if (finite_lb(p.lower(j)) && finite_ub(p.upper(j))) {
            double w = std::min(1e-3 * (p.upper(j) - p.lower(j)), 0.25 * (p.upper(j) - p.lower(j)));
            v = std::min(std::max(v, p.lower(j) + w), p.upper(j) - w);
        } else if (finite_lb(p.lower(j))) {
            v = std::max(v, p.lower(j) + 1e-6);
        } else if (finite_ub(p.upper(j))) {
            v = std::min(v, p.upper(j) - 1e-6);
        }
        ze(j) = v;
    }
    double gmax = 0.0;
    bool domain_bad = false;
    for (const auto& orig : p.inequalities) {
        double g = orig.eval(ze.data(), nullptr, nullptr);
        if (!std::isfinite(g)) {
            domain_bad = true;
            break;
        }
        gmax = std::max(gmax, g);
    }
    if (domain_bad) return false;  // cannot even evaluate; caller reports infeasible
    ze(n) = gmax + std::max(1e-3, 0.1 * std::abs(gmax));

    // A linear objective plus few constraints can leave the Newton system
    // rank-deficient (e.g. a single inequality in two variables). A tiny
    // proximal term anchored at the start point adds curvature everywhere
    // while perturbing the slack minimizer negligibly.
    for (int j = 0; j <= n; ++j) {
        Term prox;
        prox.vars = {j};
        const double anchor = ze(j);
        prox.eval = [j, anchor](const double* zz, double* g, double* h) {
            const double d = zz[j] - anchor;
            if (g) g[0] += 2e-8 * d;
            if (h) h[0] += 2e-8;
            return 1e-8 * d * d;
        };
        ext.objective.push_back(std::move(prox));
    }

    SolverSettings ps = s;
    ps.t0 = 1.0;
    ps.duality_gap_tol = std::max(1e-3, s.duality_gap_tol);
    Solution phase = solve_impl(ext, ze, ps, [n](const Eigen::VectorXd& zz) {
        return zz(n) < -1e-6;
    });
    if (phase.status == SolveStatus::numeric_error) return false;
    if (phase.point(n) >= 0.0) return false;
    z = phase.point.head(n);
    return true;
}

}  // namespace

Solution minimize(const ConvexProgram& p, const Eigen::VectorXd& start,
                  const SolverSettings& settings) {
    if (start.size() != p.n) throw std::invalid_argument("minimize: start has wrong dimension");
    Eigen::VectorXd z = start;

    // restore A z = b if the caller's start drifted off the manifold
    if (p.eq_lhs.rows() > 0) {
        Eigen::VectorXd resid = p.eq_rhs - p.eq_lhs * z;
        if (resid.norm() > 1e-10 * (1.0 + p.eq_rhs.norm())) {
            Eigen::SparseMatrix<double> aat = p.eq_lhs * Eigen::SparseMatrix<double>(p.eq_lhs.transpose());
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> fact(aat);
            if (fact.info() != Eigen::Success) {
                Solution bad;
                bad.point = z;
                bad.status = SolveStatus::numeric_error;
                return bad;
            }
            z += p.eq_lhs.transpose() * fact.solve(resid);
        }
    }

    Barrier bar(p);
    if (!bar.strictly_feasible(z)) {
        if (!phase_one(p, z, settings)) {
            Solution bad;
            bad.point = z;
            bad.status = SolveStatus::infeasible;
            bad.objective = bar.objective_value(z);
            return bad;
        }
    }
    return solve_impl(p, z, settings, nullptr);
}

CapacityResult bisect_capacity(const Eigen::VectorXd& costs, const Eigen::VectorXd& offsets,
                               const Eigen::VectorXd& lower_bounds, double budget) {
    const int n = static_cast<int>(costs.size());
    CapacityResult res;
    res.f = Eigen::VectorXd::Zero(n);
    if (n == 0) return res;
    if (lower_bounds.sum() > budget * (1.0 + 1e-12)) {
        res.f = lower_bounds;
        res.feasible = false;
        return res;
    }
    bool any_active = false;
    for (int i = 0; i < n; ++i) any_active = any_active || costs(i) > 0.0;
    if (!any_active) {
        res.f = lower_bounds;
        return res;
    }

    // stationarity: C/(B f^2 + C f) = lambda, written in a cancellation-free
    // form; valid for B = 0 too (reduces to f = 1/lambda)
    auto f_of = [&](double lambda, int i) {
        const double c = costs(i);
        const double b = offsets(i);
        const double disc = std::sqrt(c * c + 4.0 * b * c / lambda);
        return (2.0 * c / lambda) / (c + disc);
    };
    auto total = [&](double lambda) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            s += costs(i) > 0.0 ? std::max(f_of(lambda, i), lower_bounds(i)) : lower_bounds(i);
        return s;
    };

    double lo = 1e-30, hi = 1e30;  // total(lo) huge, total(hi) ~ sum of lower bounds
    for (int it = 0; it < 200; ++it) {
        double mid = std::sqrt(lo * hi);
        if (total(mid) > budget) lo = mid;
        else hi = mid;
    }
    const double lambda = std::sqrt(lo * hi);
    double interior_sum = 0.0;
    double clamped_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (costs(i) > 0.0) {
            double f = f_of(lambda, i);
            if (f > lower_bounds(i)) {
                res.f(i) = f;
                interior_sum += f;
                continue;
            }
        }
        res.f(i) = lower_bounds(i);
        clamped_sum += lower_bounds(i);
    }
    // absorb the bisection slack so the budget holds exactly
    if (interior_sum > 0.0) {
        const double scale = (budget - clamped_sum) / interior_sum;
        for (int i = 0; i < n; ++i)
            if (res.f(i) > lower_bounds(i)) res.f(i) *= scale;
    }
    res.lambda = lambda;
    return res;
}

double gradient_check(const Term& term, const Eigen::VectorXd& z, double step) {
    const int k = static_cast<int>(term.vars.size());
    std::vector<double> grad(k, 0.0);
    Eigen::VectorXd zz = z;
    term.eval(zz.data(), grad.data(), nullptr);
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
        const int j = term.vars[i];
        const double keep = zz(j);
        zz(j) = keep + step;
        const double up = term.eval(zz.data(), nullptr, nullptr);
        zz(j) = keep - step;
        const double dn = term.eval(zz.data(), nullptr, nullptr);
        zz(j) = keep;
        const double fd = (up - dn) / (2.0 * step);
        const double err = std::abs(fd - grad[i]) / std::max(1.0, std::abs(grad[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace mecsim
