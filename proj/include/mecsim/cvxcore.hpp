#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <vector>

namespace mecsim {

constexpr double kUnbounded = 1e30;

// One smooth scalar term over a small set of coordinates. eval returns the
// value at z (full-length vector); when grad/hess are non-null it adds the
// gradient (length vars.size()) and row-major Hessian (vars.size()^2) of the
// term with respect to its own coordinates. Returning a non-finite value
// marks z as outside the term's domain.
struct Term {
    std::vector<int> vars;
    std::function<double(const double* z, double* grad, double* hess)> eval;
};

// min sum(objective) s.t. inequalities <= 0, eq_lhs * z = eq_rhs, box bounds.
// Caller guarantees convexity of objective and inequality terms.
struct ConvexProgram {
    int n = 0;
    std::vector<Term> objective;
    std::vector<Term> inequalities;
    Eigen::SparseMatrix<double> eq_lhs;  // 0 rows when unconstrained
    Eigen::VectorXd eq_rhs;
    Eigen::VectorXd lower, upper;

    void init(int dim) {
        n = dim;
        objective.clear();
        inequalities.clear();
        eq_lhs.resize(0, dim);
        eq_rhs.resize(0);
        lower = Eigen::VectorXd::Constant(dim, -kUnbounded);
        upper = Eigen::VectorXd::Constant(dim, kUnbounded);
    }
};

struct SolverSettings {
    double barrier_mu = 10.0;
    double newton_tol = 1e-8;      // stop a centering step at decrement^2/2 below this
    int max_newton = 100;          // per barrier stage
    double duality_gap_tol = 1e-6;
    double ls_alpha = 0.25;        // sufficient-decrease fraction
    double ls_beta = 0.5;          // backtracking shrink
    double t0 = 1.0;               // initial barrier weight (callers may warm-start higher)
    bool force_dense = false;      // keep the dense linear algebra path (tests, tiny programs)
    bool debug_trace = false;
    std::string trace_path;
};

enum class SolveStatus { optimal, max_iter, infeasible, numeric_error };
const char* to_string(SolveStatus s);

struct Solution {
    Eigen::VectorXd point;
    double objective = 0.0;
    SolveStatus status = SolveStatus::numeric_error;
    double kkt_residual = 0.0;  // duality-gap bound at exit
    int newton_steps = 0;
    int barrier_stages = 0;
    double final_t = 0.0;
    std::vector<double> stage_objectives;  // true objective after each centering
};

// Log-barrier Newton with affine equalities. The start is projected onto the
// equality manifold; a phase-I pass runs automatically when it is not
// strictly feasible for the inequalities.
Solution minimize(const ConvexProgram& program, const Eigen::VectorXd& start,
                  const SolverSettings& settings = {});

// Capacity split: min sum_u ln(offset_u + cost_u / f_u) over f >= lower,
// sum f <= budget. Solved through the stationarity condition per user plus
// bisection on the budget multiplier. Users with cost 0 sit at their lower
// bound. feasible=false when the lower bounds alone exceed the budget.
struct CapacityResult {
    Eigen::VectorXd f;
    double lambda = 0.0;
    bool feasible = true;
};
CapacityResult bisect_capacity(const Eigen::VectorXd& costs, const Eigen::VectorXd& offsets,
                               const Eigen::VectorXd& lower_bounds, double budget);

// Test support: worst relative mismatch between the term's analytic gradient
// and central finite differences at z.
double gradient_check(const Term& term, const Eigen::VectorXd& z, double step = 1e-6);

}  // namespace mecsim
