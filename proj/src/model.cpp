#include "mecsim/model.hpp"

#include <cmath>
#include <stdexcept>

#include "mecsim/kv.hpp"

namespace mecsim {

AllocationState all_local_state(const Scenario& sc, const SystemParams& params) {
    const int U = sc.num_users();
    AllocationState st;
    st.offload = Eigen::VectorXd::Zero(U);
    st.assign = Eigen::MatrixXd::Zero(U, params.num_subcarriers);
    st.capacity = Eigen::VectorXd::Zero(U);
    st.compression = Eigen::VectorXd::Ones(U);
    return st;
}

Eigen::MatrixXd interference_field(const Scenario& sc, const SystemParams& params,
                                   const AllocationState& state) {
    const int K = sc.num_sbs();
    const int N = params.num_subcarriers;
    const int U = sc.num_users();
    Eigen::MatrixXd field = Eigen::MatrixXd::Zero(K, N);
    for (int u = 0; u < U; ++u) {
        const int own = sc.assoc[u];
        for (int k = 0; k < K; ++k) {
            if (k == own) continue;
            const double gp = sc.gain(u, k) * params.tx_power;
            for (int n = 0; n < N; ++n) {
                const double share = state.assign(u, n);
                if (share > 0.0) field(k, n) += share * gp;
            }
        }
    }
    return field;
}

static double rate_from_field(const Scenario& sc, const SystemParams& params,
                              const AllocationState& state, const Eigen::MatrixXd& field,
                              int user) {
    const int k = sc.assoc[user];
    const double sub_bw = params.bandwidth / params.num_subcarriers;
    const double pg = params.tx_power * sc.gain(user, k);
    double rate = 0.0;
    for (int n = 0; n < params.num_subcarriers; ++n) {
        const double share = state.assign(user, n);
        if (share <= 0.0) continue;
        rate += share * sub_bw * std::log2(1.0 + pg / (field(k, n) + params.noise_power));
    }
    return rate;
}

double uplink_rate(const Scenario& sc, const SystemParams& params,
                   const AllocationState& state, int user) {
    return rate_from_field(sc, params, state, interference_field(sc, params, state), user);
}

Eigen::VectorXd uplink_rates(const Scenario& sc, const SystemParams& params,
                             const AllocationState& state) {
    const Eigen::MatrixXd field = interference_field(sc, params, state);
    Eigen::VectorXd rates(sc.num_users());
    for (int u = 0; u < sc.num_users(); ++u)
        rates(u) = rate_from_field(sc, params, state, field, u);
    return rates;
}

double local_delay(const SystemParams& params, double volume_units) {
    return params.cycles_per_unit * volume_units / params.local_capacity;
}

double compressed_volume(double volume_units, double eps) {
    if (eps < 1.0) throw std::invalid_argument("compression ratio below 1");
    return volume_units / eps;
}

double degradation_multiplier(const SystemParams& params, int parallelism) {
    return std::pow(1.0 + params.degradation, parallelism - 1);
}

double mec_delay(const SystemParams& params, double b_units, double f, int parallelism) {
    if (f <= 0.0) throw std::domain_error("mec_delay: capacity must be positive");
    return degradation_multiplier(params, parallelism) * params.cycles_per_unit * b_units / f;
}

double total_delay_given_rate(const Scenario& sc, const SystemParams& params,
                              const AllocationState& state, int user, double rate) {
    const double x = state.offload(user);
    const double a = sc.volume[user];
    const double tl = local_delay(params, a);
    if (x <= 0.0) return tl;
    if (rate <= 0.0 || state.capacity(user) <= 0.0) return kUnservedDelay;
    // defensive clamp so a violating state can still be scored and flagged
    const double b = a / std::max(1.0, state.compression(user));
    const double up = b * params.bits_per_unit / rate;
    const double comp = mec_delay(params, b, state.capacity(user),
                                  params.task_types[sc.task_type[user]].parallelism);
    return (1.0 - x) * tl + x * (up + comp);
}

double total_delay(const Scenario& sc, const SystemParams& params,
                   const AllocationState& state, int user) {
    return total_delay_given_rate(sc, params, state, user,
                                  uplink_rate(sc, params, state, user));
}

double effective_volume(const Scenario& sc, const AllocationState& state, int user) {
    const double x = state.offload(user);
    const double a = sc.volume[user];
    return (1.0 - x) * a + x * a / std::max(1.0, state.compression(user));
}

double accuracy(const SystemParams& params, double alpha_units) {
    if (alpha_units <= 0.0) throw std::domain_error("accuracy: volume must be positive");
    return params.fit_p - params.fit_q * std::pow(alpha_units, -params.fit_r);
}

double user_utility(const SystemParams& params, double y, double t) {
    if (y <= 0.0 || t <= 0.0) throw std::domain_error("user_utility: needs y > 0 and t > 0");
    return std::log(params.weight * y / t);
}

UtilityReport system_utility(const Scenario& sc, const SystemParams& params,
                             const AllocationState& state) {
    UtilityReport rep;
    const Eigen::VectorXd rates = uplink_rates(sc, params, state);
    for (int u = 0; u < sc.num_users(); ++u) {
        UserReport r;
        r.user = u;
        r.offload = state.offload(u);
        r.rate = rates(u);
        r.delay = total_delay_given_rate(sc, params, state, u, rates(u));
        const auto& task = params.task_types[sc.task_type[u]];
        const double alpha = effective_volume(sc, state, u);
        if (alpha <= 0.0) {
            r.counted = false;
            r.violated = "C7";
            ++rep.infeasible_users;
            rep.users.push_back(r);
            continue;
        }
        r.accuracy = accuracy(params, alpha);
        std::string tags;
        if (r.delay > task.delay_limit * (1.0 + 1e-9)) tags = "C6";
        if (r.accuracy < task.accuracy_limit * (1.0 - 1e-9)) tags += tags.empty() ? "C7" : ";C7";
        r.violated = tags;
        if (r.accuracy <= 0.0 || r.delay <= 0.0) {
            r.counted = false;
            ++rep.infeasible_users;
        } else {
            r.utility = user_utility(params, r.accuracy, r.delay);
            rep.total += r.utility;
            rep.revenue += std::log(r.accuracy);
            rep.neg_cost -= std::log(r.delay);
            if (!tags.empty()) ++rep.infeasible_users;
        }
        rep.users.push_back(r);
    }
    return rep;
}

static bool is_binary(double v) { return std::abs(v) <= 1e-9 || std::abs(v - 1.0) <= 1e-9; }

std::vector<Violation> check_feasible(const Scenario& sc, const SystemParams& params,
                                      const AllocationState& state) {
    std::vector<Violation> out;
    const int U = sc.num_users();
    const int K = sc.num_sbs();
    const int N = params.num_subcarriers;

    for (int u = 0; u < U; ++u) {
        if (!is_binary(state.offload(u)))
            out.push_back({"C1", u, -1, -1, state.offload(u)});
        for (int n = 0; n < N; ++n)
            if (!is_binary(state.assign(u, n)))
                out.push_back({"C2", u, -1, n, state.assign(u, n)});
        if (state.compression(u) < 1.0 - 1e-9)
            out.push_back({"C5", u, -1, -1, 1.0 - state.compression(u)});
    }
    // C3 (single computing approach per user) holds by representation: one x
    // per user, checked as a range here.
    for (int u = 0; u < U; ++u)
        if (state.offload(u) < -1e-9 || state.offload(u) > 1.0 + 1e-9)
            out.push_back({"C3", u, -1, -1, state.offload(u)});
    for (int k = 0; k < K; ++k) {
        for (int n = 0; n < N; ++n) {
            double s = 0.0;
            for (int u : sc.cell_users[k]) s += state.assign(u, n);
            if (s > 1.0 + 1e-9) out.push_back({"C4", -1, k, n, s - 1.0});
        }
        double f = 0.0;
        for (int u : sc.cell_users[k]) f += state.capacity(u);
        if (f > params.mec_capacity * (1.0 + 1e-9))
            out.push_back({"C8", -1, k, -1, f - params.mec_capacity});
    }
    const Eigen::VectorXd rates = uplink_rates(sc, params, state);
    for (int u = 0; u < U; ++u) {
        const auto& task = params.task_types[sc.task_type[u]];
        const double t = total_delay_given_rate(sc, params, state, u, rates(u));
        if (t > task.delay_limit * (1.0 + 1e-9))
            out.push_back({"C6", u, -1, -1, t - task.delay_limit});
        const double alpha = effective_volume(sc, state, u);
        const double y = alpha > 0.0 ? accuracy(params, alpha) : -1.0;
        if (y < task.accuracy_limit * (1.0 - 1e-9))
            out.push_back({"C7", u, -1, -1, task.accuracy_limit - y});
    }
    return out;
}

double continuous_violation(const Scenario& sc, const SystemParams& params,
                            const AllocationState& state) {
    double total = 0.0;
    const int U = sc.num_users();
    const int K = sc.num_sbs();
    const int N = params.num_subcarriers;
    auto over = [](double v, double cap) { return v > cap ? v - cap : 0.0; };

    for (int u = 0; u < U; ++u) {
        total += over(state.offload(u), 1.0) + over(-state.offload(u), 0.0);
        total += over(1.0, state.compression(u));  // eps >= 1
        total += over(-state.capacity(u), 0.0);
        for (int n = 0; n < N; ++n) {
            total += over(state.assign(u, n), 1.0) + over(-state.assign(u, n), 0.0);
        }
    }
    for (int k = 0; k < K; ++k) {
        for (int n = 0; n < N; ++n) {
            double s = 0.0;
            for (int u : sc.cell_users[k]) s += state.assign(u, n);
            total += over(s, 1.0);
        }
        double f = 0.0;
        for (int u : sc.cell_users[k]) f += state.capacity(u);
        total += over(f, params.mec_capacity) / params.mec_capacity;
    }
    const Eigen::VectorXd rates = uplink_rates(sc, params, state);
    for (int u = 0; u < U; ++u) {
        const auto& task = params.task_types[sc.task_type[u]];
        const double t = total_delay_given_rate(sc, params, state, u, rates(u));
        total += std::min(over(t, task.delay_limit) / task.delay_limit, 1e6);
        const double alpha = effective_volume(sc, state, u);
        const double y = alpha > 0.0 ? accuracy(params, alpha) : 0.0;
        total += over(task.accuracy_limit, y) / task.accuracy_limit;
    }
    return total;
}

std::string report_csv(const UtilityReport& report) {
    std::string out = "user,x,rate,delay,accuracy,utility,violated\n";
    for (const auto& r : report.users) {
        out += std::to_string(r.user) + ',' + format_double(r.offload) + ',' +
               format_double(r.rate) + ',' + format_double(r.delay) + ',' +
               format_double(r.accuracy) + ',' + format_double(r.utility) + ',' +
               r.violated + '\n';
    }
    return out;
}

}  // namespace mecsim
