#include "mecsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

namespace mecsim {

namespace {

// Visit every way to write `total` as an ordered sum of `parts` positive
// integers. `slot` fills left to right; fn fires with the complete vector.
void for_each_composition(int total, int parts, std::vector<int>& slots, int slot,
                          const std::function<void()>& fn) {
    if (slot == parts - 1) {
        slots[slot] = total;
        fn();
        return;
    }
    const int reserve = parts - slot - 1;  // later slots need >= 1 each
    for (int take = 1; take <= total - reserve; ++take) {
        slots[slot] = take;
        for_each_composition(total - take, parts, slots, slot + 1, fn);
    }
}

}  // namespace

OracleResult brute_force(const Scenario& sc, const SystemParams& par,
                         const BruteForceGrid& grid) {
    par.validate();
    const int nu = sc.num_users();
    const int nn = par.num_subcarriers;
    const int nk = sc.num_sbs();
    if (nu > grid.max_users)
        throw std::invalid_argument("brute force refused: too many users for the grid caps");
    if (nn > grid.max_subcarriers)
        throw std::invalid_argument("brute force refused: too many subcarriers for the grid caps");
    if (grid.eps_grid.empty() || grid.capacity_steps < 1)
        throw std::invalid_argument("brute force grid is empty");
    for (double e : grid.eps_grid)
        if (e < 1.0) throw std::invalid_argument("compression grid values must be >= 1");

    OracleResult best;
    best.state = all_local_state(sc, par);
    best.objective = -std::numeric_limits<double>::infinity();

    AllocationState st = all_local_state(sc, par);
    const auto evaluate = [&] {
        ++best.evaluated;
        if (!check_feasible(sc, par, st).empty()) return;
        const double total = system_utility(sc, par, st).total;
        if (!best.feasible_found || total > best.objective) {
            best.feasible_found = true;
            best.objective = total;
            best.state = st;
        }
    };

    for (int mask = 0; mask < (1 << nu); ++mask) {
        st.offload = Eigen::VectorXd::Zero(nu);
        for (int u = 0; u < nu; ++u)
            if (mask & (1 << u)) st.offload(u) = 1.0;

        std::vector<std::vector<int>> offl(nk);
        std::vector<int> offloaders;
        for (int k = 0; k < nk; ++k)
            for (int u : sc.cell_users[k])
                if (mask & (1 << u)) {
                    offl[k].push_back(u);
                    offloaders.push_back(u);
                }

        // capacity enumeration, innermost: per cell, every positive split of
        // the quantized budget among that cell's offloaders
        const std::function<void(int)> enum_capacity = [&](int k) {
            if (k == nk) {
                evaluate();
                return;
            }
            if (offl[k].empty()) {
                enum_capacity(k + 1);
                return;
            }
            const int m = static_cast<int>(offl[k].size());
            if (m > grid.capacity_steps)
                throw std::invalid_argument("brute force refused: more offloaders than capacity quanta");
            std::vector<int> quanta(m);
            for_each_composition(grid.capacity_steps, m, quanta, 0, [&] {
                for (int i = 0; i < m; ++i)
                    st.capacity(offl[k][i]) =
                        par.mec_capacity * quanta[i] / grid.capacity_steps;
                enum_capacity(k + 1);
            });
        };

        // compression enumeration over offloaders only; local users sit at 1
        const std::function<void(std::size_t)> enum_eps = [&](std::size_t i) {
            if (i == offloaders.size()) {
                st.capacity = Eigen::VectorXd::Zero(nu);
                enum_capacity(0);
                return;
            }
            for (double e : grid.eps_grid) {
                st.compression(offloaders[i]) = e;
                enum_eps(i + 1);
            }
        };

        // ownership enumeration: one owner (or none) per station per
        // subcarrier, jointly across stations because interference couples
        // co-channel cells
        const std::function<void(int)> enum_owners = [&](int pos) {
            if (pos == nn * nk) {
                st.compression = Eigen::VectorXd::Ones(nu);
                enum_eps(0);
                return;
            }
            const int n = pos / nk;
            const int k = pos % nk;
            // option 0: subcarrier dark in this cell
            enum_owners(pos + 1);
            for (int u : offl[k]) {
                st.assign(u, n) = 1.0;
                enum_owners(pos + 1);
                st.assign(u, n) = 0.0;
            }
        };

        st.assign = Eigen::MatrixXd::Zero(nu, nn);
        enum_owners(0);
    }

    if (!best.feasible_found) {
        best.state = all_local_state(sc, par);
        best.objective = system_utility(sc, par, best.state).total;
    }
    return best;
}

AllocationState snap_to_grid(const Scenario& sc, const SystemParams& par,
                             const AllocationState& state, const BruteForceGrid& grid) {
    AllocationState snapped = state;
    for (int u = 0; u < sc.num_users(); ++u) {
        if (snapped.offload(u) < 0.5) {
            snapped.compression(u) = 1.0;
            snapped.capacity(u) = 0.0;
            continue;
        }
        double pick = grid.eps_grid.front();
        for (double e : grid.eps_grid)
            if (std::abs(e - state.compression(u)) < std::abs(pick - state.compression(u)))
                pick = e;
        snapped.compression(u) = pick;
    }
    for (int k = 0; k < sc.num_sbs(); ++k) {
        std::vector<int> offl;
        for (int u : sc.cell_users[k])
            if (snapped.offload(u) > 0.5) offl.push_back(u);
        if (offl.empty()) continue;
        const int m = static_cast<int>(offl.size());
        if (m > grid.capacity_steps)
            throw std::invalid_argument("cannot snap: more offloaders than capacity quanta");
        // one quantum guaranteed each, the rest by largest remainder of the
        // continuous split
        std::vector<int> quanta(m, 1);
        std::vector<std::pair<double, int>> want(m);
        int spare = grid.capacity_steps - m;
        for (int i = 0; i < m; ++i) {
            const double ideal =
                state.capacity(offl[i]) * grid.capacity_steps / par.mec_capacity;
            const double extra = std::max(0.0, ideal - 1.0);
            const int whole = std::min(spare, static_cast<int>(extra));
            quanta[i] += whole;
            spare -= whole;
            want[i] = {extra - whole, i};
        }
        std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int j = 0; spare > 0; j = (j + 1) % m, --spare) ++quanta[want[j].second];
        for (int i = 0; i < m; ++i)
            snapped.capacity(offl[i]) = par.mec_capacity * quanta[i] / grid.capacity_steps;
    }
    return snapped;
}

}  // namespace mecsim
