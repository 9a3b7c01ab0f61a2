#pragma once

#include <stdexcept>
#include <vector>

namespace mecsim {

// One classification task class: hard delay limit, hard accuracy limit, and
// the number of parallel computing units the task requests on the server.
struct TaskTypeSpec {
    double delay_limit = 0.0;     // seconds
    double accuracy_limit = 0.0;  // percent
    int parallelism = 1;          // units requested, <= max_parallel
};

struct SystemParams {
    double bandwidth = 1e7;        // Hz, shared uplink band per cell
    int num_subcarriers = 64;      // OFDMA subcarriers per cell
    double tx_power = 0.1;         // W per user per subcarrier, fixed (no power control)
    double noise_power = 1e-13;    // W (-100 dBm)
    double mec_capacity = 2e11;    // cycles/s per edge server
    double local_capacity = 1.4e9; // cycles/s per device
    double cycles_per_unit = 2e5;  // cycles needed per data unit
    double degradation = 0.2;      // per extra parallel unit, multiplier (1+d)^(i-1)
    int max_parallel = 5;          // cap on parallelism
    double fit_p = 100.0;          // accuracy fit: y = p - q * alpha^(-r)
    double fit_q = 80.0;
    double fit_r = 0.6;
    double weight = 1.0;           // utility weight L in ln(L*y/t)
    double carrier_ghz = 3.5;      // carrier frequency for the path-loss model
    double bits_per_unit = 1000.0; // 1 data unit = 1 kilobit
    double task_volume_lo = 120.0; // raw volume draw range, data units
    double task_volume_hi = 400.0;
    std::vector<TaskTypeSpec> task_types = {
        {0.020, 85.0, 1},
        {0.040, 90.0, 3},
        {0.060, 95.0, 5},
    };

    void validate() const {
        if (bandwidth <= 0 || num_subcarriers <= 0 || tx_power <= 0 || noise_power <= 0 ||
            mec_capacity <= 0 || local_capacity <= 0 || cycles_per_unit <= 0 ||
            degradation < 0 || max_parallel < 1 || fit_p <= 0 || fit_q <= 0 ||
            fit_r < 0 || fit_r > 1 || weight <= 0 || carrier_ghz <= 0 ||
            bits_per_unit <= 0 || task_volume_lo <= 0 || task_volume_hi < task_volume_lo)
            throw std::invalid_argument("system params out of range");
        if (task_types.empty()) throw std::invalid_argument("no task types");
        for (const auto& t : task_types) {
            if (t.delay_limit <= 0) throw std::invalid_argument("task delay limit must be positive");
            if (t.accuracy_limit <= 0 || t.accuracy_limit >= fit_p)
                throw std::invalid_argument("task accuracy limit must lie in (0, fit_p)");
            if (t.parallelism < 1 || t.parallelism > max_parallel)
                throw std::invalid_argument("task parallelism out of range");
        }
    }
};

}  // namespace mecsim
