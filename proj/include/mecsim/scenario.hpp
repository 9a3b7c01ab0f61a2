#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mecsim/params.hpp"

namespace mecsim {

struct GeometryConfig {
    double area_side = 200.0;            // square side, meters
    int num_sbs = 4;
    int num_users = 30;
    double min_user_sbs_distance = 10.0; // exclusion radius around each station

    void validate() const {
        if (area_side <= 0 || num_sbs < 1 || num_users < 1 || min_user_sbs_distance < 0)
            throw std::invalid_argument("geometry config out of range");
    }
};

struct Position {
    double x = 0.0;
    double y = 0.0;
};

// A fully generated network instance. Immutable after creation; everything
// downstream is a pure function of this plus the parameter set.
struct Scenario {
    GeometryConfig geom;
    std::uint64_t seed = 0;
    std::vector<Position> sbs_pos;            // K stations
    std::vector<Position> user_pos;           // U users
    std::vector<int> assoc;                   // user -> station index
    Eigen::MatrixXd dist;                     // U x K, meters
    Eigen::MatrixXd gain;                     // U x K, expected linear gain to each station
    std::vector<int> task_type;               // user -> index into params.task_types
    std::vector<double> volume;               // user -> raw data volume, units
    std::vector<std::vector<int>> cell_users; // station -> sorted user ids

    int num_users() const { return static_cast<int>(user_pos.size()); }
    int num_sbs() const { return static_cast<int>(sbs_pos.size()); }
};

// Distance-dependent line-of-sight probability, clamped to [0,1].
double los_probability(double d);

// Microcell path loss in dB at distance d (meters), carrier fq (GHz).
double path_loss_db(double d, double fq_ghz, bool los);

// Expected linear channel gain: inverse of the LoS/NLoS mixture of linear
// path losses. Flat across subcarriers.
double expected_channel_gain(double d, double fq_ghz);

// Station placement + user placement + nearest-station association.
// Deterministic in (config, seed). Throws if the exclusion radius leaves no
// room for users.
Scenario place_network(const GeometryConfig& config, const SystemParams& params,
                       std::uint64_t seed);

// Draws one task type per user (uniform) and a raw volume from the
// configured range. Separate seed stream so geometry and tasks can be
// varied independently.
void assign_tasks(Scenario& sc, const SystemParams& params, std::uint64_t seed);

// place_network + assign_tasks with derived seed streams.
Scenario make_scenario(const GeometryConfig& config, const SystemParams& params,
                       std::uint64_t seed);

// Versioned text serialization; round trip is byte-exact.
std::string serialize_scenario(const Scenario& sc);
Scenario parse_scenario(const std::string& text);
void save_scenario(const Scenario& sc, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace mecsim
