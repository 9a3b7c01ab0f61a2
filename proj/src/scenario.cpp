#include "mecsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mecsim/kv.hpp"
#include "mecsim/rng.hpp"

namespace mecsim {

double los_probability(double d) {
    if (d <= 0) throw std::domain_error("los_probability: d must be positive");
    double p = std::min(18.0 / d, 1.0) * (1.0 - std::exp(-d / 36.0)) + std::exp(-d / 36.0);
    return std::min(1.0, std::max(0.0, p));
}

double path_loss_db(double d, double fq_ghz, bool los) {
    if (d <= 0 || fq_ghz <= 0) throw std::domain_error("path_loss_db: inputs must be positive");
    if (los) return 22.0 * std::log10(d) + 28.0 + 20.0 * std::log10(fq_ghz);
    return 36.7 * std::log10(d) + 22.7 + 26.0 * std::log10(fq_ghz);
}

double expected_channel_gain(double d, double fq_ghz) {
    double p = los_probability(d);
    double loss = p * std::pow(10.0, path_loss_db(d, fq_ghz, true) / 10.0) +
                  (1.0 - p) * std::pow(10.0, path_loss_db(d, fq_ghz, false) / 10.0);
    return 1.0 / loss;
}

// Stations sit on an offset grid: rows of equally spaced sites with odd rows
// shifted by a quarter cell, the closest a K=4 deployment gets to a hex
// pattern inside a square.
static std::vector<Position> station_grid(const GeometryConfig& g) {
    int rows = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(g.num_sbs))));
    int cols = (g.num_sbs + rows - 1) / rows;
    double w = g.area_side / cols;
    double h = g.area_side / rows;
    std::vector<Position> out;
    for (int r = 0; r < rows && static_cast<int>(out.size()) < g.num_sbs; ++r) {
        for (int c = 0; c < cols && static_cast<int>(out.size()) < g.num_sbs; ++c) {
            double x = (c + 0.5) * w + (r % 2 == 1 ? 0.25 * w : 0.0);
            out.push_back({x, (r + 0.5) * h});
        }
    }
    return out;
}

Scenario place_network(const GeometryConfig& config, const SystemParams& params,
                       std::uint64_t seed) {
    config.validate();
    params.validate();
    Scenario sc;
    sc.geom = config;
    sc.seed = seed;
    sc.sbs_pos = station_grid(config);

    Rng rng(seed);
    const int U = config.num_users;
    const int K = config.num_sbs;
    sc.user_pos.reserve(U);
    const long long max_tries = 10000LL * U + 10000;
    long long tries = 0;
    while (static_cast<int>(sc.user_pos.size()) < U) {
        if (++tries > max_tries)
            throw std::runtime_error("place_network: cannot place users outside exclusion radius");
        Position p{rng.uniform(0.0, config.area_side), rng.uniform(0.0, config.area_side)};
        bool ok = true;
        for (const auto& s : sc.sbs_pos) {
            double dx = p.x - s.x, dy = p.y - s.y;
            if (std::sqrt(dx * dx + dy * dy) < config.min_user_sbs_distance) {
                ok = false;
                break;
            }
        }
        if (ok) sc.user_pos.push_back(p);
    }

    sc.dist.resize(U, K);
    sc.gain.resize(U, K);
    sc.assoc.resize(U);
    for (int u = 0; u < U; ++u) {
        int best = 0;
        for (int k = 0; k < K; ++k) {
            double dx = sc.user_pos[u].x - sc.sbs_pos[k].x;
            double dy = sc.user_pos[u].y - sc.sbs_pos[k].y;
            double d = std::sqrt(dx * dx + dy * dy);
            sc.dist(u, k) = d;
            sc.gain(u, k) = expected_channel_gain(d, params.carrier_ghz);
            if (sc.dist(u, k) < sc.dist(u, best)) best = k;
        }
        sc.assoc[u] = best;
    }
    sc.cell_users.assign(K, {});
    for (int u = 0; u < U; ++u) sc.cell_users[sc.assoc[u]].push_back(u);
    return sc;
}

void assign_tasks(Scenario& sc, const SystemParams& params, std::uint64_t seed) {
    Rng rng(seed);
    const int U = sc.num_users();
    const int M = static_cast<int>(params.task_types.size());
    sc.task_type.resize(U);
    sc.volume.resize(U);
    for (int u = 0; u < U; ++u) {
        sc.task_type[u] = static_cast<int>(rng.integer(M));
        sc.volume[u] = rng.uniform(params.task_volume_lo, params.task_volume_hi);
    }
}

Scenario make_scenario(const GeometryConfig& config, const SystemParams& params,
                       std::uint64_t seed) {
    Scenario sc = place_network(config, params, seed);
    // independent stream for the task draw so geometry is reusable
    assign_tasks(sc, params, seed ^ 0x9e3779b97f4a7c15ULL);
    return sc;
}

static const char* kFormatTag = "mec-scenario";
static const int kFormatVersion = 1;

std::string serialize_scenario(const Scenario& sc) {
    KvFile kv;
    kv.set("format", kFormatTag);
    kv.set_int("version", kFormatVersion);
    kv.set_int("seed", static_cast<long long>(sc.seed));
    kv.set_double("area_side", sc.geom.area_side);
    kv.set_int("num_sbs", sc.geom.num_sbs);
    kv.set_int("num_users", sc.geom.num_users);
    kv.set_double("min_user_sbs_distance", sc.geom.min_user_sbs_distance);
    std::vector<double> v;
    for (const auto& p : sc.sbs_pos) v.push_back(p.x);
    kv.set_doubles("sbs_x", v);
    v.clear();
    for (const auto& p : sc.sbs_pos) v.push_back(p.y);
    kv.set_doubles("sbs_y", v);
    v.clear();
    for (const auto& p : sc.user_pos) v.push_back(p.x);
    kv.set_doubles("user_x", v);
    v.clear();
    for (const auto& p : sc.user_pos) v.push_back(p.y);
    kv.set_doubles("user_y", v);
    kv.set_ints("assoc", sc.assoc);
    kv.set_ints("task_type", sc.task_type);
    kv.set_doubles("volume", sc.volume);
    // gains stored row-major (user-major) so replay does not depend on the
    // channel code staying bit-identical
    v.clear();
    for (int u = 0; u < sc.num_users(); ++u)
        for (int k = 0; k < sc.num_sbs(); ++k) v.push_back(sc.gain(u, k));
    kv.set_doubles("gain", v);
    return kv.serialize();
}

Scenario parse_scenario(const std::string& text) {
    KvFile kv = KvFile::parse(text);
    if (!kv.has("format") || kv.get("format") != kFormatTag)
        throw std::runtime_error("not a scenario file");
    if (kv.get_int("version") != kFormatVersion)
        throw std::runtime_error("unsupported scenario version " + kv.get("version"));
    Scenario sc;
    sc.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
    sc.geom.area_side = kv.get_double("area_side");
    sc.geom.num_sbs = static_cast<int>(kv.get_int("num_sbs"));
    sc.geom.num_users = static_cast<int>(kv.get_int("num_users"));
    sc.geom.min_user_sbs_distance = kv.get_double("min_user_sbs_distance");
    auto sx = kv.get_doubles("sbs_x"), sy = kv.get_doubles("sbs_y");
    auto ux = kv.get_doubles("user_x"), uy = kv.get_doubles("user_y");
    if (static_cast<int>(sx.size()) != sc.geom.num_sbs ||
        static_cast<int>(ux.size()) != sc.geom.num_users)
        throw std::runtime_error("scenario file: inconsistent counts");
    for (size_t i = 0; i < sx.size(); ++i) sc.sbs_pos.push_back({sx[i], sy[i]});
    for (size_t i = 0; i < ux.size(); ++i) sc.user_pos.push_back({ux[i], uy[i]});
    sc.assoc = kv.get_ints("assoc");
    sc.task_type = kv.get_ints("task_type");
    sc.volume = kv.get_doubles("volume");
    auto g = kv.get_doubles("gain");
    const int U = sc.num_users(), K = sc.num_sbs();
    if (static_cast<int>(sc.assoc.size()) != U || static_cast<int>(sc.task_type.size()) != U ||
        static_cast<int>(sc.volume.size()) != U || static_cast<int>(g.size()) != U * K)
        throw std::runtime_error("scenario file: inconsistent arrays");
    sc.dist.resize(U, K);
    sc.gain.resize(U, K);
    for (int u = 0; u < U; ++u) {
        for (int k = 0; k < K; ++k) {
            double dx = sc.user_pos[u].x - sc.sbs_pos[k].x;
            double dy = sc.user_pos[u].y - sc.sbs_pos[k].y;
            sc.dist(u, k) = std::sqrt(dx * dx + dy * dy);
            sc.gain(u, k) = g[static_cast<size_t>(u) * K + k];
        }
        if (sc.assoc[u] < 0 || sc.assoc[u] >= K)
            throw std::runtime_error("scenario file: bad association");
    }
    sc.cell_users.assign(K, {});
    for (int u = 0; u < U; ++u) sc.cell_users[sc.assoc[u]].push_back(u);
    return sc;
}

void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << serialize_scenario(sc);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace mecsim
