#pragma once

#include "pkgwave/chan_model.hpp"
#include "pkgwave/metrics.hpp"
#include "pkgwave/optimize.hpp"
#include "pkgwave/package.hpp"
#include "pkgwave/phy.hpp"

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pkgwave {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_config = 2,
    exit_parse = 3,
    exit_numeric = 4,
    exit_io = 5,
};

struct GridSpec {
    std::size_t rows = 4;
    std::size_t cols = 4;
    double height_fraction = 0.5;
};

struct BandSpec {
    std::optional<double> start; // explicit band; otherwise carrier +- width / 2
    std::optional<double> stop;
    double width = 10e9;
    std::size_t points = 201;
    bool allow_out_of_range = false;

    FrequencyBand resolve(double carrier) const;
};

struct MetricsSpec {
    double bc_constant = 1.0;
    std::optional<double> d0;
    WindowSpec window;
};

struct OptimizeSpec {
    DesignBounds bounds;
    SweepSteps steps{7, 9, 7};
    SweepSteps pilot{4, 4, 4};
    std::vector<double> weights{0.0, 0.5, 1.0};
    AnnealSchedule schedule;
    double epsilon = 0.01;
    std::size_t budget = 0;
};

struct LinkSpec {
    std::string axis = "ebn0";
    std::optional<std::pair<std::size_t, std::size_t>> pair;
    std::vector<double> ebn0_db;
    std::vector<double> rates;
    std::vector<double> duties;
    std::vector<std::size_t> ks;
    double fixed_ebn0_db = 20.0;
    std::size_t k = 8;
    std::size_t memory = 6;
    std::uint64_t mc_bits = 0;
};

struct RunConfig {
    PackageConfig package;
    GridSpec grid;
    BandSpec band;
    SurrogateOptions surrogate;
    MetricsSpec metrics;
    OptimizeSpec optimize;
    PhyConfig phy;
    LinkSpec link;
    bool write_archive = false;
};

// Unknown keys and type errors raise ConfigError naming the JSON path.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

int run_cli(int argc, char** argv);

} // namespace pkgwave
