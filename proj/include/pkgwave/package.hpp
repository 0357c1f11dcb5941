#pragma once

#include "pkgwave/material.hpp"

#include <array>
#include <string>
#include <cstddef>
#include <vector>

#include <json.hpp>

namespace pkgwave {

enum class LateralBoundary { conducting, absorbing };

// Which enclosure faces reflect. A non-conducting face is treated as perfectly absorbing.
struct BoundaryModel {
    bool top_conductor = true;    // heat sink above the spreader
    bool bottom_conductor = true; // interconnect stack / bump plane under the die
    LateralBoundary lateral_walls = LateralBoundary::conducting;

    bool operator==(const BoundaryModel&) const = default;
};

struct PackageMaterials {
    Material silicon = Material::silicon();
    Material spreader = Material::aluminum_nitride();

    bool operator==(const PackageMaterials&) const = default;
};

// Design-time package knobs plus the fixed stack description.
struct PackageConfig {
    double silicon_thickness = 0.7e-3;  // T_s, m
    double spreader_thickness = 0.2e-3; // T_h, m
    double carrier_frequency = 60e9;    // f_c, Hz
    double chip_side = 20e-3;           // m
    PackageMaterials materials;
    BoundaryModel boundaries;

    double stack_height() const { return silicon_thickness + spreader_thickness; }
    void validate() const;

    bool operator==(const PackageConfig&) const = default;
};

// Bounds the optimizer explores.
struct DesignBounds {
    double silicon_min = 0.1e-3, silicon_max = 0.7e-3;
    double spreader_min = 0.0, spreader_max = 0.8e-3;
    double frequency_min = 60e9, frequency_max = 120e9;

    void validate() const;
};

using Position = std::array<double, 3>;

struct AntennaGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Position> positions;

    std::size_t size() const { return positions.size(); }
    double distance(std::size_t i, std::size_t j) const;
    double lateral_distance(std::size_t i, std::size_t j) const;
    double min_separation() const;

    // Throws when empty or when two antennas coincide.
    void validate() const;

    // rows x cols antennas on cell centres of the chip; the vertical position is a fraction of the
    // silicon thickness measured from the bottom conductor.
    static AntennaGrid homogeneous(const PackageConfig& cfg, std::size_t rows = 4, std::size_t cols = 4,
                                   double height_fraction = 0.5);
};

struct FrequencyBand {
    double start = 55e9; // Hz
    double stop = 65e9;
    std::size_t points = 201;

    static constexpr double kMinAllowed = 60e9;
    static constexpr double kMaxAllowed = 120e9;

    double center() const { return 0.5 * (start + stop); }
    double step() const;
    double frequency(std::size_t k) const;

    // Enforces start < stop, points >= 2 and (unless allow_out_of_range) the 60-120 GHz window.
    void validate(bool allow_out_of_range = false) const;

    // Band of the given width centred on fc, clipped to the allowed window.
    static FrequencyBand around(double fc, double width = 10e9, std::size_t points = 201);

    bool operator==(const FrequencyBand&) const = default;
};

// Reads a PackageConfig, reporting schema errors with the JSON path prefixed by `path`.
PackageConfig package_config_from_json(const nlohmann::json& j, const std::string& path);

void to_json(nlohmann::json& j, const Material& m);
void from_json(const nlohmann::json& j, Material& m);
void to_json(nlohmann::json& j, const BoundaryModel& b);
void from_json(const nlohmann::json& j, BoundaryModel& b);
void to_json(nlohmann::json& j, const PackageConfig& c);
void from_json(const nlohmann::json& j, PackageConfig& c);
void to_json(nlohmann::json& j, const AntennaGrid& g);
void from_json(const nlohmann::json& j, AntennaGrid& g);
void to_json(nlohmann::json& j, const FrequencyBand& b);
void from_json(const nlohmann::json& j, FrequencyBand& b);
void to_json(nlohmann::json& j, const DesignBounds& b);
void from_json(const nlohmann::json& j, DesignBounds& b);

} // namespace pkgwave
