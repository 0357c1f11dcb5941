#include "pkgwave/package.hpp"

#include "pkgwave/error.hpp"
#include "pkgwave/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pkgwave {

namespace {

bool finite_nonneg(double v)
{
    return std::isfinite(v) && v >= 0.0;
}

} // namespace

void PackageConfig::validate() const
{
    if (!finite_nonneg(silicon_thickness) || silicon_thickness == 0.0) {
        throw ConfigError("silicon_thickness must be > 0");
    }
    if (!finite_nonneg(spreader_thickness)) {
        throw ConfigError("spreader_thickness must be >= 0");
    }
    if (!(carrier_frequency > 0.0) || !std::isfinite(carrier_frequency)) {
        throw ConfigError("carrier_frequency must be > 0");
    }
    if (!(chip_side > 0.0) || !std::isfinite(chip_side)) {
        throw ConfigError("chip_side must be > 0");
    }
    materials.silicon.validate();
    materials.spreader.validate();
    if (materials.silicon.is_conductor() || materials.spreader.is_conductor()) {
        throw ConfigError("stack layers must be dielectrics");
    }
}

void DesignBounds::validate() const
{
    auto check = [](double lo, double hi, const char* what) {
        if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi)) {
            throw ConfigError(std::string("design bounds: invalid ") + what + " range");
        }
    };
    check(silicon_min, silicon_max, "silicon_thickness");
    check(spreader_min, spreader_max, "spreader_thickness");
    check(frequency_min, frequency_max, "carrier_frequency");
    if (silicon_min <= 0.0 || spreader_min < 0.0 || frequency_min <= 0.0) {
        throw ConfigError("design bounds: thicknesses and frequency must be positive");
    }
}

double AntennaGrid::distance(std::size_t i, std::size_t j) const
{
    const auto& a = positions.at(i);
    const auto& b = positions.at(j);
    return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

double AntennaGrid::lateral_distance(std::size_t i, std::size_t j) const
{
    const auto& a = positions.at(i);
    const auto& b = positions.at(j);
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double AntennaGrid::min_separation() const
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t j = i + 1; j < size(); ++j) {
            best = std::min(best, distance(i, j));
        }
    }
    return best;
}

void AntennaGrid::validate() const
{
    if (positions.empty()) {
        throw ConfigError("antenna grid is empty");
    }
    for (const auto& p : positions) {
        for (double c : p) {
            if (!std::isfinite(c)) {
                throw ConfigError("antenna grid: non-finite coordinate");
            }
        }
    }
    if (size() > 1 && !(min_separation() > 0.0)) {
        throw ConfigError("antenna grid: coincident antennas");
    }
}

AntennaGrid AntennaGrid::homogeneous(const PackageConfig& cfg, std::size_t rows, std::size_t cols,
                                     double height_fraction)
{
    if (rows == 0 || cols == 0) {
        throw ConfigError("antenna grid needs at least one row and column");
    }
    if (!(height_fraction >= 0.0 && height_fraction <= 1.0)) {
        throw ConfigError("antenna height_fraction must lie in [0, 1]");
    }
    AntennaGrid g;
    g.rows = rows;
    g.cols = cols;
    const double dx = cfg.chip_side / static_cast<double>(cols);
    const double dy = cfg.chip_side / static_cast<double>(rows);
    const double z = height_fraction * cfg.silicon_thickness;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            g.positions.push_back({(static_cast<double>(c) + 0.5) * dx, (static_cast<double>(r) + 0.5) * dy, z});
        }
    }
    return g;
}

double FrequencyBand::step() const
{
    return (stop - start) / static_cast<double>(points - 1);
}

double FrequencyBand::frequency(std::size_t k) const
{
    return start + step() * static_cast<double>(k);
}

void FrequencyBand::validate(bool allow_out_of_range) const
{
    if (!(std::isfinite(start) && std::isfinite(stop) && start > 0.0 && start < stop)) {
        throw ConfigError("frequency band: need 0 < start < stop");
    }
    if (points < 2) {
        throw ConfigError("frequency band: need at least 2 points");
    }
    if (!allow_out_of_range && (start < kMinAllowed * (1 - 1e-12) || stop > kMaxAllowed * (1 + 1e-12))) {
        throw ConfigError("frequency band outside the 60-120 GHz window");
    }
}

FrequencyBand FrequencyBand::around(double fc, double width, std::size_t points)
{
    FrequencyBand b;
    b.start = std::max(kMinAllowed, fc - width / 2);
    b.stop = std::min(kMaxAllowed, fc + width / 2);
    b.points = points;
    return b;
}

// ---------------------------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const Material& m)
{
    j = {{"name", m.name}, {"rel_permittivity", m.rel_permittivity}};
    if (m.is_conductor()) {
        j["resistivity"] = "perfect_conductor";
    } else {
        j["resistivity"] = m.resistivity;
    }
}

namespace {

Material material_at(const nlohmann::json& j, const std::string& path)
{
    jsonu::object(j, path);
    Material m;
    m.name = jsonu::string_or(j, "name", "", path);
    m.rel_permittivity = jsonu::number(j, "rel_permittivity", path);
    auto it = j.find("resistivity");
    if (it == j.end()) {
        jsonu::fail(jsonu::join(path, "resistivity"), "missing required value");
    }
    if (it->is_string()) {
        if (it->get<std::string>() != "perfect_conductor") {
            jsonu::fail(jsonu::join(path, "resistivity"), "expected a number or \"perfect_conductor\"");
        }
        m.resistivity = Material::kPerfectConductor;
    } else if (it->is_number()) {
        m.resistivity = it->get<double>();
    } else {
        jsonu::fail(jsonu::join(path, "resistivity"), "expected a number or \"perfect_conductor\"");
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        jsonu::fail(path, e.what());
    }
    return m;
}

BoundaryModel boundaries_at(const nlohmann::json& j, const std::string& path)
{
    BoundaryModel b;
    b.top_conductor = jsonu::boolean_or(j, "top_conductor", true, path);
    b.bottom_conductor = jsonu::boolean_or(j, "bottom_conductor", true, path);
    const auto lat = jsonu::string_or(j, "lateral_walls", "conducting", path);
    if (lat == "conducting") {
        b.lateral_walls = LateralBoundary::conducting;
    } else if (lat == "absorbing") {
        b.lateral_walls = LateralBoundary::absorbing;
    } else {
        jsonu::fail(jsonu::join(path, "lateral_walls"), "expected \"conducting\" or \"absorbing\"");
    }
    return b;
}

} // namespace

void from_json(const nlohmann::json& j, Material& m)
{
    m = material_at(j, "");
}

void to_json(nlohmann::json& j, const BoundaryModel& b)
{
    j = {{"top_conductor", b.top_conductor},
         {"bottom_conductor", b.bottom_conductor},
         {"lateral_walls", b.lateral_walls == LateralBoundary::conducting ? "conducting" : "absorbing"}};
}

void from_json(const nlohmann::json& j, BoundaryModel& b)
{
    b = boundaries_at(j, "");
}

void to_json(nlohmann::json& j, const PackageConfig& c)
{
    j = {{"silicon_thickness", c.silicon_thickness},
         {"spreader_thickness", c.spreader_thickness},
         {"carrier_frequency", c.carrier_frequency},
         {"chip_side", c.chip_side},
         {"materials", {{"silicon", c.materials.silicon}, {"spreader", c.materials.spreader}}},
         {"boundaries", c.boundaries}};
}

PackageConfig package_config_from_json(const nlohmann::json& j, const std::string& path)
{
    jsonu::object(j, path);
    PackageConfig c;
    c.silicon_thickness = jsonu::number_or(j, "silicon_thickness", c.silicon_thickness, path);
    c.spreader_thickness = jsonu::number_or(j, "spreader_thickness", c.spreader_thickness, path);
    c.carrier_frequency = jsonu::number_or(j, "carrier_frequency", c.carrier_frequency, path);
    c.chip_side = jsonu::number_or(j, "chip_side", c.chip_side, path);
    if (auto it = j.find("materials"); it != j.end()) {
        const auto mpath = jsonu::join(path, "materials");
        jsonu::object(*it, mpath);
        if (it->contains("silicon")) {
            c.materials.silicon = material_at(it->at("silicon"), jsonu::join(mpath, "silicon"));
        }
        if (it->contains("spreader")) {
            c.materials.spreader = material_at(it->at("spreader"), jsonu::join(mpath, "spreader"));
        }
    }
    if (auto it = j.find("boundaries"); it != j.end()) {
        c.boundaries = boundaries_at(*it, jsonu::join(path, "boundaries"));
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        jsonu::fail(path, e.what());
    }
    return c;
}

void from_json(const nlohmann::json& j, PackageConfig& c)
{
    c = package_config_from_json(j, "");
}

void to_json(nlohmann::json& j, const AntennaGrid& g)
{
    j = {{"rows", g.rows}, {"cols", g.cols}, {"positions", g.positions}};
}

void from_json(const nlohmann::json& j, AntennaGrid& g)
{
    jsonu::object(j, "");
    g.rows = jsonu::count_or(j, "rows", 0, "");
    g.cols = jsonu::count_or(j, "cols", 0, "");
    if (!j.contains("positions") || !j.at("positions").is_array()) {
        jsonu::fail("/positions", "expected an array of [x, y, z]");
    }
    g.positions.clear();
    for (std::size_t k = 0; k < j.at("positions").size(); ++k) {
        const auto& p = j.at("positions").at(k);
        if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number()) {
            jsonu::fail("/positions/" + std::to_string(k), "expected [x, y, z]");
        }
        g.positions.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
}

void to_json(nlohmann::json& j, const FrequencyBand& b)
{
    j = {{"start", b.start}, {"stop", b.stop}, {"points", b.points}};
}

void from_json(const nlohmann::json& j, FrequencyBand& b)
{
    b.start = jsonu::number(j, "start", "");
    b.stop = jsonu::number(j, "stop", "");
    b.points = jsonu::count_or(j, "points", 201, "");
}

void to_json(nlohmann::json& j, const DesignBounds& b)
{
    j = {{"silicon_thickness", {b.silicon_min, b.silicon_max}},
         {"spreader_thickness", {b.spreader_min, b.spreader_max}},
         {"carrier_frequency", {b.frequency_min, b.frequency_max}}};
}

void from_json(const nlohmann::json& j, DesignBounds& b)
{
    auto range = [&](const char* key, double& lo, double& hi) {
        if (!j.contains(key)) {
            return;
        }
        const auto& r = j.at(key);
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
            jsonu::fail(std::string("/") + key, "expected [min, max]");
        }
        lo = r[0].get<double>();
        hi = r[1].get<double>();
    };
    range("silicon_thickness", b.silicon_min, b.silicon_max);
    range("spreader_thickness", b.spreader_min, b.spreader_max);
    range("carrier_frequency", b.frequency_min, b.frequency_max);
}

} // namespace pkgwave
