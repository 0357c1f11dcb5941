#include "pkgwave/material.hpp"

#include "pkgwave/constants.hpp"
#include "pkgwave/error.hpp"

#include <cmath>

namespace pkgwave {

double Material::refractive_index() const
{
    return std::sqrt(rel_permittivity);
}

void Material::validate() const
{
    if (is_conductor()) {
        return;
    }
    if (!(rel_permittivity >= 1.0) || !std::isfinite(rel_permittivity)) {
        throw ConfigError("material '" + name + "': rel_permittivity must be >= 1");
    }
    if (!(resistivity >= 0.0) || !std::isfinite(resistivity)) {
        throw ConfigError("material '" + name + "': resistivity must be >= 0");
    }
}

Material Material::silicon()
{
    return {"silicon", 11.9, 0.1};
}

Material Material::aluminum_nitride()
{
    return {"aluminum_nitride", 9.0, 0.0};
}

Material Material::perfect_conductor(std::string name)
{
    return {std::move(name), 1.0, kPerfectConductor};
}

double material_attenuation(const Material& m, double frequency_hz)
{
    if (m.is_conductor()) {
        throw ConfigError("material '" + m.name + "' is a conductor, not a propagation medium");
    }
    if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
        throw ConfigError("material_attenuation: frequency must be > 0");
    }
    m.validate();
    if (m.is_lossless()) {
        return 0.0;
    }
    using namespace constants;
    const double sigma = 1.0 / m.resistivity;
    const double w = 2.0 * pi * frequency_hz;
    const double eps = m.rel_permittivity * eps0;
    const double loss_tangent = sigma / (w * eps);
    // sqrt(1+x^2) - 1 written as x^2 / (sqrt(1+x^2) + 1) to keep precision when x is small.
    const double x2 = loss_tangent * loss_tangent;
    const double inner = x2 / (std::sqrt(1.0 + x2) + 1.0);
    return w * std::sqrt(mu0 * eps / 2.0) * std::sqrt(inner);
}

} // namespace pkgwave
