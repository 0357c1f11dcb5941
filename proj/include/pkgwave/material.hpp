#pragma once

#include <string>

namespace pkgwave {

struct Material {
    // Sentinel resistivity for an ideal conductor. Conductors only appear as boundaries.
    static constexpr double kPerfectConductor = -1.0;

    std::string name;
    double rel_permittivity = 1.0;
    double resistivity = 0.0; // Ohm*m, 0 = lossless dielectric

    bool is_conductor() const noexcept { return resistivity == kPerfectConductor; }
    bool is_lossless() const noexcept { return resistivity == 0.0; }
    double refractive_index() const;

    // Throws ConfigError when the invariants do not hold.
    void validate() const;

    static Material silicon();         // 10 Ohm*cm bulk, eps_r = 11.9
    static Material aluminum_nitride(); // eps_r = 9, lossless
    static Material perfect_conductor(std::string name = "pec");

    bool operator==(const Material&) const = default;
};

// Attenuation constant (Np/m) of a homogeneous lossy dielectric at frequency f (Hz),
//   alpha = w * sqrt(mu*eps/2) * sqrt(sqrt(1 + (sigma/(w*eps))^2) - 1).
// Exactly 0 for lossless media. Throws for conductors and f <= 0.
double material_attenuation(const Material& m, double frequency_hz);

} // namespace pkgwave
