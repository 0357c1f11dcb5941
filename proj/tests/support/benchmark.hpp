#pragma once

#include "pkgwave/optimize.hpp"

#include <array>
#include <cmath>

namespace bench {

// Sum of Gaussian bumps over the unit cube mapped onto the design bounds: one global maximum
// and three lower local maxima, all inside the bounds.
struct Bump {
    std::array<double, 3> centre;
    double height;
    double width;
};

inline constexpr std::array<Bump, 4> kBumps{{
    {{0.72, 0.64, 0.30}, 4.0, 0.15},
    {{0.20, 0.25, 0.75}, 3.0, 0.12},
    {{0.25, 0.80, 0.20}, 2.6, 0.12},
    {{0.80, 0.15, 0.80}, 2.2, 0.12},
}};

inline std::array<double, 3> unit(const pkgwave::Knobs& k, const pkgwave::DesignBounds& b)
{
    return {(k.silicon_thickness - b.silicon_min) / (b.silicon_max - b.silicon_min),
            (k.spreader_thickness - b.spreader_min) / (b.spreader_max - b.spreader_min),
            (k.carrier_frequency - b.frequency_min) / (b.frequency_max - b.frequency_min)};
}

inline double phi(const pkgwave::Knobs& k, const pkgwave::DesignBounds& b)
{
    const auto x = unit(k, b);
    double v = 1.0;
    for (const auto& bump : kBumps) {
        double r2 = 0.0;
        for (int d = 0; d < 3; ++d) {
            r2 += (x[d] - bump.centre[d]) * (x[d] - bump.centre[d]);
        }
        v += bump.height * std::exp(-r2 / (2.0 * bump.width * bump.width));
    }
    return v;
}

inline pkgwave::DesignPoint point(const pkgwave::Knobs& k, const pkgwave::DesignBounds& b)
{
    pkgwave::DesignPoint p;
    p.knobs = k;
    p.phi = phi(k, b);
    p.raw = {1.0 / p.phi, 1.0 / p.phi};
    return p;
}

// Exhaustive evaluation on the annealer's manufacturing lattice.
inline double dense_grid_max(const pkgwave::DesignBounds& b, const pkgwave::Granularity& g)
{
    double best = 0.0;
    for (double s = b.silicon_min; s <= b.silicon_max + 1e-12; s += g.silicon) {
        for (double h = b.spreader_min; h <= b.spreader_max + 1e-12; h += g.spreader) {
            for (double f = b.frequency_min; f <= b.frequency_max + 1.0; f += g.frequency) {
                best = std::max(best, phi({s, h, f}, b));
            }
        }
    }
    return best;
}

} // namespace bench
