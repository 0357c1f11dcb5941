#pragma once

// Image-source surrogate for the flip-chip package.
//
// Stack, bottom to top: interconnect conductor (z = 0), silicon [0, T_s], heat spreader
// [T_s, T_s + T_h], heat-sink conductor. Lateral walls bound the chip at x, y in {0, chip_side}.
// Vertical ray histories are enumerated through the layered stack; lateral wall reflections
// are handled with mirror images. Each combination is unfolded into a straight line whose
// length is split between layers in proportion to the vertical distance travelled in each.
// Taps carry 1/d spreading (Friis, unity-gain isotropic antennas), exp(-alpha*l) material
// loss, interface/conductor coefficients and the carrier phase of the optical length.

#include "pkgwave/channel.hpp"
#include "pkgwave/package.hpp"

#include <cstddef>
#include <vector>

namespace pkgwave {

enum class CoefficientMode {
    normal_incidence, // Fresnel at normal incidence for every interaction
    angle_dependent,  // TE Fresnel at the unfolded ray angle (total internal reflection allowed)
};

struct SurrogateOptions {
    std::size_t max_order = 12; // reflections (vertical + lateral)
    double floor_db = 60.0;     // keep paths within this many dB of the strongest
    CoefficientMode mode = CoefficientMode::normal_incidence;

    void validate() const;
};

struct RayPath {
    std::vector<double> layer_lengths; // geometric length per stack layer, m
    std::size_t bounce_count = 0;
    std::size_t lateral_bounces = 0;
    cplx amplitude{0.0, 0.0};
    double delay = 0.0; // s
    bool direct = false;
};

// All ray paths between tx and rx up to max_order reflections, ordered by (delay, bounce_count).
// The direct path is always returned; every other path lies within floor_db of the strongest.
std::vector<RayPath> enumerate_images(const PackageConfig& cfg, const Position& tx, const Position& rx,
                                      std::size_t max_order, double floor_db,
                                      CoefficientMode mode = CoefficientMode::normal_incidence);

// One impulse response per ordered pair. Pairs (i, j) and (j, i) share a single evaluation.
ChannelMatrix synth_channel(const PackageConfig& cfg, const AntennaGrid& grid, const FrequencyBand& band,
                            const SurrogateOptions& options = {}, bool allow_out_of_band = false);

void to_json(nlohmann::json& j, const SurrogateOptions& o);
void from_json(const nlohmann::json& j, SurrogateOptions& o);

} // namespace pkgwave
