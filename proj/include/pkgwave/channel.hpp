#pragma once

#include "pkgwave/package.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

namespace pkgwave {

using cplx = std::complex<double>;

struct Tap {
    double delay = 0.0; // s
    cplx amplitude{0.0, 0.0};

    bool operator==(const Tap&) const = default;
};

// h_ij as a list of delayed complex taps (baseband, referenced to the carrier).
// sample_rate == 0 means a sparse tap list; otherwise taps sit on the k / sample_rate grid.
struct ImpulseResponse {
    std::size_t tx = 0;
    std::size_t rx = 0;
    std::vector<Tap> taps;
    double sample_rate = 0.0;

    bool rasterized() const { return sample_rate > 0.0; }
    double energy() const;
    // Checks delays are finite, non-negative and ascending.
    void validate() const;

    bool operator==(const ImpulseResponse&) const = default;
};

// Per ordered antenna pair channel data.
struct ChannelMatrix {
    std::size_t antenna_count = 0;
    double carrier_frequency = 0.0;
    FrequencyBand band;
    std::vector<ImpulseResponse> responses; // ordered pairs (i, j), i != j
    std::vector<double> distances;          // one per response, m (NaN when unknown)

    bool empty() const { return responses.empty(); }
    // nullptr when the pair is absent.
    const ImpulseResponse* find(std::size_t tx, std::size_t rx) const;
    std::optional<std::size_t> index_of(std::size_t tx, std::size_t rx) const;

    bool operator==(const ChannelMatrix&) const = default;
};

// Complex (or power-only) frequency response of one pair.
struct FrequencyResponse {
    std::size_t tx = 0;
    std::size_t rx = 0;
    std::vector<double> frequencies;
    std::vector<cplx> response;    // valid when has_phase
    std::vector<double> power;     // |H|^2, always filled
    bool has_phase = true;
    double gain_tx = 1.0;
    double gain_rx = 1.0;

    std::size_t size() const { return frequencies.size(); }
};

} // namespace pkgwave
