#pragma once

#include "pkgwave/channel.hpp"

#include <cstddef>
#include <vector>

namespace pkgwave {

// N-port scattering parameters on a frequency list. Matrix entries are stored row-major per
// frequency: s(k, row, col) is S_{row+1, col+1} at frequencies[k], ports 0-based.
struct SParameterSet {
    std::size_t ports = 0;
    double reference_impedance = 50.0;
    std::vector<double> frequencies;
    std::vector<cplx> values;

    std::size_t size() const { return frequencies.size(); }
    cplx& s(std::size_t k, std::size_t row, std::size_t col) { return values[(k * ports + row) * ports + col]; }
    cplx s(std::size_t k, std::size_t row, std::size_t col) const { return values[(k * ports + row) * ports + col]; }

    void resize(std::size_t port_count, std::size_t freq_count);
    // ports > 0, strictly increasing finite frequencies, consistent storage.
    void validate() const;

    bool operator==(const SParameterSet&) const = default;
};

} // namespace pkgwave
