#pragma once

// Random fixtures and independent oracles shared by the unit suites and the acceptance run.

#include "pkgwave/archive.hpp"
#include "pkgwave/digest.hpp"
#include "pkgwave/error.hpp"
#include "pkgwave/metrics.hpp"
#include "pkgwave/touchstone.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

using pkgwave::cplx;

inline double rel(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline pkgwave::ImpulseResponse random_taps(std::mt19937_64& rng, std::size_t n, double max_delay)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    pkgwave::ImpulseResponse h;
    for (std::size_t k = 0; k < n; ++k) {
        h.taps.push_back({max_delay * u(rng), {g(rng), g(rng)}});
    }
    std::sort(h.taps.begin(), h.taps.end(), [](const auto& a, const auto& b) { return a.delay < b.delay; });
    return h;
}

// Power-weighted mean delay and RMS spread in extended precision, straight from the definition.
inline std::pair<long double, long double> moments_oracle(const pkgwave::ImpulseResponse& h)
{
    long double p = 0, m1 = 0;
    for (const auto& t : h.taps) {
        const long double w = std::norm(std::complex<long double>(t.amplitude.real(), t.amplitude.imag()));
        p += w;
        m1 += w * t.delay;
    }
    const long double mean = m1 / p;
    long double m2 = 0;
    for (const auto& t : h.taps) {
        const long double w = std::norm(std::complex<long double>(t.amplitude.real(), t.amplitude.imag()));
        m2 += w * (t.delay - mean) * (t.delay - mean);
    }
    return {mean, std::sqrt(m2 / p)};
}

// Magnitude-only response on a random non-uniform grid plus a band strictly inside it.
struct LossCase {
    pkgwave::FrequencyResponse fr;
    pkgwave::FrequencyBand band;
};

inline LossCase random_loss_case(std::mt19937_64& rng, std::size_t points)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LossCase c;
    c.fr.has_phase = false;
    double f = 60e9;
    for (std::size_t k = 0; k < points; ++k) {
        c.fr.frequencies.push_back(f);
        c.fr.power.push_back(1e-6 + u(rng));
        f += 1e8 * (0.5 + u(rng));
    }
    const auto& fs = c.fr.frequencies;
    c.band.start = fs.front() + (fs[1] - fs[0]) * u(rng);
    c.band.stop = fs.back() - (fs[points - 1] - fs[points - 2]) * u(rng);
    c.band.points = 2;
    return c;
}

// Band-averaged loss of the piecewise-linear |H|^2 by 2-point Gauss-Legendre per segment,
// which is exact for lines.
inline double loss_oracle(const LossCase& c)
{
    const auto& fs = c.fr.frequencies;
    const auto& pw = c.fr.power;
    const std::size_t m = fs.size();
    const double lo = c.band.start, hi = c.band.stop;
    auto value = [&](double x) {
        const auto it = std::upper_bound(fs.begin(), fs.end(), x);
        const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - fs.begin()), 1, m - 1);
        const double t = (x - fs[k - 1]) / (fs[k] - fs[k - 1]);
        return pw[k - 1] + t * (pw[k] - pw[k - 1]);
    };
    std::vector<double> knots{lo};
    for (double x : fs) {
        if (x > lo && x < hi) {
            knots.push_back(x);
        }
    }
    knots.push_back(hi);
    long double integral = 0;
    const double g = 1.0 / std::sqrt(3.0);
    for (std::size_t k = 1; k < knots.size(); ++k) {
        const double mid = 0.5 * (knots[k] + knots[k - 1]), r = 0.5 * (knots[k] - knots[k - 1]);
        integral += r * (value(mid - g * r) + value(mid + g * r));
    }
    return -10.0 * std::log10(static_cast<double>(integral / (hi - lo)));
}

inline pkgwave::SParameterSet random_sparams(std::mt19937_64& rng, std::size_t ports, std::size_t points)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    pkgwave::SParameterSet sp;
    sp.resize(ports, points);
    double f = 60e9 + 1e9 * std::abs(u(rng));
    for (std::size_t k = 0; k < points; ++k) {
        sp.frequencies[k] = f;
        f += 1e7 * (1.0 + std::abs(u(rng)) * 100.0);
    }
    for (auto& v : sp.values) {
        v = cplx(u(rng), u(rng)) * std::pow(10.0, 3.0 * u(rng) - 1.0);
    }
    return sp;
}

inline bool same_sparams(const pkgwave::SParameterSet& a, const pkgwave::SParameterSet& b, double tol)
{
    if (a.ports != b.ports || a.size() != b.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(a.frequencies[k] - b.frequencies[k]) > tol * b.frequencies[k]) {
            return false;
        }
    }
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        if (std::abs(a.values[k] - b.values[k]) > tol * std::abs(b.values[k])) {
            return false;
        }
    }
    return true;
}

inline pkgwave::ChannelArchive random_archive(std::mt19937_64& rng, std::size_t antennas)
{
    using namespace pkgwave;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    ChannelArchive a;
    a.provenance = u(rng) < 0.5 ? Provenance::surrogate : Provenance::ingested;
    a.channel.antenna_count = antennas;
    a.channel.carrier_frequency = 60e9 + 60e9 * u(rng);
    a.channel.band = FrequencyBand::around(a.channel.carrier_frequency, 10e9, 11 + antennas);
    for (std::size_t i = 0; i < antennas; ++i) {
        for (std::size_t j = 0; j < antennas; ++j) {
            if (i == j || u(rng) < 0.3) {
                continue;
            }
            ImpulseResponse h;
            h.tx = i;
            h.rx = j;
            double d = 0.0;
            for (int k = 0; k < 1 + static_cast<int>(20 * u(rng)); ++k) {
                d += 1e-12 * u(rng) * std::pow(10.0, 3 * u(rng));
                h.taps.push_back({d, {g(rng) * 1e-3, g(rng) * 1e-5}});
            }
            a.channel.responses.push_back(h);
            a.channel.distances.push_back(u(rng) < 0.2 ? std::nan("") : 1e-3 * (1 + 20 * u(rng)));
        }
    }
    if (a.channel.responses.empty()) {
        ImpulseResponse h;
        h.tx = 0;
        h.rx = 1;
        h.taps = {{0.0, {1.0, 0.0}}};
        a.channel.responses.push_back(h);
        a.channel.distances.push_back(1e-3);
    }
    for (std::size_t k = 0; k < antennas; ++k) {
        a.port_map.push_back(antennas - 1 - k);
    }
    return a;
}

// Tap-by-tap comparison; NaN distances must match as NaN.
inline bool same_matrix(const pkgwave::ChannelMatrix& a, const pkgwave::ChannelMatrix& b, double tol)
{
    if (a.antenna_count != b.antenna_count || a.responses.size() != b.responses.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.responses.size(); ++k) {
        const auto& x = a.responses[k];
        const auto& y = b.responses[k];
        if (x.tx != y.tx || x.rx != y.rx || x.taps.size() != y.taps.size() || x.sample_rate != y.sample_rate) {
            return false;
        }
        for (std::size_t t = 0; t < x.taps.size(); ++t) {
            if (std::abs(x.taps[t].delay - y.taps[t].delay) > tol * std::abs(y.taps[t].delay) ||
                std::abs(x.taps[t].amplitude - y.taps[t].amplitude) > tol * std::abs(y.taps[t].amplitude)) {
                return false;
            }
        }
        const double da = a.distances[k], db = b.distances[k];
        if (std::isnan(da) != std::isnan(db) || (!std::isnan(da) && std::abs(da - db) > tol * db)) {
            return false;
        }
    }
    return true;
}

// Structured error code raised by the matching reader, "ok" when the file loads, or
// "other:<message>" for a non-parse failure.
inline std::string code_of_file(const std::filesystem::path& p)
{
    using namespace pkgwave;
    try {
        const std::string text = read_file(p.string());
        const std::string ext = p.extension().string();
        if (ext == ".json") {
            archive_from_string(text);
        }
        else if (ext == ".csv") {
            read_impulse_csv(text);
        }
        else {
            parse_touchstone(text, ports_from_extension(p.string()));
        }
    }
    catch (const ParseError& e) {
        return e.code();
    }
    catch (const Error& e) {
        return std::string("other:") + e.what();
    }
    return "ok";
}

} // namespace fixtures
