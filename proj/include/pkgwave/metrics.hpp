#pragma once

#include "pkgwave/channel.hpp"
#include "pkgwave/sparams.hpp"

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace pkgwave {

// H_ij(f) from S-parameters with antenna gains:
//   G_i G_j |H|^2 = |S_ji|^2 / ((1 - |S_ii|^2)(1 - |S_jj|^2)).
// The phase of S_ji is carried over to H. i is the transmitting port, j the receiving one.
FrequencyResponse freq_response(const SParameterSet& sp, std::size_t i, std::size_t j, double gain_i = 1.0,
                                double gain_j = 1.0);

// Forward transform of a tap list, H(f) = sum a_k exp(-j 2 pi (f - carrier) tau_k).
FrequencyResponse taps_to_frequency_response(const ImpulseResponse& h, const FrequencyBand& band, double carrier);

enum class WindowKind { rectangular, hann, blackman };

struct WindowSpec {
    WindowKind kind = WindowKind::hann;
    std::size_t zero_pad = 4; // transform length = zero_pad * next_pow2(points)
};

struct InverseResult {
    ImpulseResponse response; // rasterized, delays measured from the band's lowest frequency
    bool minimum_phase = false;
};

// Windowed inverse FFT of a uniformly sampled response. Magnitude-only input goes through a
// minimum-phase (folded cepstrum) reconstruction first. A pure delay maps to a peak of |a|.
InverseResult impulse_from_freq(const FrequencyResponse& fr, const WindowSpec& window = {});

struct PowerDelayProfile {
    std::size_t tx = 0;
    std::size_t rx = 0;
    std::vector<double> delays;
    std::vector<double> powers;
    double mean_delay = 0.0;

    double total_power() const;
};

PowerDelayProfile pdp(const ImpulseResponse& h);
double delay_spread(const PowerDelayProfile& p);

struct PairSpread {
    std::size_t tx = 0;
    std::size_t rx = 0;
    double tau_rms = 0.0;
};

struct DispersionSummary {
    std::vector<PairSpread> pairs;
    double worst_tau_rms = 0.0;
    std::size_t worst_tx = 0;
    std::size_t worst_rx = 0;
    double coherence_bandwidth = 0.0; // constant / worst_tau_rms, +inf for a dispersion-free matrix
    double bc_constant = 1.0;
};

DispersionSummary dispersion_summary(const ChannelMatrix& cm, double bc_constant = 1.0);
// Coherence bandwidth from a worst-case RMS delay spread.
double coherence_bandwidth(double worst_tau_rms, double bc_constant = 1.0);

// -10 log10 of the band-averaged |H|^2 (trapezoidal, linear interpolation at the band edges).
double path_loss_per_pair(const FrequencyResponse& fr, const FrequencyBand& band);

struct LossSample {
    double distance = 0.0; // m
    double loss_db = 0.0;
};

struct PathLossFit {
    double exponent = 0.0; // n
    double l0_db = 0.0;
    double d0 = 0.0; // m
    double residual_rms_db = 0.0;
    std::vector<LossSample> samples;
};

// Least squares of L = 10 n log10(d / d0) + L0.
PathLossFit fit_path_loss(const std::vector<LossSample>& samples, double d0);

struct PairMetrics {
    std::size_t tx = 0;
    std::size_t rx = 0;
    double distance = 0.0;
    double loss_db = 0.0;
    double tau_rms = 0.0;
};

// Per ordered pair loss over cm.band and RMS delay spread.
std::vector<PairMetrics> pair_metrics(const ChannelMatrix& cm);
// Average of loss_db over all rows (L_avg).
double mean_loss(const std::vector<PairMetrics>& rows);
PathLossFit fit_pairs(const std::vector<PairMetrics>& rows, double d0);

void to_json(nlohmann::json& j, const PathLossFit& f);
void to_json(nlohmann::json& j, const DispersionSummary& s);

} // namespace pkgwave
