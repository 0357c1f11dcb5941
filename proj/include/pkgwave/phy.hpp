#pragma once

// Static-channel OOK link at complex baseband.
//
// Units: T_b = 1 inside the statistic, a '1' pulse carries unit energy in equal-energy mode.
// Receiver: integrate-and-dump over one bit period starting at the strongest rasterized tap,
// projected onto that tap's phase, z = Re(exp(-j phi) * sum_window r) / sps.
// Noise: real Gaussian at the sampler, sigma^2 = E_b / (2 EbN0), where E_b is the received
// energy of an isolated '1' after the channel. For a single-tap channel this gives
// BER = 0.5 erfc(sqrt(EbN0 / 4)), and no channel does better.

#include "pkgwave/channel.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace pkgwave {

struct PhyConfig {
    double symbol_rate = 10e9;          // r_b, bit/s
    double duty = 1.0;                  // (0, 1], 1 = NRZ
    std::size_t samples_per_symbol = 16;
    bool equal_energy = true;           // scale RZ pulses to keep the '1' energy constant
    double rx_power = 0.0;              // P_rx, W (optional)
    double noise_density = 0.0;         // N_0, W/Hz (optional)

    double sample_rate() const { return symbol_rate * static_cast<double>(samples_per_symbol); }
    std::size_t pulse_samples() const;  // round(duty * sps)
    double pulse_amplitude() const;
    double pulse_energy() const;        // in units of T_b
    double bit_energy() const { return rx_power / symbol_rate; } // E_b = P_rx / r_b
    double ebn0() const;                // requires rx_power and noise_density
    void validate() const;
};

struct Waveform {
    std::vector<cplx> samples;
    double sample_rate = 0.0;
};

Waveform modulate(const std::vector<std::uint8_t>& bits, const PhyConfig& cfg);

// Nearest-bin coherent accumulation of the taps on the k / sample_rate grid.
ImpulseResponse rasterize(const ImpulseResponse& h, double sample_rate);
// Copy of h scaled to unit tap energy.
ImpulseResponse normalize_energy(const ImpulseResponse& h);

// Linear convolution with a rasterized response of the same sample rate.
Waveform channel_apply(const Waveform& x, const ImpulseResponse& h);

// Where and how the receiver samples a rasterized channel.
struct SamplingPoint {
    std::size_t offset = 0; // strongest-tap sample index, start of the integration window
    double phase = 0.0;     // rad
};

SamplingPoint sampling_point(const ImpulseResponse& rasterized);
// Decision statistic of symbol n in a received waveform.
double decision_statistic(const Waveform& r, std::size_t n, const SamplingPoint& sp, std::size_t sps);

struct IsiStateTable {
    std::size_t memory = 0;                 // m
    std::vector<double> zero;               // per previous pattern, sample for current bit 0
    std::vector<double> one;                // current bit 1
    std::vector<double> alpha;              // (d_k / d_ideal)^2
    std::vector<double> precursor;          // contribution of a '1' q symbols ahead, q = 1..p
    double ideal_separation = 1.0;          // sqrt(E_b)
    double bit_energy = 1.0;                // E_b for the noise variance
    double tail_fraction = 0.0;             // tap energy beyond the memory
    bool tail_warning = false;
    SamplingPoint sampling;

    // Pattern index k: bit q-1 of k is b_{-q}.
    std::size_t patterns() const { return zero.size(); }
};

constexpr std::size_t kDefaultStateBudget = std::size_t{1} << 20;

// 2^(m+1) noiseless statistics from modulating each pattern through the channel. h may be sparse;
// it is rasterized at cfg.sample_rate().
IsiStateTable enumerate_isi_states(const ImpulseResponse& h, const PhyConfig& cfg, std::size_t memory,
                                   std::size_t state_budget = kDefaultStateBudget);

struct ThresholdBank {
    std::size_t k = 1;
    std::size_t selector_bits = 0;  // log2(K)
    std::vector<double> thresholds; // indexed by the last selector_bits decisions, LSB = b_{-1}
    std::vector<bool> inverted;     // eye closed (mean '1' <= mean '0'); threshold still the midpoint

    bool any_inverted() const;
};

ThresholdBank derive_thresholds(const IsiStateTable& t, std::size_t k);

enum class BerMethod { closed_form, semi_analytic, monte_carlo };

const char* to_string(BerMethod m);

struct BerEstimate {
    double value = 0.0;
    BerMethod method = BerMethod::closed_form;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool upper_bound = false; // zero errors observed: value is the CI upper bound
};

BerEstimate ber_closed_form(double ebn0);
// EbN0 (linear) at which the ideal OOK error rate equals ber.
double ebn0_for_ber(double ber);
BerEstimate ber_isi_as_noise(double ebn0, double i_over_n0);
BerEstimate ber_semi_analytic(const IsiStateTable& t, const ThresholdBank& bank, double ebn0);

// Two-sided 95 % Clopper-Pearson interval for errors out of bits.
std::pair<double, double> binomial_interval(std::uint64_t errors, std::uint64_t bits, double confidence = 0.95);

struct MonteCarloOptions {
    std::uint64_t bits = 1'000'000;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::size_t block_bits = 1 << 15;
};

// Full waveform chain: per-block bits from splitmix(seed, block), modulate, channel, sampler
// noise, decisions with the bank indexed by decoded bits. Independent of jobs.
BerEstimate ber_monte_carlo(const ImpulseResponse& h, const PhyConfig& cfg, const IsiStateTable& t,
                            const ThresholdBank& bank, double ebn0, const MonteCarloOptions& opt);

struct DutyPoint {
    double duty = 1.0;
    BerEstimate ber;
};

struct DutyResult {
    double best_duty = 1.0;
    std::vector<DutyPoint> curve;
};

std::vector<double> default_duty_grid();

DutyResult optimize_duty_cycle(const ImpulseResponse& h, const PhyConfig& cfg, double ebn0,
                               const std::vector<double>& duty_grid, std::size_t k, std::size_t memory);

std::uint64_t splitmix64(std::uint64_t x);

void to_json(nlohmann::json& j, const PhyConfig& c);
void from_json(const nlohmann::json& j, PhyConfig& c);
void to_json(nlohmann::json& j, const BerEstimate& b);

} // namespace pkgwave
