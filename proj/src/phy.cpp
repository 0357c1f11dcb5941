#include "pkgwave/phy.hpp"

#include "pkgwave/error.hpp"
#include "pkgwave/json_util.hpp"
#include "pkgwave/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace pkgwave {

std::size_t PhyConfig::pulse_samples() const
{
    return static_cast<std::size_t>(std::llround(duty * static_cast<double>(samples_per_symbol)));
}

double PhyConfig::pulse_amplitude() const
{
    if (!equal_energy) {
        return 1.0;
    }
    const double d_eff = static_cast<double>(pulse_samples()) / static_cast<double>(samples_per_symbol);
    return 1.0 / std::sqrt(d_eff);
}

double PhyConfig::pulse_energy() const
{
    const double a = pulse_amplitude();
    return a * a * static_cast<double>(pulse_samples()) / static_cast<double>(samples_per_symbol);
}

double PhyConfig::ebn0() const
{
    if (!(rx_power > 0.0) || !(noise_density > 0.0)) {
        throw ConfigError("EbN0 from the link budget needs rx_power > 0 and noise_density > 0");
    }
    return bit_energy() / noise_density;
}

void PhyConfig::validate() const
{
    if (!(symbol_rate > 0.0) || !std::isfinite(symbol_rate)) {
        throw ConfigError("phy: symbol_rate must be > 0");
    }
    if (!(duty > 0.0 && duty <= 1.0)) {
        throw ConfigError("phy: duty must lie in (0, 1]");
    }
    if (samples_per_symbol < 8) {
        throw ConfigError("phy: samples_per_symbol must be >= 8");
    }
    if (pulse_samples() == 0) {
        throw ConfigError("phy: duty too small for the sampling resolution");
    }
    if (rx_power < 0.0 || noise_density < 0.0) {
        throw ConfigError("phy: rx_power and noise_density must be >= 0");
    }
}

Waveform modulate(const std::vector<std::uint8_t>& bits, const PhyConfig& cfg)
{
    cfg.validate();
    if (bits.empty()) {
        throw ConfigError("modulate: empty bit stream");
    }
    const std::size_t sps = cfg.samples_per_symbol;
    const std::size_t on = cfg.pulse_samples();
    const double amp = cfg.pulse_amplitude();
    Waveform w;
    w.sample_rate = cfg.sample_rate();
    w.samples.assign(bits.size() * sps, cplx(0.0, 0.0));
    for (std::size_t n = 0; n < bits.size(); ++n) {
        if (bits[n] > 1) {
            throw ConfigError("modulate: bits must be 0 or 1");
        }
        if (bits[n]) {
            std::fill_n(w.samples.begin() + static_cast<std::ptrdiff_t>(n * sps), on, cplx(amp, 0.0));
        }
    }
    return w;
}

ImpulseResponse rasterize(const ImpulseResponse& h, double sample_rate)
{
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        throw ConfigError("rasterize: sample rate must be > 0");
    }
    h.validate();
    std::map<long long, cplx> bins;
    for (const auto& t : h.taps) {
        bins[std::llround(t.delay * sample_rate)] += t.amplitude;
    }
    ImpulseResponse out;
    out.tx = h.tx;
    out.rx = h.rx;
    out.sample_rate = sample_rate;
    out.taps.reserve(bins.size());
    for (const auto& [k, a] : bins) {
        out.taps.push_back({static_cast<double>(k) / sample_rate, a});
    }
    return out;
}

ImpulseResponse normalize_energy(const ImpulseResponse& h)
{
    const double e = h.energy();
    if (!(e > 0.0)) {
        throw NumericError("cannot normalize a zero-energy impulse response");
    }
    ImpulseResponse out = h;
    const double s = 1.0 / std::sqrt(e);
    for (auto& t : out.taps) {
        t.amplitude *= s;
    }
    return out;
}

namespace {

bool same_rate(double a, double b)
{
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

std::size_t tap_index(const Tap& t, double fs)
{
    return static_cast<std::size_t>(std::llround(t.delay * fs));
}

double tail(double margin, double sigma)
{
    if (sigma == 0.0) {
        return margin > 0.0 ? 0.0 : (margin < 0.0 ? 1.0 : 0.5);
    }
    return 0.5 * std::erfc(margin / (sigma * std::sqrt(2.0)));
}

double noise_sigma(double bit_energy, double ebn0)
{
    if (!(ebn0 >= 0.0)) {
        throw ConfigError("EbN0 must be >= 0");
    }
    if (std::isinf(ebn0)) {
        return 0.0;
    }
    if (ebn0 == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::sqrt(bit_energy / (2.0 * ebn0));
}

} // namespace

Waveform channel_apply(const Waveform& x, const ImpulseResponse& h)
{
    if (!h.rasterized()) {
        throw ConfigError("channel_apply: impulse response is not rasterized");
    }
    if (!same_rate(x.sample_rate, h.sample_rate)) {
        throw ConfigError("channel_apply: sample-rate mismatch between waveform and impulse response");
    }
    h.validate();
    Waveform y;
    y.sample_rate = x.sample_rate;
    if (x.samples.empty() || h.taps.empty()) {
        return y;
    }
    const std::size_t span = tap_index(h.taps.back(), h.sample_rate);
    y.samples.assign(x.samples.size() + span, cplx(0.0, 0.0));
    for (const auto& t : h.taps) {
        const std::size_t k = tap_index(t, h.sample_rate);
        const double ar = t.amplitude.real();
        const double ai = t.amplitude.imag();
        cplx* out = y.samples.data() + k;
        for (std::size_t n = 0; n < x.samples.size(); ++n) {
            const double xr = x.samples[n].real();
            const double xi = x.samples[n].imag();
            out[n] += cplx(ar * xr - ai * xi, ar * xi + ai * xr);
        }
    }
    return y;
}

SamplingPoint sampling_point(const ImpulseResponse& r)
{
    if (!r.rasterized() || r.taps.empty()) {
        throw ConfigError("sampling point needs a non-empty rasterized response");
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < r.taps.size(); ++k) {
        if (std::norm(r.taps[k].amplitude) > std::norm(r.taps[best].amplitude)) {
            best = k;
        }
    }
    if (std::norm(r.taps[best].amplitude) == 0.0) {
        throw NumericError("impulse response has no energy");
    }
    return {tap_index(r.taps[best], r.sample_rate), std::arg(r.taps[best].amplitude)};
}

double decision_statistic(const Waveform& r, std::size_t n, const SamplingPoint& sp, std::size_t sps)
{
    const std::size_t start = n * sps + sp.offset;
    const std::size_t stop = std::min(start + sps, r.samples.size());
    cplx acc(0.0, 0.0);
    for (std::size_t i = start; i < stop; ++i) {
        acc += r.samples[i];
    }
    return (std::polar(1.0, -sp.phase) * acc).real() / static_cast<double>(sps);
}

IsiStateTable enumerate_isi_states(const ImpulseResponse& h, const PhyConfig& cfg, std::size_t memory,
                                   std::size_t state_budget)
{
    cfg.validate();
    if (memory >= 40 || (std::size_t{2} << memory) > state_budget) {
        throw ConfigError("ISI memory " + std::to_string(memory) + " exceeds the state budget of "
                          + std::to_string(state_budget));
    }
    const double fs = cfg.sample_rate();
    const ImpulseResponse r = rasterize(h, fs);
    if (r.taps.empty() || !(r.energy() > 0.0)) {
        throw NumericError("ISI enumeration needs a channel with energy");
    }
    const std::size_t sps = cfg.samples_per_symbol;
    const std::size_t on = cfg.pulse_samples();

    IsiStateTable t;
    t.memory = memory;
    t.sampling = sampling_point(r);
    // Received energy of an isolated '1' in units of T_b; bounds every separation by Cauchy-Schwarz.
    const Waveform isolated = channel_apply(modulate({1}, cfg), r);
    t.bit_energy = 0.0;
    for (const auto& s : isolated.samples) {
        t.bit_energy += std::norm(s);
    }
    t.bit_energy /= static_cast<double>(cfg.samples_per_symbol);
    t.ideal_separation = std::sqrt(t.bit_energy);

    const std::size_t first = tap_index(r.taps.front(), fs);
    const std::size_t lead = t.sampling.offset - first;
    const std::size_t p = (lead + sps - 1) / sps;

    // Tap energy reaching symbols older than the memory.
    double total = 0.0;
    double far = 0.0;
    const double reach = static_cast<double>((memory + 1) * sps) - static_cast<double>(on);
    for (const auto& tap : r.taps) {
        const double e = std::norm(tap.amplitude);
        total += e;
        const double off = static_cast<double>(tap_index(tap, fs)) - static_cast<double>(t.sampling.offset);
        if (off > reach) {
            far += e;
        }
    }
    t.tail_fraction = far / total;
    t.tail_warning = t.tail_fraction >= 0.01;

    const std::size_t len = memory + 1 + p;
    auto run = [&](const std::vector<std::uint8_t>& bits) {
        return decision_statistic(channel_apply(modulate(bits, cfg), r), memory, t.sampling, sps);
    };
    const std::size_t patterns = std::size_t{1} << memory;
    t.zero.resize(patterns);
    t.one.resize(patterns);
    t.alpha.resize(patterns);
    std::vector<std::uint8_t> bits(len, 0);
    for (std::size_t k = 0; k < patterns; ++k) {
        for (std::size_t q = 1; q <= memory; ++q) {
            bits[memory - q] = static_cast<std::uint8_t>((k >> (q - 1)) & 1u);
        }
        bits[memory] = 0;
        t.zero[k] = k == 0 ? 0.0 : run(bits);
        bits[memory] = 1;
        t.one[k] = run(bits);
        const double d = (t.one[k] - t.zero[k]) / t.ideal_separation;
        t.alpha[k] = d * d;
    }
    t.precursor.resize(p);
    for (std::size_t q = 1; q <= p; ++q) {
        std::vector<std::uint8_t> b(len, 0);
        b[memory + q] = 1;
        t.precursor[q - 1] = run(b);
    }
    return t;
}

bool ThresholdBank::any_inverted() const
{
    return std::any_of(inverted.begin(), inverted.end(), [](bool b) { return b; });
}

ThresholdBank derive_thresholds(const IsiStateTable& t, std::size_t k)
{
    if (k == 0 || (k & (k - 1)) != 0) {
        throw ConfigError("K must be a power of two");
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < k) {
        ++bits;
    }
    if (bits > t.memory) {
        throw ConfigError("K = " + std::to_string(k) + " needs " + std::to_string(bits)
                          + " memory symbols, table has " + std::to_string(t.memory));
    }
    double future = 0.0;
    for (double c : t.precursor) {
        future += 0.5 * c;
    }
    ThresholdBank b;
    b.k = k;
    b.selector_bits = bits;
    b.thresholds.resize(k);
    b.inverted.resize(k);
    const std::size_t older = std::size_t{1} << (t.memory - bits);
    for (std::size_t s = 0; s < k; ++s) {
        double m0 = 0.0;
        double m1 = 0.0;
        for (std::size_t j = 0; j < older; ++j) {
            const std::size_t idx = s | (j << bits);
            m0 += t.zero[idx];
            m1 += t.one[idx];
        }
        m0 = m0 / static_cast<double>(older) + future;
        m1 = m1 / static_cast<double>(older) + future;
        b.thresholds[s] = 0.5 * (m0 + m1);
        b.inverted[s] = !(m1 > m0);
    }
    return b;
}

const char* to_string(BerMethod m)
{
    switch (m) {
    case BerMethod::closed_form:
        return "closed-form";
    case BerMethod::semi_analytic:
        return "semi-analytic";
    case BerMethod::monte_carlo:
        return "monte-carlo";
    }
    return "?";
}

BerEstimate ber_closed_form(double ebn0)
{
    if (!(ebn0 >= 0.0)) {
        throw ConfigError("EbN0 must be >= 0");
    }
    BerEstimate b;
    b.method = BerMethod::closed_form;
    b.value = 0.5 * std::erfc(std::sqrt(ebn0 / 4.0));
    b.ci_low = b.ci_high = b.value;
    return b;
}

double ebn0_for_ber(double ber)
{
    if (!(ber > 0.0 && ber < 0.5)) {
        throw ConfigError("target BER must lie in (0, 0.5)");
    }
    const double x = boost::math::erfc_inv(2.0 * ber);
    return 4.0 * x * x;
}

BerEstimate ber_isi_as_noise(double ebn0, double i_over_n0)
{
    if (!(ebn0 >= 0.0) || !(i_over_n0 >= 0.0)) {
        throw ConfigError("EbN0 and I/N0 must be >= 0");
    }
    BerEstimate b;
    b.method = BerMethod::closed_form;
    b.value = 0.5 * std::erfc(std::sqrt(ebn0 / (4.0 * (1.0 + i_over_n0))));
    b.ci_low = b.ci_high = b.value;
    return b;
}

BerEstimate ber_semi_analytic(const IsiStateTable& t, const ThresholdBank& bank, double ebn0)
{
    if (bank.thresholds.size() != bank.k || (std::size_t{1} << bank.selector_bits) != bank.k
        || bank.selector_bits > t.memory) {
        throw ConfigError("threshold bank does not match the ISI table");
    }
    const double sigma = noise_sigma(t.bit_energy, ebn0);
    const std::size_t p = t.precursor.size();
    const std::size_t futures = std::size_t{1} << p;
    std::vector<double> shift(futures, 0.0);
    for (std::size_t f = 0; f < futures; ++f) {
        for (std::size_t q = 0; q < p; ++q) {
            if ((f >> q) & 1u) {
                shift[f] += t.precursor[q];
            }
        }
    }
    const std::size_t mask = bank.k - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < t.patterns(); ++k) {
        const double thr = bank.thresholds[k & mask];
        for (double s : shift) {
            acc += tail(thr - (t.zero[k] + s), sigma) + tail((t.one[k] + s) - thr, sigma);
        }
    }
    BerEstimate b;
    b.method = BerMethod::semi_analytic;
    b.value = acc / (2.0 * static_cast<double>(t.patterns() * futures));
    b.ci_low = b.ci_high = b.value;
    return b;
}

std::pair<double, double> binomial_interval(std::uint64_t errors, std::uint64_t bits, double confidence)
{
    if (bits == 0 || errors > bits) {
        throw ConfigError("binomial interval needs 0 <= errors <= bits, bits > 0");
    }
    const double a = 1.0 - confidence;
    const double e = static_cast<double>(errors);
    const double n = static_cast<double>(bits);
    const double lo = errors == 0 ? 0.0 : boost::math::ibeta_inv(e, n - e + 1.0, a / 2.0);
    const double hi = errors == bits ? 1.0 : boost::math::ibeta_inv(e + 1.0, n - e, 1.0 - a / 2.0);
    return {lo, hi};
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

BerEstimate ber_monte_carlo(const ImpulseResponse& h, const PhyConfig& cfg, const IsiStateTable& t,
                            const ThresholdBank& bank, double ebn0, const MonteCarloOptions& opt)
{
    cfg.validate();
    if (opt.bits < 10'000) {
        throw ConfigError("Monte Carlo needs at least 10^4 bits");
    }
    if (opt.block_bits == 0) {
        throw ConfigError("Monte Carlo block size must be > 0");
    }
    if (bank.selector_bits > t.memory || bank.thresholds.size() != bank.k) {
        throw ConfigError("threshold bank does not match the ISI table");
    }
    const double fs = cfg.sample_rate();
    const ImpulseResponse r = rasterize(h, fs);
    const SamplingPoint sp = sampling_point(r);
    const std::size_t sps = cfg.samples_per_symbol;
    const double sigma = noise_sigma(t.bit_energy, ebn0);
    const double noise_scale = std::isinf(sigma) ? 0.0 : sigma;
    if (std::isinf(sigma)) {
        throw ConfigError("Monte Carlo needs EbN0 > 0");
    }

    const std::size_t last = tap_index(r.taps.back(), fs);
    const std::size_t past = (last + cfg.pulse_samples() + sps - 1 - std::min(last, sp.offset)) / sps;
    const std::size_t preamble = std::max(past, bank.selector_bits) + 1;
    const std::size_t trailing = t.precursor.size() + 1;
    const std::size_t blocks = static_cast<std::size_t>((opt.bits + opt.block_bits - 1) / opt.block_bits);
    const std::size_t mask = bank.k - 1;

    std::vector<std::uint64_t> errors(blocks, 0);
    parallel_for(blocks, opt.jobs, [&](std::size_t b) {
        const std::uint64_t done = static_cast<std::uint64_t>(b) * opt.block_bits;
        const std::size_t nb = static_cast<std::size_t>(std::min<std::uint64_t>(opt.block_bits, opt.bits - done));
        std::mt19937_64 rng(splitmix64(opt.seed ^ splitmix64(static_cast<std::uint64_t>(b) + 1)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<std::uint8_t> bits(preamble + nb + trailing);
        for (auto& x : bits) {
            x = static_cast<std::uint8_t>(rng() >> 63);
        }
        const Waveform y = channel_apply(modulate(bits, cfg), r);
        std::size_t history = 0; // decided bits, LSB = most recent
        std::uint64_t err = 0;
        for (std::size_t n = 0; n < preamble + nb; ++n) {
            const double z = decision_statistic(y, n, sp, sps) + noise_scale * gauss(rng);
            const std::uint8_t decided = z > bank.thresholds[history & mask] ? 1 : 0;
            const bool training = n < preamble;
            if (!training && decided != bits[n]) {
                ++err;
            }
            history = (history << 1) | (training ? bits[n] : decided);
        }
        errors[b] = err;
    });

    BerEstimate est;
    est.method = BerMethod::monte_carlo;
    est.bits = opt.bits;
    for (auto e : errors) {
        est.errors += e;
    }
    const auto [lo, hi] = binomial_interval(est.errors, est.bits);
    est.ci_low = lo;
    est.ci_high = hi;
    if (est.errors == 0) {
        est.value = hi;
        est.upper_bound = true;
    }
    else {
        est.value = static_cast<double>(est.errors) / static_cast<double>(est.bits);
    }
    return est;
}

std::vector<double> default_duty_grid()
{
    std::vector<double> g;
    for (int k = 1; k <= 16; ++k) {
        g.push_back(k / 16.0);
    }
    return g;
}

DutyResult optimize_duty_cycle(const ImpulseResponse& h, const PhyConfig& cfg, double ebn0,
                               const std::vector<double>& duty_grid, std::size_t k, std::size_t memory)
{
    if (duty_grid.empty() || std::find(duty_grid.begin(), duty_grid.end(), 1.0) == duty_grid.end()) {
        throw ConfigError("duty grid must include 1");
    }
    DutyResult res;
    double best = std::numeric_limits<double>::infinity();
    for (double d : duty_grid) {
        if (!(d > 0.0 && d <= 1.0)) {
            throw ConfigError("duty grid values must lie in (0, 1]");
        }
        PhyConfig c = cfg;
        c.duty = d;
        const auto table = enumerate_isi_states(h, c, memory);
        const auto bank = derive_thresholds(table, k);
        const auto ber = ber_semi_analytic(table, bank, ebn0);
        res.curve.push_back({d, ber});
        if (ber.value < best || (ber.value == best && d > res.best_duty)) {
            best = ber.value;
            res.best_duty = d;
        }
    }
    return res;
}

void to_json(nlohmann::json& j, const PhyConfig& c)
{
    j = nlohmann::json{{"symbol_rate", c.symbol_rate},
                       {"duty", c.duty},
                       {"samples_per_symbol", c.samples_per_symbol},
                       {"equal_energy", c.equal_energy},
                       {"rx_power", c.rx_power},
                       {"noise_density", c.noise_density}};
}

void from_json(const nlohmann::json& j, PhyConfig& c)
{
    const std::string path = "/phy";
    c.symbol_rate = jsonu::number_or(j, "symbol_rate", c.symbol_rate, path);
    c.duty = jsonu::number_or(j, "duty", c.duty, path);
    c.samples_per_symbol = jsonu::count_or(j, "samples_per_symbol", c.samples_per_symbol, path);
    c.equal_energy = jsonu::boolean_or(j, "equal_energy", c.equal_energy, path);
    c.rx_power = jsonu::number_or(j, "rx_power", c.rx_power, path);
    c.noise_density = jsonu::number_or(j, "noise_density", c.noise_density, path);
    try {
        c.validate();
    }
    catch (const ConfigError& e) {
        jsonu::fail(path, e.what());
    }
}

void to_json(nlohmann::json& j, const BerEstimate& b)
{
    j = nlohmann::json{{"value", b.value},     {"method", to_string(b.method)}, {"bits", b.bits},
                       {"errors", b.errors},   {"ci_low", b.ci_low},            {"ci_high", b.ci_high},
                       {"upper_bound", b.upper_bound}};
}

} // namespace pkgwave
