#include "pkgwave/metrics.hpp"

#include "pkgwave/constants.hpp"
#include "pkgwave/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include <fftw3.h>

namespace pkgwave {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

class FftBuffer {
public:
    FftBuffer(std::size_t n, int direction) : n_(n)
    {
        data_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        if (!data_) {
            throw std::bad_alloc();
        }
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), data_, data_, direction, FFTW_ESTIMATE);
    }
    ~FftBuffer()
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(data_);
    }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;

    cplx get(std::size_t k) const { return {data_[k][0], data_[k][1]}; }
    void set(std::size_t k, cplx v)
    {
        data_[k][0] = v.real();
        data_[k][1] = v.imag();
    }
    void execute() { fftw_execute(plan_); }
    std::size_t size() const { return n_; }

private:
    std::size_t n_;
    fftw_complex* data_ = nullptr;
    fftw_plan plan_ = nullptr;
};

std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

double window_weight(WindowKind kind, std::size_t k, std::size_t m)
{
    if (m < 2) {
        return 1.0;
    }
    const double x = 2.0 * constants::pi * static_cast<double>(k) / static_cast<double>(m - 1);
    switch (kind) {
    case WindowKind::rectangular:
        return 1.0;
    case WindowKind::hann:
        return 0.5 - 0.5 * std::cos(x);
    case WindowKind::blackman:
        return 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
    }
    return 1.0;
}

void check_uniform(const std::vector<double>& f)
{
    if (f.size() < 2) {
        throw ConfigError("frequency response needs at least two points");
    }
    const double step = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
    if (!(step > 0.0)) {
        throw ConfigError("frequency grid must be strictly increasing");
    }
    for (std::size_t k = 1; k < f.size(); ++k) {
        if (std::abs((f[k] - f[k - 1]) - step) > 1e-6 * step) {
            throw ConfigError("non-uniform frequency grid; resample onto a uniform grid before inversion");
        }
    }
}

// Minimum-phase spectrum with the given power, on the first fr.size() bins of an n-point circle.
std::vector<cplx> minimum_phase(const std::vector<double>& power, std::size_t n)
{
    const std::size_t m = power.size();
    std::vector<double> logmag(n);
    auto lm = [](double p) { return 0.5 * std::log(std::max(p, 1e-300)); };
    for (std::size_t k = 0; k < m; ++k) {
        logmag[k] = lm(power[k]);
    }
    // Linear bridge from the last bin back to the first keeps the circular log-spectrum continuous.
    const double a = logmag[m - 1];
    const double b = logmag[0];
    for (std::size_t k = m; k < n; ++k) {
        const double t = static_cast<double>(k - m + 1) / static_cast<double>(n - m + 1);
        logmag[k] = a + (b - a) * t;
    }
    FftBuffer buf(n, FFTW_BACKWARD);
    for (std::size_t k = 0; k < n; ++k) {
        buf.set(k, logmag[k] / static_cast<double>(n));
    }
    buf.execute();
    FftBuffer fwd(n, FFTW_FORWARD);
    for (std::size_t q = 0; q < n; ++q) {
        double w = 0.0;
        if (q == 0 || q == n / 2) {
            w = 1.0;
        }
        else if (q < n / 2) {
            w = 2.0;
        }
        fwd.set(q, buf.get(q).real() * w);
    }
    fwd.execute();
    std::vector<cplx> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        out[k] = std::exp(fwd.get(k));
    }
    return out;
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double at)
{
    auto it = std::upper_bound(x.begin(), x.end(), at);
    if (it == x.begin()) {
        return y.front();
    }
    if (it == x.end()) {
        return y.back();
    }
    const std::size_t k = static_cast<std::size_t>(it - x.begin());
    const double t = (at - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + t * (y[k] - y[k - 1]);
}

} // namespace

FrequencyResponse freq_response(const SParameterSet& sp, std::size_t i, std::size_t j, double gain_i, double gain_j)
{
    sp.validate();
    if (i >= sp.ports || j >= sp.ports) {
        throw ConfigError("port index out of range");
    }
    if (!(gain_i > 0.0) || !(gain_j > 0.0)) {
        throw ConfigError("antenna gains must be > 0");
    }
    FrequencyResponse fr;
    fr.tx = i;
    fr.rx = j;
    fr.gain_tx = gain_i;
    fr.gain_rx = gain_j;
    fr.frequencies = sp.frequencies;
    fr.response.resize(sp.size());
    fr.power.resize(sp.size());
    for (std::size_t k = 0; k < sp.size(); ++k) {
        const double rii = std::norm(sp.s(k, i, i));
        const double rjj = std::norm(sp.s(k, j, j));
        if (rii >= 1.0 || rjj >= 1.0) {
            std::ostringstream os;
            os << "port mismatch: |S" << (rii >= 1.0 ? i + 1 : j + 1) << (rii >= 1.0 ? i + 1 : j + 1)
               << "| >= 1 at " << sp.frequencies[k] << " Hz";
            throw NumericError(os.str());
        }
        const double denom = (1.0 - rii) * (1.0 - rjj) * gain_i * gain_j;
        const cplx sji = sp.s(k, j, i);
        fr.power[k] = std::norm(sji) / denom;
        fr.response[k] = sji / std::sqrt(denom);
    }
    return fr;
}

FrequencyResponse taps_to_frequency_response(const ImpulseResponse& h, const FrequencyBand& band, double carrier)
{
    band.validate(true);
    FrequencyResponse fr;
    fr.tx = h.tx;
    fr.rx = h.rx;
    fr.frequencies.resize(band.points);
    for (std::size_t k = 0; k < band.points; ++k) {
        fr.frequencies[k] = band.frequency(k);
    }
    const double df = band.step();
    std::vector<double> re(band.points, 0.0);
    std::vector<double> im(band.points, 0.0);
    // Rotation recurrence across the uniform grid, four taps per pass for independent chains.
    constexpr std::size_t lanes = 4;
    const std::size_t nt = h.taps.size();
    for (std::size_t base = 0; base < nt; base += lanes) {
        double vr[lanes] = {};
        double vi[lanes] = {};
        double sr[lanes] = {1.0, 1.0, 1.0, 1.0};
        double si[lanes] = {};
        for (std::size_t l = 0; l < lanes && base + l < nt; ++l) {
            const Tap& t = h.taps[base + l];
            const cplx v0 = t.amplitude * std::polar(1.0, -2.0 * constants::pi * (band.start - carrier) * t.delay);
            const cplx step = std::polar(1.0, -2.0 * constants::pi * df * t.delay);
            vr[l] = v0.real();
            vi[l] = v0.imag();
            sr[l] = step.real();
            si[l] = step.imag();
        }
        for (std::size_t k = 0; k < band.points; ++k) {
            re[k] += (vr[0] + vr[1]) + (vr[2] + vr[3]);
            im[k] += (vi[0] + vi[1]) + (vi[2] + vi[3]);
            for (std::size_t l = 0; l < lanes; ++l) {
                const double nr = vr[l] * sr[l] - vi[l] * si[l];
                vi[l] = vr[l] * si[l] + vi[l] * sr[l];
                vr[l] = nr;
            }
        }
    }
    fr.response.resize(band.points);
    fr.power.resize(band.points);
    for (std::size_t k = 0; k < band.points; ++k) {
        fr.response[k] = {re[k], im[k]};
        fr.power[k] = re[k] * re[k] + im[k] * im[k];
    }
    return fr;
}

InverseResult impulse_from_freq(const FrequencyResponse& fr, const WindowSpec& window)
{
    check_uniform(fr.frequencies);
    const std::size_t m = fr.size();
    if (fr.power.size() != m || (fr.has_phase && fr.response.size() != m)) {
        throw ConfigError("frequency response arrays have inconsistent lengths");
    }
    const std::size_t n = std::max<std::size_t>(1, window.zero_pad) * next_pow2(m);
    InverseResult out;
    std::vector<cplx> spectrum;
    if (fr.has_phase) {
        spectrum = fr.response;
    }
    else {
        spectrum = minimum_phase(fr.power, n);
        out.minimum_phase = true;
    }
    FftBuffer buf(n, FFTW_BACKWARD);
    double wsum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k < m) {
            const double w = window_weight(window.kind, k, m);
            wsum += w;
            buf.set(k, spectrum[k] * w);
        }
        else {
            buf.set(k, 0.0);
        }
    }
    buf.execute();
    const double df = fr.frequencies[1] - fr.frequencies[0];
    const double fs = static_cast<double>(n) * df;
    out.response.tx = fr.tx;
    out.response.rx = fr.rx;
    out.response.sample_rate = fs;
    out.response.taps.resize(n);
    for (std::size_t q = 0; q < n; ++q) {
        out.response.taps[q] = {static_cast<double>(q) / fs, buf.get(q) / wsum};
    }
    return out;
}

double PowerDelayProfile::total_power() const
{
    double s = 0.0;
    for (double p : powers) {
        s += p;
    }
    return s;
}

PowerDelayProfile pdp(const ImpulseResponse& h)
{
    if (h.taps.empty()) {
        throw NumericError("power delay profile of an empty impulse response");
    }
    PowerDelayProfile p;
    p.tx = h.tx;
    p.rx = h.rx;
    p.delays.reserve(h.taps.size());
    p.powers.reserve(h.taps.size());
    const double ref = h.taps.front().delay;
    double sp = 0.0;
    double stp = 0.0;
    for (const auto& t : h.taps) {
        const double pw = std::norm(t.amplitude);
        p.delays.push_back(t.delay);
        p.powers.push_back(pw);
        sp += pw;
        stp += (t.delay - ref) * pw;
    }
    p.mean_delay = sp > 0.0 ? ref + stp / sp : ref;
    return p;
}

double delay_spread(const PowerDelayProfile& p)
{
    const double total = p.total_power();
    if (!(total > 0.0)) {
        throw NumericError("delay spread of an all-zero power delay profile");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < p.delays.size(); ++k) {
        const double d = p.delays[k] - p.mean_delay;
        acc += d * d * p.powers[k];
    }
    return std::sqrt(acc / total);
}

double coherence_bandwidth(double worst_tau_rms, double bc_constant)
{
    if (!(worst_tau_rms >= 0.0) || !(bc_constant > 0.0)) {
        throw NumericError("coherence bandwidth needs tau_rms >= 0 and a positive constant");
    }
    if (worst_tau_rms == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return bc_constant / worst_tau_rms;
}

DispersionSummary dispersion_summary(const ChannelMatrix& cm, double bc_constant)
{
    if (cm.empty()) {
        throw NumericError("dispersion summary of an empty channel matrix");
    }
    DispersionSummary s;
    s.bc_constant = bc_constant;
    s.worst_tau_rms = -1.0;
    for (const auto& ir : cm.responses) {
        const double t = delay_spread(pdp(ir));
        s.pairs.push_back({ir.tx, ir.rx, t});
        if (t > s.worst_tau_rms) {
            s.worst_tau_rms = t;
            s.worst_tx = ir.tx;
            s.worst_rx = ir.rx;
        }
    }
    s.coherence_bandwidth = coherence_bandwidth(s.worst_tau_rms, bc_constant);
    return s;
}

double path_loss_per_pair(const FrequencyResponse& fr, const FrequencyBand& band)
{
    const auto& f = fr.frequencies;
    if (f.size() < 2 || fr.power.size() != f.size()) {
        throw ConfigError("path loss needs a frequency response with at least two points");
    }
    const double tol = 1e-9 * std::max(std::abs(f.front()), std::abs(f.back()));
    if (band.start < f.front() - tol || band.stop > f.back() + tol || !(band.stop > band.start)) {
        throw ConfigError("loss band is not contained in the frequency response support");
    }
    const double lo = std::max(band.start, f.front());
    const double hi = std::min(band.stop, f.back());
    std::vector<double> xs{lo};
    std::vector<double> ys{interp(f, fr.power, lo)};
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] > lo && f[k] < hi) {
            xs.push_back(f[k]);
            ys.push_back(fr.power[k]);
        }
    }
    xs.push_back(hi);
    ys.push_back(interp(f, fr.power, hi));
    double integral = 0.0;
    for (std::size_t k = 1; k < xs.size(); ++k) {
        integral += 0.5 * (ys[k] + ys[k - 1]) * (xs[k] - xs[k - 1]);
    }
    const double mean = integral / (hi - lo);
    if (!(mean > 0.0) || !std::isfinite(mean)) {
        throw NumericError("|H|^2 vanishes on the loss band");
    }
    return -10.0 * std::log10(mean);
}

PathLossFit fit_path_loss(const std::vector<LossSample>& samples, double d0)
{
    if (!(d0 > 0.0) || !std::isfinite(d0)) {
        throw ConfigError("reference distance d0 must be > 0");
    }
    if (samples.size() < 2) {
        throw NumericError("path loss fit needs at least two samples");
    }
    const std::size_t n = samples.size();
    std::vector<double> x(n);
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = samples[k];
        if (!(s.distance >= d0 * (1.0 - 1e-12)) || !std::isfinite(s.loss_db)) {
            throw ConfigError("path loss samples must be finite with distance >= d0");
        }
        x[k] = 10.0 * std::log10(s.distance / d0);
        mx += x[k];
        my += s.loss_db;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (samples[k].loss_db - my);
    }
    if (!(sxx > 1e-24)) {
        throw NumericError("degenerate path loss fit: all distances are identical");
    }
    PathLossFit fit;
    fit.exponent = sxy / sxx;
    fit.l0_db = my - fit.exponent * mx;
    fit.d0 = d0;
    fit.samples = samples;
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = samples[k].loss_db - (fit.exponent * x[k] + fit.l0_db);
        ss += r * r;
    }
    fit.residual_rms_db = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

std::vector<PairMetrics> pair_metrics(const ChannelMatrix& cm)
{
    if (cm.empty()) {
        throw NumericError("metrics of an empty channel matrix");
    }
    std::vector<PairMetrics> rows(cm.responses.size());
    for (std::size_t k = 0; k < cm.responses.size(); ++k) {
        const auto& ir = cm.responses[k];
        PairMetrics& row = rows[k];
        row.tx = ir.tx;
        row.rx = ir.rx;
        row.distance = k < cm.distances.size() ? cm.distances[k] : std::numeric_limits<double>::quiet_NaN();
        if (ir.rx < ir.tx) {
            if (auto twin = cm.index_of(ir.rx, ir.tx); twin && *twin < k && cm.responses[*twin].taps == ir.taps) {
                row.loss_db = rows[*twin].loss_db;
                row.tau_rms = rows[*twin].tau_rms;
                continue;
            }
        }
        row.loss_db = path_loss_per_pair(taps_to_frequency_response(ir, cm.band, cm.carrier_frequency), cm.band);
        row.tau_rms = delay_spread(pdp(ir));
    }
    return rows;
}

double mean_loss(const std::vector<PairMetrics>& rows)
{
    if (rows.empty()) {
        throw NumericError("mean loss of an empty table");
    }
    double s = 0.0;
    for (const auto& r : rows) {
        s += r.loss_db;
    }
    return s / static_cast<double>(rows.size());
}

PathLossFit fit_pairs(const std::vector<PairMetrics>& rows, double d0)
{
    std::vector<LossSample> samples;
    samples.reserve(rows.size());
    for (const auto& r : rows) {
        samples.push_back({r.distance, r.loss_db});
    }
    return fit_path_loss(samples, d0);
}

void to_json(nlohmann::json& j, const PathLossFit& f)
{
    j = nlohmann::json{{"exponent", f.exponent},
                       {"l0_db", f.l0_db},
                       {"d0_m", f.d0},
                       {"residual_rms_db", f.residual_rms_db},
                       {"sample_count", f.samples.size()},
                       {"loss_reduction", "band-averaged |H|^2 (linear power)"}};
}

void to_json(nlohmann::json& j, const DispersionSummary& s)
{
    j = nlohmann::json{{"worst_tau_rms_s", s.worst_tau_rms},
                       {"worst_pair", {s.worst_tx, s.worst_rx}},
                       {"bc_constant", s.bc_constant},
                       {"pair_count", s.pairs.size()}};
    if (std::isfinite(s.coherence_bandwidth)) {
        j["coherence_bandwidth_hz"] = s.coherence_bandwidth;
    }
    else {
        j["coherence_bandwidth_hz"] = nullptr;
    }
}

} // namespace pkgwave
