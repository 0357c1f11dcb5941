#include "pkgwave/constants.hpp"
#include "pkgwave/error.hpp"
#include "pkgwave/metrics.hpp"
#include "pkgwave/sparams.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace pkgwave;
using fixtures::moments_oracle;
using fixtures::random_taps;
using fixtures::rel;

namespace {

SParameterSet two_port(cplx s11, cplx s21, cplx s12, cplx s22, std::size_t points = 3)
{
    SParameterSet sp;
    sp.resize(2, points);
    for (std::size_t k = 0; k < points; ++k) {
        sp.frequencies[k] = 60e9 + 1e9 * static_cast<double>(k);
        sp.s(k, 0, 0) = s11;
        sp.s(k, 1, 0) = s21;
        sp.s(k, 0, 1) = s12;
        sp.s(k, 1, 1) = s22;
    }
    return sp;
}

} // namespace

TEST_SUITE("metrics")
{
    TEST_CASE("pdp and delay spread hand examples")
    {
        ImpulseResponse one;
        one.taps = {{0.0, {1.0, 0.0}}};
        auto p = pdp(one);
        CHECK(p.powers == std::vector<double>{1.0});
        CHECK(p.mean_delay == 0.0);
        CHECK(delay_spread(p) == 0.0);

        ImpulseResponse two;
        two.taps = {{0.0, {1.0, 0.0}}, {1e-9, {0.0, 1.0}}};
        p = pdp(two);
        CHECK(p.mean_delay == doctest::Approx(0.5e-9).epsilon(1e-15));
        CHECK(delay_spread(p) == doctest::Approx(0.5e-9).epsilon(1e-15));
    }

    TEST_CASE("pdp mean and delay spread match the moment oracle")
    {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            const auto h = random_taps(rng, 1 + trial % 60, 1e-9);
            const auto [mean, spread] = moments_oracle(h);
            const auto p = pdp(h);
            CHECK(rel(p.mean_delay, static_cast<double>(mean)) <= 1e-12);
            if (h.taps.size() > 1) {
                CHECK(rel(delay_spread(p), static_cast<double>(spread)) <= 1e-9);
            }
        }
    }

    TEST_CASE("delay spread is scale invariant and shift covariant")
    {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> u(0.1, 10.0);
        for (int trial = 0; trial < 100; ++trial) {
            auto h = random_taps(rng, 2 + trial % 30, 2e-10);
            const double base = delay_spread(pdp(h));
            const double mean = pdp(h).mean_delay;
            const double c = u(rng);
            const double shift = u(rng) * 1e-10;
            auto scaled = h;
            auto shifted = h;
            for (auto& t : scaled.taps) {
                t.amplitude *= std::sqrt(c);
            }
            for (auto& t : shifted.taps) {
                t.delay += shift;
            }
            CHECK(rel(delay_spread(pdp(scaled)), base) <= 1e-9);
            CHECK(rel(delay_spread(pdp(shifted)), base) <= 1e-6);
            CHECK(rel(pdp(shifted).mean_delay, mean + shift) <= 1e-12);
        }
    }

    TEST_CASE("empty or silent responses are errors")
    {
        CHECK_THROWS_AS(pdp(ImpulseResponse{}), NumericError);
        ImpulseResponse z;
        z.taps = {{0.0, {0.0, 0.0}}, {1e-12, {0.0, 0.0}}};
        CHECK_THROWS_AS(delay_spread(pdp(z)), NumericError);
    }

    TEST_CASE("coherence bandwidth identity")
    {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(1e-12, 1e-9);
        for (int trial = 0; trial < 100; ++trial) {
            const double tau = u(rng);
            CHECK(coherence_bandwidth(tau) * tau == doctest::Approx(1.0).epsilon(1e-15));
        }
        CHECK(coherence_bandwidth(71.32e-12) == doctest::Approx(14.02131239484e9).epsilon(1e-11));
        CHECK(std::isinf(coherence_bandwidth(0.0)));
        CHECK(coherence_bandwidth(1e-10, 0.2) == doctest::Approx(2e9));
    }

    TEST_CASE("dispersion summary picks the worst pair")
    {
        ChannelMatrix cm;
        cm.antenna_count = 3;
        for (std::size_t k = 0; k < 3; ++k) {
            ImpulseResponse h;
            h.tx = k;
            h.rx = (k + 1) % 3;
            const double sep = 1e-11 * static_cast<double>(k + 1);
            h.taps = {{0.0, {1.0, 0.0}}, {2 * sep, {1.0, 0.0}}};
            cm.responses.push_back(h);
            cm.distances.push_back(1e-3);
        }
        const auto s = dispersion_summary(cm);
        CHECK(s.worst_tx == 2);
        CHECK(s.worst_tau_rms == doctest::Approx(3e-11).epsilon(1e-12));
        CHECK(s.coherence_bandwidth * s.worst_tau_rms == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(s.pairs.size() == 3);

        ChannelMatrix single;
        single.antenna_count = 2;
        single.responses = {cm.responses[0]};
        single.distances = {1e-3};
        CHECK(dispersion_summary(single).worst_tau_rms == doctest::Approx(1e-11).epsilon(1e-12));
    }

    TEST_CASE("freq_response follows the mismatch-corrected gain identity")
    {
        auto fr = freq_response(two_port(0.0, 0.3, 0.3, 0.0), 0, 1);
        CHECK(fr.power[0] == doctest::Approx(0.09).epsilon(1e-15));
        fr = freq_response(two_port(std::sqrt(0.5), 0.1, 0.1, 0.0), 0, 1);
        CHECK(fr.power[1] == doctest::Approx(0.02).epsilon(1e-14));
        const auto g = freq_response(two_port(std::sqrt(0.5), 0.1, 0.1, 0.0), 0, 1, 2.0, 2.0);
        CHECK(g.power[1] == doctest::Approx(0.005).epsilon(1e-14));
        fr = freq_response(two_port(0.0, cplx(0.0, 0.2), 0.0, 0.0), 0, 1);
        CHECK(std::arg(fr.response[0]) == doctest::Approx(constants::pi / 2));
        CHECK_THROWS_AS(freq_response(two_port(1.0, 0.1, 0.1, 0.0), 0, 1), NumericError);

        std::mt19937_64 rng(14);
        std::uniform_real_distribution<double> u(-0.6, 0.6);
        for (int trial = 0; trial < 100; ++trial) {
            const cplx s11(u(rng), u(rng)), s21(u(rng), u(rng)), s22(u(rng), u(rng));
            const double gi = 1.0 + std::abs(u(rng)), gj = 1.0 + std::abs(u(rng));
            const auto r = freq_response(two_port(s11, s21, s21, s22), 0, 1, gi, gj);
            const double expect = std::norm(s21) / ((1 - std::norm(s11)) * (1 - std::norm(s22)));
            CHECK(rel(gi * gj * r.power[2], expect) <= 1e-12);
        }
    }

    TEST_CASE("forward transform matches direct summation")
    {
        std::mt19937_64 rng(15);
        const FrequencyBand band{60e9, 70e9, 101};
        for (int trial = 0; trial < 100; ++trial) {
            const auto h = random_taps(rng, 1 + trial % 40, 3e-10);
            const auto fr = taps_to_frequency_response(h, band, 62e9);
            for (std::size_t k = 0; k < band.points; k += 7) {
                cplx ref = 0.0;
                for (const auto& t : h.taps) {
                    ref += t.amplitude * std::polar(1.0, -2 * constants::pi * (band.frequency(k) - 62e9) * t.delay);
                }
                CHECK(std::abs(fr.response[k] - ref) <= 1e-10 * (1.0 + std::abs(ref)));
                CHECK(fr.power[k] == doctest::Approx(std::norm(fr.response[k])));
            }
        }
    }

    TEST_CASE("inverse transform of flat, delayed and two-tap responses")
    {
        FrequencyResponse fr;
        const std::size_t m = 64;
        const double df = 0.25e9;
        for (std::size_t k = 0; k < m; ++k) {
            fr.frequencies.push_back(60e9 + df * static_cast<double>(k));
        }
        const double fs = 4.0 * m * df;
        auto build = [&](auto fn) {
            fr.response.assign(m, 0.0);
            fr.power.assign(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                fr.response[k] = fn(fr.frequencies[k]);
                fr.power[k] = std::norm(fr.response[k]);
            }
        };
        auto peak = [](const ImpulseResponse& h) {
            return static_cast<std::size_t>(std::max_element(h.taps.begin(), h.taps.end(),
                                                             [](const Tap& a, const Tap& b) {
                                                                 return std::abs(a.amplitude) < std::abs(b.amplitude);
                                                             }) -
                                            h.taps.begin());
        };

        build([](double) { return cplx(1.0, 0.0); });
        auto inv = impulse_from_freq(fr);
        CHECK(peak(inv.response) == 0);
        CHECK(std::abs(inv.response.taps[0].amplitude) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(inv.response.sample_rate == doctest::Approx(fs));

        const double tau0 = 37.0 / fs;
        build([&](double f) { return std::polar(1.0, -2 * constants::pi * f * tau0); });
        inv = impulse_from_freq(fr);
        CHECK(std::abs(inv.response.taps[peak(inv.response)].delay - tau0) <= 1.0 / fs);

        const double t1 = 20.0 / fs, t2 = 120.0 / fs;
        build([&](double f) {
            return std::polar(1.0, -2 * constants::pi * f * t1) + std::polar(0.5, -2 * constants::pi * f * t2);
        });
        inv = impulse_from_freq(fr);
        CHECK(std::norm(inv.response.taps[20].amplitude) == doctest::Approx(1.0).epsilon(0.01));
        CHECK(std::norm(inv.response.taps[120].amplitude) == doctest::Approx(0.25).epsilon(0.01));

        fr.has_phase = false;
        inv = impulse_from_freq(fr);
        CHECK(inv.minimum_phase);
        CHECK(inv.response.rasterized());

        fr.frequencies[10] += 1e6;
        CHECK_THROWS_AS(impulse_from_freq(fr), ConfigError);
    }

    TEST_CASE("path loss hand examples")
    {
        FrequencyResponse fr;
        fr.has_phase = false;
        fr.frequencies = {60e9, 61e9, 62e9};
        fr.power = {0.01, 0.01, 0.01};
        CHECK(path_loss_per_pair(fr, {60e9, 62e9, 3}) == doctest::Approx(20.0).epsilon(1e-14));
        fr.power = {1.0, 1.0, 1.0};
        CHECK(std::abs(path_loss_per_pair(fr, {60e9, 62e9, 3})) <= 1e-14);
        fr.power = {0.0, 0.0, 0.0};
        CHECK_THROWS_AS(path_loss_per_pair(fr, {60e9, 62e9, 3}), NumericError);
        fr.power = {1.0, 1.0, 1.0};
        CHECK_THROWS_AS(path_loss_per_pair(fr, {59e9, 62e9, 3}), ConfigError);
    }

    TEST_CASE("path loss matches a Gauss-Legendre band-average oracle")
    {
        std::mt19937_64 rng(16);
        for (int trial = 0; trial < 100; ++trial) {
            const auto c = fixtures::random_loss_case(rng, 5 + trial % 50);
            const double oracle = fixtures::loss_oracle(c);
            CHECK(std::abs(path_loss_per_pair(c.fr, c.band) - oracle) <= 1e-9 * std::max(1.0, std::abs(oracle)));
        }
    }

    TEST_CASE("fit recovers exact lines")
    {
        auto fit = fit_path_loss({{1e-3, 30.0}, {10e-3, 50.0}, {100e-3, 70.0}}, 1e-3);
        CHECK(fit.exponent == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(fit.l0_db == doctest::Approx(30.0).epsilon(1e-14));
        CHECK(fit.residual_rms_db <= 1e-12);

        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const double n = trial == 0 ? 4.61 : 0.5 + 6.0 * u(rng);
            const double l0 = 100.0 * u(rng);
            const double d0 = 1e-3 * (0.5 + u(rng));
            std::vector<LossSample> s;
            for (int k = 0; k < 3 + trial % 40; ++k) {
                const double d = d0 * (1.0 + 50.0 * u(rng));
                s.push_back({d, 10 * n * std::log10(d / d0) + l0});
            }
            fit = fit_path_loss(s, d0);
            CHECK(rel(fit.exponent, n) <= 1e-9);
            CHECK(std::abs(fit.l0_db - l0) <= 1e-9 * std::max(1.0, l0));
            CHECK(fit.residual_rms_db <= 1e-9);
        }
    }

    TEST_CASE("noisy fit agrees with the normal equations")
    {
        std::mt19937_64 rng(18);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::uniform_real_distribution<double> u(1.0, 100.0);
        std::vector<LossSample> s;
        for (int k = 0; k < 100; ++k) {
            const double d = 1e-3 * u(rng);
            s.push_back({d, 20 * std::log10(d / 1e-3) + 40 + noise(rng)});
        }
        long double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& p : s) {
            const long double x = 10 * std::log10(p.distance / 1e-3);
            sx += x;
            sy += p.loss_db;
            sxx += x * x;
            sxy += x * p.loss_db;
        }
        const long double nn = s.size();
        const double slope = static_cast<double>((nn * sxy - sx * sy) / (nn * sxx - sx * sx));
        const auto fit = fit_path_loss(s, 1e-3);
        CHECK(std::abs(fit.exponent - slope) <= 1e-9);
        CHECK(std::abs(fit.exponent - 2.0) <= 0.1);
    }

    TEST_CASE("degenerate fits are rejected")
    {
        CHECK_THROWS_AS(fit_path_loss({{2e-3, 30.0}, {2e-3, 31.0}}, 1e-3), NumericError);
        CHECK_THROWS_AS(fit_path_loss({{2e-3, 30.0}}, 1e-3), NumericError);
        CHECK_THROWS_AS(fit_path_loss({{0.5e-3, 30.0}, {2e-3, 31.0}}, 1e-3), ConfigError);
    }

    TEST_CASE("pair metrics cover every ordered pair")
    {
        ChannelMatrix cm;
        cm.antenna_count = 2;
        cm.band = {60e9, 62e9, 11};
        cm.carrier_frequency = 60e9;
        ImpulseResponse a;
        a.tx = 0;
        a.rx = 1;
        a.taps = {{1e-11, {0.1, 0.0}}, {3e-11, {0.0, 0.05}}};
        ImpulseResponse b = a;
        b.tx = 1;
        b.rx = 0;
        cm.responses = {a, b};
        cm.distances = {2e-3, 2e-3};
        const auto rows = pair_metrics(cm);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].loss_db == rows[1].loss_db);
        CHECK(rows[0].tau_rms == rows[1].tau_rms);
        CHECK(rows[0].loss_db == doctest::Approx(path_loss_per_pair(taps_to_frequency_response(a, cm.band, 60e9), cm.band)));
        CHECK(mean_loss(rows) == doctest::Approx(rows[0].loss_db));
    }
}
