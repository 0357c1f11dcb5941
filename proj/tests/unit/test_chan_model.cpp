#include "pkgwave/chan_model.hpp"
#include "pkgwave/constants.hpp"
#include "pkgwave/error.hpp"
#include "pkgwave/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace pkgwave;

namespace {

PackageConfig lossless_single_layer()
{
    PackageConfig c;
    c.silicon_thickness = 0.5e-3;
    c.spreader_thickness = 0.0;
    c.materials.silicon.resistivity = 0.0;
    c.boundaries.lateral_walls = LateralBoundary::absorbing;
    return c;
}

double power_db(const RayPath& p)
{
    return 20.0 * std::log10(std::abs(p.amplitude));
}

} // namespace

TEST_SUITE("chan_model")
{
    TEST_CASE("max_order 0 gives the direct path only")
    {
        PackageConfig c;
        const auto paths = enumerate_images(c, {5e-3, 5e-3, 0.3e-3}, {12e-3, 9e-3, 0.3e-3}, 0, 60.0);
        REQUIRE(paths.size() == 1);
        CHECK(paths[0].direct);
        CHECK(paths[0].bounce_count == 0);
    }

    TEST_CASE("two-ray geometry under a single top reflector")
    {
        PackageConfig c = lossless_single_layer();
        c.boundaries.bottom_conductor = false;
        const double zt = 0.1e-3, zr = 0.2e-3, rho = 5e-3, T = c.silicon_thickness;
        const auto paths = enumerate_images(c, {5e-3, 5e-3, zt}, {5e-3 + rho, 5e-3, zr}, 1, 200.0);
        REQUIRE(paths.size() == 2);
        const double v = constants::c0 / std::sqrt(11.9);
        const double d0 = std::hypot(rho, zr - zt);
        const double d1 = std::hypot(rho, 2 * T - zt - zr);
        CHECK(paths[0].delay == doctest::Approx(d0 / v).epsilon(1e-12));
        CHECK(paths[1].delay == doctest::Approx(d1 / v).epsilon(1e-12));
        CHECK(paths[1].bounce_count == 1);
        const double lambda = constants::c0 / c.carrier_frequency; // free-space reference wavelength
        CHECK(std::abs(paths[0].amplitude) == doctest::Approx(lambda / (4 * constants::pi * d0)).epsilon(1e-12));
        CHECK(std::abs(paths[1].amplitude) == doctest::Approx(lambda / (4 * constants::pi * d1)).epsilon(1e-12));
    }

    TEST_CASE("raising max_order never removes paths")
    {
        PackageConfig c;
        const Position tx{4e-3, 6e-3, 0.35e-3}, rx{13e-3, 11e-3, 0.35e-3};
        std::vector<RayPath> prev;
        for (std::size_t order = 0; order <= 6; ++order) {
            const auto cur = enumerate_images(c, tx, rx, order, 400.0);
            CHECK(cur.size() >= prev.size());
            for (const auto& p : prev) {
                const bool found = std::any_of(cur.begin(), cur.end(), [&](const RayPath& q) {
                    return std::abs(q.delay - p.delay) <= 1e-18 && std::abs(q.amplitude - p.amplitude) <= 1e-15;
                });
                CHECK(found);
            }
            prev = cur;
        }
    }

    TEST_CASE("randomized enumeration postconditions")
    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            PackageConfig c;
            c.silicon_thickness = (0.1 + 0.6 * u(rng)) * 1e-3;
            c.spreader_thickness = 0.8e-3 * u(rng);
            c.carrier_frequency = 60e9 + 60e9 * u(rng);
            if (trial % 3 == 0) {
                c.boundaries.lateral_walls = LateralBoundary::absorbing;
            }
            const double z = c.silicon_thickness * u(rng);
            const Position tx{c.chip_side * u(rng), c.chip_side * u(rng), z};
            const Position rx{c.chip_side * u(rng), c.chip_side * u(rng), c.silicon_thickness * u(rng)};
            const std::size_t order = 1 + trial % 8;
            const double floor = 20.0 + 40.0 * u(rng);
            const auto mode = trial % 2 ? CoefficientMode::angle_dependent : CoefficientMode::normal_incidence;
            const auto paths = enumerate_images(c, tx, rx, order, floor, mode);
            REQUIRE(!paths.empty());
            CHECK(std::count_if(paths.begin(), paths.end(), [](const RayPath& p) { return p.direct; }) == 1);
            double strongest = -1e300;
            for (const auto& p : paths) {
                strongest = std::max(strongest, power_db(p));
            }
            for (std::size_t k = 0; k < paths.size(); ++k) {
                CHECK(paths[k].bounce_count <= order);
                if (!paths[k].direct) {
                    CHECK(power_db(paths[k]) >= strongest - floor - 1e-9);
                }
                if (k > 0) {
                    const bool ordered = paths[k - 1].delay < paths[k].delay ||
                                         (paths[k - 1].delay == paths[k].delay &&
                                          paths[k - 1].bounce_count <= paths[k].bounce_count);
                    CHECK(ordered);
                }
            }
        }
    }

    TEST_CASE("invalid enumeration requests")
    {
        PackageConfig c;
        const Position p{5e-3, 5e-3, 0.35e-3};
        CHECK_THROWS_AS(enumerate_images(c, p, p, 4, 60.0), ConfigError);
        CHECK_THROWS_AS(enumerate_images(c, p, {6e-3, 5e-3, 0.35e-3}, 4, 0.0), ConfigError);
        CHECK_THROWS_AS(enumerate_images(c, p, {6e-3, 5e-3, 0.35e-3}, 4, -5.0), ConfigError);
    }

    TEST_CASE("synthesized channel is reciprocal, deterministic and passive")
    {
        PackageConfig c;
        c.silicon_thickness = 0.3e-3;
        c.spreader_thickness = 0.4e-3;
        const auto grid = AntennaGrid::homogeneous(c, 4, 4, 0.5);
        const auto band = FrequencyBand::around(60e9, 10e9, 201);
        const auto a = synth_channel(c, grid, band);
        const auto b = synth_channel(c, grid, band);
        CHECK(a == b);
        REQUIRE(a.responses.size() == 240);
        for (const auto& h : a.responses) {
            const auto* twin = a.find(h.rx, h.tx);
            REQUIRE(twin != nullptr);
            CHECK(twin->taps == h.taps);
            CHECK(h.energy() <= 1.0);
            CHECK_NOTHROW(h.validate());
        }
    }

    TEST_CASE("ISI-free configuration has zero delay spread")
    {
        PackageConfig c = lossless_single_layer();
        const auto grid = AntennaGrid::homogeneous(c, 4, 4, 0.5);
        SurrogateOptions o;
        o.max_order = 0;
        const auto cm = synth_channel(c, grid, FrequencyBand::around(60e9, 10e9, 21), o);
        for (const auto& h : cm.responses) {
            CHECK(h.taps.size() == 1);
            CHECK(delay_spread(pdp(h)) == 0.0);
        }
    }

    TEST_CASE("coincident antennas and out-of-band requests are rejected")
    {
        PackageConfig c;
        AntennaGrid g;
        g.rows = 1;
        g.cols = 2;
        g.positions = {{1e-3, 1e-3, 1e-4}, {1e-3, 1e-3, 1e-4}};
        CHECK_THROWS_AS(synth_channel(c, g, FrequencyBand::around(60e9, 10e9, 21)), ConfigError);
        const auto grid = AntennaGrid::homogeneous(c, 2, 2, 0.5);
        CHECK_THROWS_AS(synth_channel(c, grid, FrequencyBand{40e9, 50e9, 21}), ConfigError);
    }

    TEST_CASE("tap floor convergence on the default configuration")
    {
        PackageConfig c;
        const auto grid = AntennaGrid::homogeneous(c, 4, 4, 0.5);
        const auto band = FrequencyBand::around(60e9, 10e9, 21);
        SurrogateOptions lo, hi;
        lo.floor_db = 40.0;
        hi.floor_db = 60.0;
        const auto a = pair_metrics(synth_channel(c, grid, band, lo));
        const auto b = pair_metrics(synth_channel(c, grid, band, hi));
        REQUIRE(a.size() == b.size());
        double worst = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            worst = std::max(worst, std::abs(a[k].tau_rms - b[k].tau_rms) / b[k].tau_rms);
        }
        CHECK(worst < 0.05);
    }

    TEST_CASE("mean loss does not increase as the silicon is thinned")
    {
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 7; k >= 1; --k) {
            PackageConfig c;
            c.silicon_thickness = 0.1e-3 * k;
            const auto grid = AntennaGrid::homogeneous(c, 4, 4, 0.5);
            const double loss = mean_loss(pair_metrics(synth_channel(c, grid, FrequencyBand::around(60e9, 10e9, 101))));
            CHECK(loss <= prev);
            prev = loss;
        }
    }

    TEST_CASE("surrogate options json")
    {
        SurrogateOptions o;
        o.max_order = 5;
        o.mode = CoefficientMode::angle_dependent;
        const nlohmann::json j = o;
        const auto back = j.get<SurrogateOptions>();
        CHECK(back.max_order == 5);
        CHECK(back.mode == CoefficientMode::angle_dependent);
        CHECK_THROWS_AS(nlohmann::json({{"floor_db", -1.0}}).get<SurrogateOptions>(), ConfigError);
    }
}
