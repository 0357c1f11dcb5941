#include "pkgwave/error.hpp"
#include "pkgwave/material.hpp"
#include "pkgwave/package.hpp"

#include <doctest.h>

using namespace pkgwave;

TEST_SUITE("material")
{
    TEST_CASE("lossless dielectric has zero attenuation")
    {
        CHECK(material_attenuation(Material::aluminum_nitride(), 60e9) == 0.0);
        CHECK(material_attenuation(Material::aluminum_nitride(), 120e9) == 0.0);
    }

    TEST_CASE("silicon attenuation matches the high-precision oracle")
    {
        // 40-digit evaluation of the lossy-medium formula, CODATA mu0 / eps0
        CHECK(material_attenuation(Material::silicon(), 60e9) == doctest::Approx(541.8329963048270).epsilon(1e-12));
        CHECK(material_attenuation(Material::silicon(), 120e9) == doctest::Approx(544.9692455888259).epsilon(1e-12));
    }

    TEST_CASE("low-loss limit is nearly frequency independent")
    {
        const double a60 = material_attenuation(Material::silicon(), 60e9);
        const double a120 = material_attenuation(Material::silicon(), 120e9);
        CHECK(std::abs(a120 - a60) / a60 < 0.01);
    }

    TEST_CASE("attenuation grows with conductivity")
    {
        double prev = 0.0;
        for (double rho : {10.0, 1.0, 0.1, 0.01}) {
            const double a = material_attenuation(Material{"x", 11.9, rho}, 60e9);
            CHECK(a > prev);
            prev = a;
        }
    }

    TEST_CASE("conductors and bad inputs are rejected")
    {
        CHECK_THROWS_AS(material_attenuation(Material::perfect_conductor(), 60e9), ConfigError);
        CHECK_THROWS_AS(material_attenuation(Material::silicon(), 0.0), ConfigError);
        CHECK_THROWS_AS(Material({"bad", 0.5, 0.0}).validate(), ConfigError);
        CHECK_THROWS_AS(Material({"bad", 2.0, -3.0}).validate(), ConfigError);
    }

    TEST_CASE("package config validation")
    {
        PackageConfig c;
        CHECK_NOTHROW(c.validate());
        c.silicon_thickness = 0.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.spreader_thickness = -1e-3;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.materials.spreader = Material::perfect_conductor();
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    TEST_CASE("package config json round trip")
    {
        PackageConfig c;
        c.silicon_thickness = 0.3e-3;
        c.boundaries.lateral_walls = LateralBoundary::absorbing;
        const nlohmann::json j = c;
        CHECK(j.get<PackageConfig>() == c);
        nlohmann::json bad = j;
        bad["materials"]["silicon"]["resistivity"] = "copper";
        CHECK_THROWS_AS(bad.get<PackageConfig>(), ConfigError);
    }

    TEST_CASE("homogeneous grid geometry")
    {
        PackageConfig c;
        const auto g = AntennaGrid::homogeneous(c, 4, 4, 0.5);
        REQUIRE(g.size() == 16);
        CHECK(g.distance(0, 1) == doctest::Approx(5e-3));
        CHECK(g.min_separation() == doctest::Approx(5e-3));
        CHECK(g.positions[5][2] == doctest::Approx(0.35e-3));
        CHECK_THROWS_AS(AntennaGrid::homogeneous(c, 0, 4, 0.5), ConfigError);
    }

    TEST_CASE("frequency band bounds")
    {
        CHECK_NOTHROW(FrequencyBand::around(60e9, 10e9, 11).validate());
        CHECK(FrequencyBand::around(60e9, 10e9, 11).start == 60e9);
        FrequencyBand b{50e9, 70e9, 21};
        CHECK_THROWS_AS(b.validate(), ConfigError);
        CHECK_NOTHROW(b.validate(true));
        CHECK(b.frequency(10) == doctest::Approx(60e9));
    }
}
