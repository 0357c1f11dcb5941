#pragma once

#include <numbers>

namespace pkgwave::constants {

inline constexpr double c0 = 299792458.0;                  // m/s
inline constexpr double mu0 = 1.25663706212e-6;            // H/m
inline constexpr double eps0 = 8.8541878128e-12;           // F/m
inline constexpr double pi = std::numbers::pi;

} // namespace pkgwave::constants
