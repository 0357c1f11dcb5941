#pragma once

#include "pkgwave/sparams.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace pkgwave {

enum class TouchstoneFormat { ri, ma, db };
enum class FrequencyUnit { hz, khz, mhz, ghz };

// Touchstone v1 S-parameter text. The option line is mandatory. Records may wrap across lines;
// a record starts on a line with an odd token count. Port count comes from the first record's
// size and, when given, must equal expected_ports (usually taken from the .sNp extension).
// Failures throw ParseError with one of the codes:
//   missing_option_line, bad_option_line, duplicate_option_line, unsupported_parameter,
//   non_numeric, ragged_row, non_monotone_frequency, port_count_mismatch, no_data.
SParameterSet parse_touchstone(std::string_view text, std::optional<std::size_t> expected_ports = std::nullopt);

std::string write_touchstone(const SParameterSet& sp, TouchstoneFormat format = TouchstoneFormat::ri,
                             FrequencyUnit unit = FrequencyUnit::ghz);

// Port count encoded in a file name such as "pkg.s16p"; nullopt when absent.
std::optional<std::size_t> ports_from_extension(const std::string& filename);

} // namespace pkgwave
