#pragma once

#include "pkgwave/channel.hpp"
#include "pkgwave/chan_model.hpp"
#include "pkgwave/package.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pkgwave {

enum class Provenance { surrogate, ingested };

const char* to_string(Provenance p);

// Versioned JSON container for a ChannelMatrix plus the configuration that produced it.
// A SHA-256 over the canonical body guards against edits and partial writes.
struct ChannelArchive {
    static constexpr int kVersion = 1;

    Provenance provenance = Provenance::surrogate;
    std::optional<PackageConfig> config;
    std::optional<AntennaGrid> grid;
    std::optional<SurrogateOptions> surrogate;
    std::vector<std::size_t> port_map; // port k drives antenna port_map[k]; empty = identity
    ChannelMatrix channel;
};

// Throws ParseError with codes archive_truncated, archive_malformed, archive_version,
// archive_checksum, archive_schema, archive_empty.
ChannelArchive archive_from_string(std::string_view text);
std::string archive_to_string(const ChannelArchive& archive);

ChannelArchive load_channel_archive(const std::string& path);
void save_channel_archive(const ChannelArchive& archive, const std::string& path);

// Impulse-response CSV with header columns pair_i, pair_j, delay_s, re, im (any order, extra
// columns ignored). Taps are grouped per ordered pair and sorted by delay.
ChannelMatrix read_impulse_csv(std::string_view text, std::size_t min_antennas = 0);

} // namespace pkgwave
