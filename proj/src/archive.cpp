#include "pkgwave/archive.hpp"

#include "pkgwave/csv.hpp"
#include "pkgwave/digest.hpp"
#include "pkgwave/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

namespace pkgwave {

using nlohmann::json;

const char* to_string(Provenance p)
{
    return p == Provenance::surrogate ? "surrogate" : "ingested";
}

namespace {

constexpr const char* kSchema = "pkgwave.channel_archive";

[[noreturn]] void schema(const std::string& detail)
{
    throw ParseError("archive_schema", 0, detail);
}

json body_of(const ChannelArchive& a)
{
    const ChannelMatrix& cm = a.channel;
    json pairs = json::array();
    for (std::size_t k = 0; k < cm.responses.size(); ++k) {
        const auto& ir = cm.responses[k];
        json d = json::array();
        json re = json::array();
        json im = json::array();
        for (const auto& t : ir.taps) {
            d.push_back(t.delay);
            re.push_back(t.amplitude.real());
            im.push_back(t.amplitude.imag());
        }
        const double dist = k < cm.distances.size() ? cm.distances[k] : std::numeric_limits<double>::quiet_NaN();
        json p{{"tx", ir.tx}, {"rx", ir.rx}, {"sample_rate", ir.sample_rate}, {"delay_s", d}, {"re", re}, {"im", im}};
        p["distance_m"] = std::isfinite(dist) ? json(dist) : json(nullptr);
        pairs.push_back(std::move(p));
    }
    json b{{"schema", kSchema},
           {"version", ChannelArchive::kVersion},
           {"provenance", to_string(a.provenance)},
           {"antenna_count", cm.antenna_count},
           {"carrier_frequency", cm.carrier_frequency},
           {"band", cm.band},
           {"port_map", a.port_map},
           {"pairs", pairs}};
    b["config"] = a.config ? json(*a.config) : json(nullptr);
    b["grid"] = a.grid ? json(*a.grid) : json(nullptr);
    b["surrogate"] = a.surrogate ? json(*a.surrogate) : json(nullptr);
    return b;
}

void check_pairs(const ChannelMatrix& cm)
{
    if (cm.empty()) {
        throw ParseError("archive_empty", 0, "channel matrix has no pairs");
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& ir : cm.responses) {
        if (ir.tx >= cm.antenna_count || ir.rx >= cm.antenna_count || ir.tx == ir.rx) {
            schema("pair (" + std::to_string(ir.tx) + ", " + std::to_string(ir.rx) + ") references no valid antenna");
        }
        if (!seen.emplace(ir.tx, ir.rx).second) {
            schema("duplicate pair (" + std::to_string(ir.tx) + ", " + std::to_string(ir.rx) + ")");
        }
        try {
            ir.validate();
        }
        catch (const Error& e) {
            schema(e.what());
        }
    }
}

const json& field(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end()) {
        schema(std::string("missing field '") + key + "'");
    }
    return *it;
}

double as_double(const json& j, const char* what)
{
    if (!j.is_number()) {
        schema(std::string(what) + " must be a number");
    }
    return j.get<double>();
}

std::size_t as_index(const json& j, const char* what)
{
    if (!j.is_number_unsigned()) {
        schema(std::string(what) + " must be a non-negative integer");
    }
    return j.get<std::size_t>();
}

} // namespace

std::string archive_to_string(const ChannelArchive& archive)
{
    check_pairs(archive.channel);
    json doc = body_of(archive);
    const std::string canonical = doc.dump();
    doc["checksum"] = "sha256:" + sha256_hex(canonical);
    return doc.dump(1) + "\n";
}

ChannelArchive archive_from_string(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    }
    catch (const json::parse_error& e) {
        const bool at_end = e.byte >= text.size();
        throw ParseError(at_end ? "archive_truncated" : "archive_malformed", 0, e.what());
    }
    if (!doc.is_object()) {
        schema("top level must be an object");
    }
    if (!doc.contains("schema") || doc["schema"] != kSchema) {
        schema("not a channel archive");
    }
    const json& ver = field(doc, "version");
    if (!ver.is_number_integer() || ver.get<long long>() != ChannelArchive::kVersion) {
        throw ParseError("archive_version", 0,
                         "unsupported archive version " + ver.dump() + ", expected "
                             + std::to_string(ChannelArchive::kVersion));
    }
    const json& sum = field(doc, "checksum");
    if (!sum.is_string()) {
        schema("checksum must be a string");
    }
    json body = doc;
    body.erase("checksum");
    if (sum.get<std::string>() != "sha256:" + sha256_hex(body.dump())) {
        throw ParseError("archive_checksum", 0, "checksum mismatch; archive was modified or corrupted");
    }

    ChannelArchive a;
    try {
        const std::string prov = field(doc, "provenance").get<std::string>();
        if (prov == "surrogate") {
            a.provenance = Provenance::surrogate;
        }
        else if (prov == "ingested") {
            a.provenance = Provenance::ingested;
        }
        else {
            schema("unknown provenance '" + prov + "'");
        }
        if (!doc["config"].is_null()) {
            a.config = doc["config"].get<PackageConfig>();
        }
        if (!doc["grid"].is_null()) {
            a.grid = doc["grid"].get<AntennaGrid>();
        }
        if (doc.contains("surrogate") && !doc["surrogate"].is_null()) {
            a.surrogate = doc["surrogate"].get<SurrogateOptions>();
        }
        a.port_map = field(doc, "port_map").get<std::vector<std::size_t>>();
        ChannelMatrix& cm = a.channel;
        cm.antenna_count = as_index(field(doc, "antenna_count"), "antenna_count");
        cm.carrier_frequency = as_double(field(doc, "carrier_frequency"), "carrier_frequency");
        cm.band = field(doc, "band").get<FrequencyBand>();
        const json& pairs = field(doc, "pairs");
        if (!pairs.is_array()) {
            schema("pairs must be an array");
        }
        for (const auto& p : pairs) {
            ImpulseResponse ir;
            ir.tx = as_index(field(p, "tx"), "tx");
            ir.rx = as_index(field(p, "rx"), "rx");
            ir.sample_rate = as_double(field(p, "sample_rate"), "sample_rate");
            const json& d = field(p, "delay_s");
            const json& re = field(p, "re");
            const json& im = field(p, "im");
            if (!d.is_array() || !re.is_array() || !im.is_array() || d.size() != re.size() || d.size() != im.size()) {
                schema("delay_s/re/im must be arrays of equal length");
            }
            ir.taps.reserve(d.size());
            for (std::size_t k = 0; k < d.size(); ++k) {
                ir.taps.push_back({as_double(d[k], "delay_s"), {as_double(re[k], "re"), as_double(im[k], "im")}});
            }
            const json& dist = field(p, "distance_m");
            cm.distances.push_back(dist.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                  : as_double(dist, "distance_m"));
            cm.responses.push_back(std::move(ir));
        }
    }
    catch (const json::exception& e) {
        schema(e.what());
    }
    catch (const ConfigError& e) {
        schema(e.what());
    }
    check_pairs(a.channel);
    return a;
}

ChannelArchive load_channel_archive(const std::string& path)
{
    return archive_from_string(read_file(path));
}

void save_channel_archive(const ChannelArchive& archive, const std::string& path)
{
    write_file(path, archive_to_string(archive));
}

ChannelMatrix read_impulse_csv(std::string_view text, std::size_t min_antennas)
{
    const CsvTable t = parse_csv(text);
    auto column = [&](const char* name) {
        auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end()) {
            throw ParseError("csv_missing_column", 1, std::string("missing column '") + name + "'");
        }
        return static_cast<std::size_t>(it - t.header.begin());
    };
    const std::size_t ci = column("pair_i");
    const std::size_t cj = column("pair_j");
    const std::size_t cd = column("delay_s");
    const std::size_t cr = column("re");
    const std::size_t cim = column("im");

    auto number = [](const std::string& s, std::size_t line) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            throw ParseError("non_numeric", line, "not a finite number: '" + s + "'");
        }
        return v;
    };
    auto index = [](const std::string& s, std::size_t line) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
            throw ParseError("bad_index", line, "antenna index must be a non-negative integer: '" + s + "'");
        }
        return v;
    };

    std::map<std::pair<std::size_t, std::size_t>, std::vector<Tap>> grouped;
    std::size_t max_index = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.row_lines[r];
        const std::size_t i = index(row[ci], line);
        const std::size_t j = index(row[cj], line);
        if (i == j) {
            throw ParseError("self_pair", line, "pair_i equals pair_j");
        }
        const double d = number(row[cd], line);
        if (d < 0.0) {
            throw ParseError("negative_delay", line, "delay_s must be >= 0");
        }
        grouped[{i, j}].push_back({d, {number(row[cr], line), number(row[cim], line)}});
        max_index = std::max({max_index, i, j});
    }
    if (grouped.empty()) {
        throw ParseError("no_data", t.rows.empty() ? 1 : t.row_lines.back(), "impulse-response CSV has no rows");
    }
    ChannelMatrix cm;
    cm.antenna_count = std::max(max_index + 1, min_antennas);
    for (auto& [key, taps] : grouped) {
        std::stable_sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) { return a.delay < b.delay; });
        ImpulseResponse ir;
        ir.tx = key.first;
        ir.rx = key.second;
        ir.taps = std::move(taps);
        cm.responses.push_back(std::move(ir));
        cm.distances.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return cm;
}

} // namespace pkgwave
