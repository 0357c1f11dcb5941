#include "pkgwave/touchstone.hpp"

#include "pkgwave/constants.hpp"
#include "pkgwave/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace pkgwave {

void SParameterSet::resize(std::size_t port_count, std::size_t freq_count)
{
    ports = port_count;
    frequencies.assign(freq_count, 0.0);
    values.assign(freq_count * port_count * port_count, cplx(0.0, 0.0));
}

void SParameterSet::validate() const
{
    if (ports == 0) {
        throw ConfigError("S-parameter set has no ports");
    }
    if (frequencies.empty()) {
        throw ConfigError("S-parameter set has no frequencies");
    }
    if (values.size() != frequencies.size() * ports * ports) {
        throw ConfigError("S-parameter storage does not match ports x frequencies");
    }
    for (std::size_t k = 0; k < frequencies.size(); ++k) {
        if (!std::isfinite(frequencies[k]) || frequencies[k] < 0.0) {
            throw ConfigError("S-parameter frequencies must be finite and non-negative");
        }
        if (k > 0 && !(frequencies[k] > frequencies[k - 1])) {
            throw ConfigError("S-parameter frequencies must be strictly increasing");
        }
    }
    if (!(reference_impedance > 0.0)) {
        throw ConfigError("reference impedance must be > 0");
    }
}

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == ',')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && !(line[j] == ' ' || line[j] == '\t' || line[j] == '\r' || line[j] == ',')) {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

double to_number(std::string_view tok, std::size_t line)
{
    double v = 0.0;
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (!tok.empty() && *b == '+') {
        ++b;
    }
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
        throw ParseError("non_numeric", line, "not a finite number: '" + std::string(tok) + "'");
    }
    return v;
}

struct Options {
    double unit = 1e9;
    TouchstoneFormat format = TouchstoneFormat::ma;
    double resistance = 50.0;
};

Options parse_options(const std::vector<std::string_view>& toks, std::size_t line)
{
    Options o;
    for (std::size_t k = 1; k < toks.size(); ++k) {
        const std::string t = upper(toks[k]);
        if (t == "HZ") {
            o.unit = 1.0;
        }
        else if (t == "KHZ") {
            o.unit = 1e3;
        }
        else if (t == "MHZ") {
            o.unit = 1e6;
        }
        else if (t == "GHZ") {
            o.unit = 1e9;
        }
        else if (t == "S") {
        }
        else if (t == "Y" || t == "Z" || t == "H" || t == "G") {
            throw ParseError("unsupported_parameter", line, "only S-parameters are supported, got " + t);
        }
        else if (t == "RI") {
            o.format = TouchstoneFormat::ri;
        }
        else if (t == "MA") {
            o.format = TouchstoneFormat::ma;
        }
        else if (t == "DB") {
            o.format = TouchstoneFormat::db;
        }
        else if (t == "R") {
            if (k + 1 >= toks.size()) {
                throw ParseError("bad_option_line", line, "R must be followed by a resistance");
            }
            o.resistance = to_number(toks[++k], line);
            if (!(o.resistance > 0.0)) {
                throw ParseError("bad_option_line", line, "reference resistance must be > 0");
            }
        }
        else {
            throw ParseError("bad_option_line", line, "unknown option '" + std::string(toks[k]) + "'");
        }
    }
    return o;
}

cplx decode(double a, double b, TouchstoneFormat f)
{
    const double deg = constants::pi / 180.0;
    switch (f) {
    case TouchstoneFormat::ri:
        return {a, b};
    case TouchstoneFormat::ma:
        return std::polar(a, b * deg);
    case TouchstoneFormat::db:
        return std::polar(std::pow(10.0, a / 20.0), b * deg);
    }
    return {};
}

struct Record {
    std::size_t line = 0;
    std::vector<double> values;
};

} // namespace

SParameterSet parse_touchstone(std::string_view text, std::optional<std::size_t> expected_ports)
{
    std::optional<Options> opts;
    std::vector<Record> records;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        if (auto bang = line.find('!'); bang != std::string_view::npos) {
            line = line.substr(0, bang);
        }
        if (line.find('\0') != std::string_view::npos) {
            throw ParseError("non_numeric", lineno, "embedded NUL byte");
        }
        auto toks = split(line);
        if (toks.empty()) {
            continue;
        }
        if (toks[0].front() == '#') {
            if (opts) {
                throw ParseError("duplicate_option_line", lineno, "second option line");
            }
            if (toks[0].size() > 1) {
                toks[0] = toks[0].substr(1);
                toks.insert(toks.begin(), std::string_view("#"));
            }
            opts = parse_options(toks, lineno);
            continue;
        }
        if (!opts) {
            throw ParseError("missing_option_line", lineno, "data before the '#' option line");
        }
        if (toks.size() % 2 == 1) {
            records.push_back({lineno, {}});
        }
        else if (records.empty()) {
            throw ParseError("ragged_row", lineno, "continuation line without a leading frequency");
        }
        for (auto t : toks) {
            records.back().values.push_back(to_number(t, lineno));
        }
    }
    if (!opts) {
        throw ParseError("missing_option_line", 0, "no '#' option line found");
    }
    if (records.empty()) {
        throw ParseError("no_data", lineno, "no data records");
    }
    const std::size_t count = records.front().values.size();
    const std::size_t pairs = (count - 1) / 2;
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(pairs))));
    if (n == 0 || n * n != pairs) {
        throw ParseError("ragged_row", records.front().line,
                         "record has " + std::to_string(count) + " fields, not 1 + 2*N^2");
    }
    if (expected_ports && *expected_ports != n) {
        throw ParseError("port_count_mismatch", records.front().line,
                         "data holds " + std::to_string(n) + " ports, expected " + std::to_string(*expected_ports));
    }
    SParameterSet sp;
    sp.resize(n, records.size());
    sp.reference_impedance = opts->resistance;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        if (r.values.size() != count) {
            throw ParseError("ragged_row", r.line,
                             "record has " + std::to_string(r.values.size()) + " fields, expected "
                                 + std::to_string(count));
        }
        const double f = r.values[0] * opts->unit;
        if (f < 0.0) {
            throw ParseError("non_monotone_frequency", r.line, "negative frequency");
        }
        if (k > 0 && !(f > sp.frequencies[k - 1])) {
            throw ParseError("non_monotone_frequency", r.line, "frequency does not increase");
        }
        sp.frequencies[k] = f;
        for (std::size_t e = 0; e < n * n; ++e) {
            const cplx v = decode(r.values[1 + 2 * e], r.values[2 + 2 * e], opts->format);
            std::size_t row = e / n;
            std::size_t col = e % n;
            if (n == 2) {
                std::swap(row, col); // S11 S21 S12 S22
            }
            sp.s(k, row, col) = v;
        }
    }
    return sp;
}

std::string write_touchstone(const SParameterSet& sp, TouchstoneFormat format, FrequencyUnit unit)
{
    sp.validate();
    double scale = 1e9;
    const char* uname = "GHz";
    switch (unit) {
    case FrequencyUnit::hz:
        scale = 1.0;
        uname = "Hz";
        break;
    case FrequencyUnit::khz:
        scale = 1e3;
        uname = "kHz";
        break;
    case FrequencyUnit::mhz:
        scale = 1e6;
        uname = "MHz";
        break;
    case FrequencyUnit::ghz:
        break;
    }
    const char* fname = format == TouchstoneFormat::ri ? "RI" : format == TouchstoneFormat::ma ? "MA" : "DB";
    std::ostringstream os;
    os.precision(17);
    os << "! " << sp.ports << "-port S-parameters\n";
    os << "# " << uname << " S " << fname << " R " << sp.reference_impedance << "\n";
    const double deg = 180.0 / constants::pi;
    const std::size_t n = sp.ports;
    auto emit = [&](cplx v) {
        double a = v.real();
        double b = v.imag();
        if (format != TouchstoneFormat::ri) {
            const double mag = std::abs(v);
            b = std::arg(v) * deg;
            a = format == TouchstoneFormat::ma ? mag : 20.0 * std::log10(std::max(mag, 1e-300));
        }
        os << ' ' << a << ' ' << b;
    };
    for (std::size_t k = 0; k < sp.size(); ++k) {
        os << sp.frequencies[k] / scale;
        if (n <= 2) {
            for (std::size_t e = 0; e < n * n; ++e) {
                const std::size_t row = n == 2 ? e % n : e / n;
                const std::size_t col = n == 2 ? e / n : e % n;
                emit(sp.s(k, row, col));
            }
            os << '\n';
            continue;
        }
        for (std::size_t row = 0; row < n; ++row) {
            for (std::size_t col = 0; col < n; ++col) {
                if (col > 0 && col % 4 == 0) {
                    os << '\n';
                }
                emit(sp.s(k, row, col));
            }
            os << '\n';
        }
    }
    return os.str();
}

std::optional<std::size_t> ports_from_extension(const std::string& filename)
{
    const auto dot = filename.find_last_of('.');
    if (dot == std::string::npos) {
        return std::nullopt;
    }
    const std::string ext = upper(filename.substr(dot + 1));
    if (ext.size() < 3 || ext.front() != 'S' || ext.back() != 'P') {
        return std::nullopt;
    }
    std::size_t n = 0;
    const std::string digits = ext.substr(1, ext.size() - 2);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || n == 0) {
        return std::nullopt;
    }
    return n;
}

} // namespace pkgwave
