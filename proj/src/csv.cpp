#include "pkgwave/csv.hpp"

#include "pkgwave/error.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace pkgwave {

std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) {
        throw NumericError("cannot format double");
    }
    return std::string(buf.data(), ptr);
}

std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size())
{
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields)
{
    if (fields.size() != columns_) {
        throw ConfigError("csv row width does not match the header");
    }
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k > 0) {
            os_ << ',';
        }
        os_ << csv_escape(fields[k]);
    }
    os_ << "\r\n";
}

CsvTable parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> lines;
    std::vector<std::string> current;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    bool closed = false;
    std::size_t line = 1;
    std::size_t record_line = 1;
    std::size_t quote_line = 0;

    auto end_record = [&] {
        current.push_back(field);
        field.clear();
        const bool blank = current.size() == 1 && current[0].empty() && !field_started;
        if (!blank) {
            records.push_back(std::move(current));
            lines.push_back(record_line);
        }
        current.clear();
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                }
                else {
                    quoted = false;
                    closed = true;
                }
            }
            else {
                if (c == '\n') {
                    ++line;
                }
                field += c;
            }
            continue;
        }
        if (closed && c != ',' && c != '\r' && c != '\n') {
            throw ParseError("csv_bad_quote", line, "text after a closing quote");
        }
        closed = false;
        if (c == '"') {
            if (!field.empty()) {
                throw ParseError("csv_bad_quote", line, "quote inside an unquoted field");
            }
            quoted = true;
            field_started = true;
            quote_line = line;
        }
        else if (c == ',') {
            current.push_back(field);
            field.clear();
            field_started = true;
        }
        else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') {
                continue;
            }
            end_record();
            ++line;
            record_line = line;
        }
        else if (c == '\n') {
            end_record();
            ++line;
            record_line = line;
        }
        else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) {
        throw ParseError("csv_unterminated_quote", quote_line, "quoted field is never closed");
    }
    if (field_started || !field.empty() || !current.empty()) {
        end_record();
    }
    if (records.empty()) {
        throw ParseError("csv_empty", 0, "no header row");
    }
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t k = 1; k < records.size(); ++k) {
        if (records[k].size() != t.header.size()) {
            throw ParseError("csv_ragged_row", lines[k],
                             "row has " + std::to_string(records[k].size()) + " fields, header has "
                                 + std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[k]));
        t.row_lines.push_back(lines[k]);
    }
    return t;
}

} // namespace pkgwave
