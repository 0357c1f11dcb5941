#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pkgwave {

// Shortest representation that parses back to the same double.
std::string format_double(double v);

std::string csv_escape(std::string_view field);

// RFC 4180 writer: CRLF line endings, quoting only when needed.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& fields);
    std::size_t columns() const { return columns_; }

private:
    std::ostream& os_;
    std::size_t columns_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines; // 1-based source line of each row
};

// Parses RFC 4180 text (LF or CRLF). The first record is the header; every row must match its
// width. Throws ParseError (csv_unterminated_quote, csv_ragged_row, csv_empty).
CsvTable parse_csv(std::string_view text);

} // namespace pkgwave
