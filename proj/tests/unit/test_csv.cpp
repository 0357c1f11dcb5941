#include "pkgwave/csv.hpp"
#include "pkgwave/error.hpp"

#include <doctest.h>

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

using namespace pkgwave;

namespace {

std::string code_of(std::string_view text)
{
    try {
        parse_csv(text);
    }
    catch (const ParseError& e) {
        return e.code();
    }
    return "ok";
}

} // namespace

TEST_SUITE("csv")
{
    TEST_CASE("writer quotes only when needed and uses CRLF")
    {
        std::ostringstream os;
        CsvWriter w(os, {"a", "b"});
        w.row({"plain", "has,comma"});
        w.row({"say \"hi\"", "two\nlines"});
        CHECK(os.str() == "a,b\r\nplain,\"has,comma\"\r\n\"say \"\"hi\"\"\",\"two\nlines\"\r\n");
        CHECK_THROWS_AS(w.row({"only one"}), ConfigError);
    }

    TEST_CASE("parser reads back what the writer produced")
    {
        std::mt19937_64 rng(41);
        const std::string alphabet = "ab,\"\n\r x1";
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t cols = 1 + trial % 5;
            std::vector<std::string> header;
            for (std::size_t c = 0; c < cols; ++c) {
                header.push_back("h" + std::to_string(c));
            }
            std::vector<std::vector<std::string>> rows(1 + trial % 7, std::vector<std::string>(cols));
            for (auto& r : rows) {
                for (auto& f : r) {
                    f = "v";
                    for (std::size_t k = 0; k < rng() % 6; ++k) {
                        f += alphabet[rng() % alphabet.size()];
                    }
                }
            }
            std::ostringstream os;
            CsvWriter w(os, header);
            for (const auto& r : rows) {
                w.row(r);
            }
            const auto t = parse_csv(os.str());
            CHECK(t.header == header);
            CHECK(t.rows == rows);
        }
    }

    TEST_CASE("parser errors")
    {
        CHECK(code_of("") == "csv_empty");
        CHECK(code_of("a,b\n1\n") == "csv_ragged_row");
        CHECK(code_of("a,b\n\"1,2\n") == "csv_unterminated_quote");
        CHECK(code_of("a,b\n\"1\"x,2\n") == "csv_bad_quote");
        CHECK(code_of("a,b\n1,2\n") == "ok");
        CHECK(parse_csv("a,b\n1,2\n3,4").rows.size() == 2);
    }

    TEST_CASE("shortest round-trip number formatting")
    {
        CHECK(format_double(0.1) == "0.1");
        CHECK(format_double(1e-12) == "1e-12");
        CHECK(format_double(60e9) == "6e+10");
        std::mt19937_64 rng(42);
        for (int trial = 0; trial < 1000; ++trial) {
            const double v = std::ldexp(static_cast<double>(rng() >> 11), static_cast<int>(rng() % 200) - 150);
            const std::string s = format_double(v);
            double back = 0.0;
            std::from_chars(s.data(), s.data() + s.size(), back);
            CHECK(back == v);
        }
    }
}
