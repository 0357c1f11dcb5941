#include "pkgwave/error.hpp"

namespace pkgwave {

namespace {
std::string format_parse(const std::string& code, std::size_t line, const std::string& detail)
{
    std::string s = code;
    if (line > 0) {
        s += " (line " + std::to_string(line) + ")";
    }
    return s + ": " + detail;
}
} // namespace

ParseError::ParseError(std::string code, std::size_t line, const std::string& detail)
    : Error(ErrorKind::input_parse, format_parse(code, line, detail)), code_(std::move(code)), line_(line)
{
}

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config:
        return "config";
    case ErrorKind::input_parse:
        return "input-parse";
    case ErrorKind::numeric:
        return "numeric";
    case ErrorKind::io:
        return "io";
    }
    return "unknown";
}

} // namespace pkgwave
