#pragma once

#include <stdexcept>
#include <string>

namespace pkgwave {

// Coarse failure classes; the CLI maps each one to its own exit code.
enum class ErrorKind {
    config,      // invalid configuration / arguments
    input_parse, // malformed external data (Touchstone, CSV, archive)
    numeric,     // a computation could not produce a finite result
    io,          // file system failures
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

// Parse failure with 1-based line number (0 when not line-oriented).
class ParseError : public Error {
public:
    ParseError(std::string code, std::size_t line, const std::string& detail);

    const std::string& code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string code_;
    std::size_t line_;
};

const char* to_string(ErrorKind kind);

} // namespace pkgwave
