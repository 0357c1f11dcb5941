#pragma once

#include "pkgwave/error.hpp"

#include <string>

#include <json.hpp>

namespace pkgwave::jsonu {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key)
{
    return path + "/" + key;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& msg)
{
    throw ConfigError("schema error at " + (path.empty() ? std::string("/") : path) + ": " + msg);
}

inline const json& object(const json& j, const std::string& path)
{
    if (!j.is_object()) {
        fail(path, "expected an object");
    }
    return j;
}

inline double number(const json& j, const std::string& key, const std::string& path)
{
    object(j, path);
    auto it = j.find(key);
    if (it == j.end()) {
        fail(join(path, key), "missing required number");
    }
    if (!it->is_number()) {
        fail(join(path, key), "expected a number");
    }
    return it->get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& path)
{
    object(j, path);
    return j.contains(key) ? number(j, key, path) : fallback;
}

inline std::size_t count_or(const json& j, const std::string& key, std::size_t fallback, const std::string& path)
{
    object(j, path);
    auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_number_integer() || it->get<long long>() < 0) {
        fail(join(path, key), "expected a non-negative integer");
    }
    return it->get<std::size_t>();
}

inline bool boolean_or(const json& j, const std::string& key, bool fallback, const std::string& path)
{
    object(j, path);
    auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_boolean()) {
        fail(join(path, key), "expected a boolean");
    }
    return it->get<bool>();
}

inline std::string string_or(const json& j, const std::string& key, const std::string& fallback,
                             const std::string& path)
{
    object(j, path);
    auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_string()) {
        fail(join(path, key), "expected a string");
    }
    return it->get<std::string>();
}

} // namespace pkgwave::jsonu
