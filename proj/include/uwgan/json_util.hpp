#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "uwgan/error.hpp"

namespace uwgan::jsonutil {

inline void require_object(const nlohmann::json& j, std::string_view section)
{
    if (!j.is_object()) {
        throw ValidationError("config section '" + std::string(section) + "' must be an object");
    }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                           std::string_view section)
{
    require_object(j, section);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError("unknown config key '" + std::string(section) + "." + key + "'");
        }
    }
}

/// Reads `key` into `out` if present, with a typed error otherwise.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, std::string_view section)
{
    auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("config key '" + std::string(section) + "." + key + "' has the wrong type");
    }
}

}  // namespace uwgan::jsonutil
