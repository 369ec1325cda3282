// SPDX-License-Identifier: Apache-2.0
//
// Strict accessors for configuration and checkpoint documents. Every failure is
// a ConfigError carrying the dotted path of the offending field.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gensynth/error.hpp"

namespace gensynth::json {

using ojson = nlohmann::ordered_json;

inline std::string join(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
}

/// The message of a ConfigError without its field prefix.
inline std::string message_of(const ConfigError& e) {
    std::string what = e.what();
    if (!e.field().empty() && what.rfind(e.field() + ": ", 0) == 0) what = what.substr(e.field().size() + 2);
    return what;
}

/// Re-roots a component-level ConfigError under `where`, keeping its message.
inline ConfigError rebase(const std::string& where, const ConfigError& e) {
    return ConfigError(join(where, e.field()), message_of(e));
}

inline const ojson& object(const ojson& doc, const std::string& where) {
    if (!doc.is_object()) throw ConfigError(where, "must be an object");
    return doc;
}

inline void reject_unknown(const ojson& doc, std::initializer_list<std::string_view> keys, const std::string& where) {
    object(doc, where);
    for (const auto& item : doc.items()) {
        bool known = false;
        for (auto k : keys) known = known || item.key() == k;
        if (!known) throw ConfigError(join(where, item.key()), "unknown key");
    }
}

inline const ojson& field(const ojson& doc, std::string_view key, const std::string& where) {
    auto it = doc.find(std::string(key));
    if (it == doc.end()) throw ConfigError(join(where, key), "missing");
    return *it;
}

inline double number(const ojson& doc, std::string_view key, const std::string& where) {
    const auto& v = field(doc, key, where);
    if (!v.is_number()) throw ConfigError(join(where, key), "must be a number");
    return v.get<double>();
}

inline double number_or(const ojson& doc, std::string_view key, const std::string& where, double fallback) {
    return doc.contains(std::string(key)) ? number(doc, key, where) : fallback;
}

inline std::int64_t integer(const ojson& doc, std::string_view key, const std::string& where) {
    const auto& v = field(doc, key, where);
    if (!v.is_number_integer()) throw ConfigError(join(where, key), "must be an integer");
    return v.get<std::int64_t>();
}

inline std::int64_t integer_or(const ojson& doc, std::string_view key, const std::string& where,
                               std::int64_t fallback) {
    return doc.contains(std::string(key)) ? integer(doc, key, where) : fallback;
}

inline std::uint64_t unsigned_integer(const ojson& doc, std::string_view key, const std::string& where) {
    const auto& v = field(doc, key, where);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError(join(where, key), "must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

inline std::uint64_t unsigned_or(const ojson& doc, std::string_view key, const std::string& where,
                                 std::uint64_t fallback) {
    return doc.contains(std::string(key)) ? unsigned_integer(doc, key, where) : fallback;
}

inline std::string string(const ojson& doc, std::string_view key, const std::string& where) {
    const auto& v = field(doc, key, where);
    if (!v.is_string()) throw ConfigError(join(where, key), "must be a string");
    return v.get<std::string>();
}

}  // namespace gensynth::json
