#pragma once
// Flat INI-style config file: [section] headers, key = value lines,
// '#' comments. One file drives the whole pipeline; CLI flags override.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdpfkg/common.hpp"

namespace pdpfkg {

class ConfigFile {
public:
    ConfigFile() = default;

    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& section, const std::string& key) const;

    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;

    // Typed getters throw ConfigError naming section.key on bad values.
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    // Keys of one section in insertion order (for config echoes).
    std::vector<std::pair<std::string, std::string>> section_items(
        const std::string& section) const;

    // Zone universe syntax: "a..b" inclusive range, or comma list, or both
    // mixed ("0..9,15,20..25").
    static std::vector<int> parse_zone_list(const std::string& text);

private:
    struct Entry {
        std::string section, key, value;
    };
    std::vector<Entry> entries_;                     // insertion order
    std::map<std::string, std::string> index_;       // "section.key" -> value
};

}  // namespace pdpfkg
