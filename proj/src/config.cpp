#include "pdpfkg/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pdpfkg {

namespace {

std::string make_index_key(const std::string& section, const std::string& key) {
    return section + "." + key;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.set(section, key, value);
    }
    return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return index_.count(make_index_key(section, key)) > 0;
}

std::optional<std::string> ConfigFile::get(const std::string& section,
                                           const std::string& key) const {
    auto it = index_.find(make_index_key(section, key));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    auto v = get(section, key);
    return v ? *v : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& section, const std::string& key,
                                 std::int64_t fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    errno = 0;
    char* end = nullptr;
    long long out = std::strtoll(v->c_str(), &end, 10);
    if (errno != 0 || end == v->c_str() || *end != '\0')
        throw ConfigError("config " + section + "." + key + ": not an integer: '" + *v + "'");
    return out;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    errno = 0;
    char* end = nullptr;
    double out = std::strtod(v->c_str(), &end);
    if (errno != 0 || end == v->c_str() || *end != '\0')
        throw ConfigError("config " + section + "." + key + ": not a number: '" + *v + "'");
    return out;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    std::string s = to_lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config " + section + "." + key + ": not a boolean: '" + *v + "'");
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
    std::string ik = make_index_key(section, key);
    auto it = index_.find(ik);
    if (it == index_.end()) {
        entries_.push_back({section, key, value});
        index_.emplace(std::move(ik), value);
    } else {
        it->second = value;  // last assignment wins
        for (auto& e : entries_)
            if (e.section == section && e.key == key) e.value = value;
    }
}

std::vector<std::pair<std::string, std::string>> ConfigFile::section_items(
    const std::string& section) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : entries_)
        if (e.section == section) out.emplace_back(e.key, e.value);
    return out;
}

std::vector<int> ConfigFile::parse_zone_list(const std::string& text) {
    std::vector<int> zones;
    for (const auto& piece : split_fields(text, ',')) {
        std::string p = trim(piece);
        if (p.empty()) continue;
        auto dots = p.find("..");
        if (dots != std::string::npos) {
            std::string a = trim(p.substr(0, dots));
            std::string b = trim(p.substr(dots + 2));
            errno = 0;
            char* end = nullptr;
            long lo = std::strtol(a.c_str(), &end, 10);
            if (errno != 0 || end == a.c_str() || *end != '\0')
                throw ConfigError("bad zone range start: '" + a + "'");
            errno = 0;
            long hi = std::strtol(b.c_str(), &end, 10);
            if (errno != 0 || end == b.c_str() || *end != '\0')
                throw ConfigError("bad zone range end: '" + b + "'");
            if (hi < lo) throw ConfigError("zone range end below start: '" + p + "'");
            for (long z = lo; z <= hi; ++z) zones.push_back(static_cast<int>(z));
        } else {
            errno = 0;
            char* end = nullptr;
            long z = std::strtol(p.c_str(), &end, 10);
            if (errno != 0 || end == p.c_str() || *end != '\0')
                throw ConfigError("bad zone id: '" + p + "'");
            zones.push_back(static_cast<int>(z));
        }
    }
    std::sort(zones.begin(), zones.end());
    zones.erase(std::unique(zones.begin(), zones.end()), zones.end());
    return zones;
}

}  // namespace pdpfkg
