#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace homog {

/** Flat key/value configuration: `[section]` headers followed by
 *  `key = value` lines; keys are addressed as "section.key".  Full-line and
 *  trailing ` #` comments are stripped.  Typed getters throw ConfigError on
 *  missing keys (unless a fallback is supplied) and on malformed values. */
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key) const;

    // sorted keys beginning with `prefix` (used to enumerate channel blocks)
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace homog
