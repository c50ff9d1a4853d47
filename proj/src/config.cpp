#include "homog/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "homog/errors.hpp"

namespace homog {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// strip an inline comment: " #" or "\t#" onward
std::string strip_comment(const std::string& s) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if ((s[i] == ' ' || s[i] == '\t') && s[i + 1] == '#') return s.substr(0, i);
    }
    return s;
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError("malformed section header at line " + std::to_string(lineno));
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("empty section name at line " + std::to_string(lineno));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value' at line " + std::to_string(lineno));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.kv_.count(full) != 0) throw ConfigError("duplicate key: " + full);
        cfg.kv_[full] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (trim(v.substr(pos)).empty()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key " + key + " is not a number: '" + v + "'");
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (trim(v.substr(pos)).empty()) return i;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key " + key + " is not an integer: '" + v + "'");
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key " + key + " is not a boolean: '" + v + "'");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    const std::string v = get_string(key);
    std::istringstream ss(v);
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
        try {
            std::size_t pos = 0;
            const double d = std::stod(tok, &pos);
            if (pos == tok.size()) {
                out.push_back(d);
                continue;
            }
        } catch (const std::exception&) {
        }
        throw ConfigError("config key " + key + " has a non-numeric entry: '" + tok + "'");
    }
    if (out.empty()) throw ConfigError("config key " + key + " holds no numbers");
    return out;
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
    return has(key) ? get_doubles(key) : fallback;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
    const std::string v = get_string(key);
    std::istringstream ss(v);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    if (out.empty()) throw ConfigError("config key " + key + " holds no entries");
    return out;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = kv_.lower_bound(prefix); it != kv_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

}  // namespace homog
