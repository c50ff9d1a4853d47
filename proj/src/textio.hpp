#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "homog/errors.hpp"

namespace homog::textio {

// Shortest decimal that round-trips a double; used for every CSV number so
// that identical runs produce byte-identical files.
inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void ensure_dir(const std::string& dir) {
    if (dir.empty() || dir == ".") return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
}

inline std::ofstream open_csv(const std::string& dir, const std::string& name) {
    ensure_dir(dir);
    const std::string path =
        dir.empty() || dir == "." ? name : (std::filesystem::path(dir) / name).string();
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file " + path);
    return out;
}

}  // namespace homog::textio
