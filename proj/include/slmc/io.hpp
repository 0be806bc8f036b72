#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "slmc/common.hpp"

namespace slmc {

// Shortest round-trippable decimal form; keeps reruns byte-identical.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Removes every file it still owns when destroyed; release() on success.
class OutputGuard {
public:
    ~OutputGuard() {
        if (released_) return;
        for (const auto& p : paths_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }
    void track(const std::filesystem::path& p) { paths_.push_back(p); }
    void release() { released_ = true; }

private:
    std::vector<std::filesystem::path> paths_;
    bool released_ = false;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open output file " + path.string());
    out << content;
    if (!out) throw ValidationError("failed writing " + path.string());
}

}  // namespace slmc
