#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nwsr/version.hpp"

namespace nwsr {

// Record of one CLI invocation: enough to re-run the command byte-identically
// (argv + seeds + config snapshot) plus bookkeeping that is informative but
// not replayed (timing, artifact list).
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;  // full command line, argv[0] excluded
    nlohmann::json extra;           // config snapshot, seeds, artifact paths
    double wall_clock_sec = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["tool"] = kToolName;
        j["version"] = kVersion;
        j["command"] = command;
        j["argv"] = argv;
        j["wall_clock_sec"] = wall_clock_sec;
        const std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["finished_utc"] = buf;
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
        return j;
    }
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
    f << m.to_json().dump(2) << "\n";
}

inline nlohmann::json load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
    nlohmann::json j;
    f >> j;
    if (j.value("tool", "") != kToolName)
        throw std::runtime_error("load_manifest: not a " + std::string(kToolName) + " manifest");
    return j;
}

}  // namespace nwsr
