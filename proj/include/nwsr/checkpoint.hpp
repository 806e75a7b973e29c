#pragma once

#include <bit>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nwsr/network.hpp"

namespace nwsr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float64");

// Checkpoint = JSON architecture descriptor + flat binary parameter blob
// (64-bit little-endian floats in registry order). `path_base` gets the
// .json / .bin extensions appended.
inline void save_checkpoint(Network& net, const std::string& path_base) {
    nlohmann::json j;
    j["format"] = "nwsr-checkpoint";
    j["version"] = 1;
    j["arch"] = arch_name(net.desc.arch);
    j["blocks"] = net.desc.blocks;
    j["filters"] = net.desc.filters;
    j["nw_depth"] = net.desc.nw_depth;
    j["eps"] = net.desc.eps;
    j["data_file"] = path_base.substr(path_base.find_last_of('/') + 1) + ".bin";
    nlohmann::json params = nlohmann::json::array();
    std::size_t total = 0;
    for (const ParamBlock& p : net.params()) {
        params.push_back({{"name", p.name}, {"count", p.n}, {"offset", total}});
        total += p.n;
    }
    j["params"] = params;
    j["total"] = total;

    std::ofstream jf(path_base + ".json");
    if (!jf) throw std::runtime_error("save_checkpoint: cannot open " + path_base + ".json");
    jf << j.dump(2) << "\n";

    std::ofstream bf(path_base + ".bin", std::ios::binary);
    if (!bf) throw std::runtime_error("save_checkpoint: cannot open " + path_base + ".bin");
    for (const ParamBlock& p : net.params())
        bf.write(reinterpret_cast<const char*>(p.w), static_cast<std::streamsize>(p.n * sizeof(double)));
    if (!bf) throw std::runtime_error("save_checkpoint: write failed");
}

inline Network load_checkpoint(const std::string& path_base) {
    std::ifstream jf(path_base + ".json");
    if (!jf) throw std::runtime_error("load_checkpoint: cannot open " + path_base + ".json");
    nlohmann::json j;
    jf >> j;
    if (j.value("format", "") != "nwsr-checkpoint" || j.value("version", 0) != 1)
        throw std::runtime_error("load_checkpoint: unrecognized checkpoint header");

    NetworkDescriptor d;
    d.arch = arch_from_name(j.at("arch").get<std::string>());
    d.blocks = j.at("blocks").get<int>();
    d.filters = j.at("filters").get<int>();
    d.nw_depth = j.at("nw_depth").get<int>();
    d.eps = j.at("eps").get<double>();
    Network net = build_network(d);

    std::ifstream bf(path_base + ".bin", std::ios::binary);
    if (!bf) throw std::runtime_error("load_checkpoint: cannot open " + path_base + ".bin");
    const auto& params_json = j.at("params");
    std::size_t idx = 0;
    for (const ParamBlock& p : net.params()) {
        if (idx >= params_json.size())
            throw std::runtime_error("load_checkpoint: parameter list too short");
        const auto& pj = params_json[idx++];
        if (pj.at("name").get<std::string>() != p.name || pj.at("count").get<std::size_t>() != p.n)
            throw std::runtime_error("load_checkpoint: parameter layout mismatch at " + p.name);
        bf.read(reinterpret_cast<char*>(p.w), static_cast<std::streamsize>(p.n * sizeof(double)));
        if (!bf) throw std::runtime_error("load_checkpoint: blob truncated at " + p.name);
    }
    return net;
}

// In-memory flat copies, used for population exploit and for bitwise
// equality checks.
inline std::vector<double> dump_params(Network& net) {
    std::vector<double> out;
    out.reserve(net.param_count());
    for (const ParamBlock& p : net.params()) out.insert(out.end(), p.w, p.w + p.n);
    return out;
}

inline void restore_params(Network& net, const std::vector<double>& flat) {
    std::size_t off = 0;
    for (const ParamBlock& p : net.params()) {
        if (off + p.n > flat.size()) throw std::invalid_argument("restore_params: size mismatch");
        std::copy(flat.begin() + off, flat.begin() + off + p.n, p.w);
        off += p.n;
    }
    if (off != flat.size()) throw std::invalid_argument("restore_params: size mismatch");
}

}  // namespace nwsr
