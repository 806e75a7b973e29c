#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nwsr {

// Flat `key = value` run configuration. Full-line comments start with '#';
// values keep internal whitespace. The raw text is retained for the run
// manifest snapshot.
class RunConfig {
public:
    static RunConfig parse(const std::string& text) {
        RunConfig cfg;
        cfg.raw_ = text;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": expected key = value");
            const std::string key = trim(t.substr(0, eq));
            const std::string val = trim(t.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
            cfg.kv_[key] = val;
        }
        return cfg;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? def : it->second;
    }

    std::string require_string(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw std::runtime_error("config: missing key '" + key + "'");
        return it->second;
    }

    long long get_int(const std::string& key, long long def) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        return parse_int(key, it->second);
    }

    double get_double(const std::string& key, double def) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        return parse_double(key, it->second);
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        auto it = kv_.find(key);
        if (it == kv_.end()) return out;
        std::istringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const std::string& s : get_list(key)) out.push_back(parse_double(key, s));
        return out;
    }

    const std::string& raw_text() const { return raw_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static long long parse_int(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::runtime_error("config: bad integer for '" + key + "'");
        return v;
    }

    static double parse_double(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::runtime_error("config: bad number for '" + key + "'");
        return v;
    }

    std::map<std::string, std::string> kv_;
    std::string raw_;
};

}  // namespace nwsr
