#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "perimts/errors.hpp"

namespace perimts {

// Flat key-value scenario format with [section] headers and '#' comments.
// Keys are addressed as "section.key". Every key must be consumed by the
// scenario parser; leftovers are configuration errors.
class Config {
public:
    static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": key outside any [section]");
            const std::string full = section + "." + key;
            if (cfg.values_.count(full))
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " +
                                  full);
            cfg.values_[full] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str(), path);
    }

    // "section.key=value" command-line override; replaces or adds the key.
    void apply_override(const std::string& spec) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || spec.find('.') == std::string::npos || eq < spec.find('.'))
            throw ConfigError("override must look like section.key=value: " + spec);
        values_[trim(spec.substr(0, eq))] = trim(spec.substr(eq + 1));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError(origin_ + ": missing key " + key);
        consumed_.insert(key);
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        return get_string(key);
    }

    double get_double(const std::string& key) { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        return get_double(key);
    }

    int get_int(const std::string& key) {
        const double v = get_double(key);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw ConfigError(origin_ + ": key " + key + " must be an integer");
        return i;
    }
    int get_int(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        return get_int(key);
    }

    bool get_bool(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const std::string v = get_string(key);
        if (v == "on" || v == "true" || v == "1") return true;
        if (v == "off" || v == "false" || v == "0") return false;
        throw ConfigError(origin_ + ": key " + key + " must be on/off");
    }

    std::vector<double> get_doubles(const std::string& key) {
        std::istringstream ss(get_string(key));
        std::vector<double> out;
        std::string tok;
        while (ss >> tok) out.push_back(to_double(key, tok));
        return out;
    }

    // numbered key family: prefix1, prefix2, ... (prefix alone also accepted)
    std::vector<std::string> family(const std::string& section, const std::string& prefix) const {
        std::vector<std::string> keys;
        const std::string base = section + "." + prefix;
        for (const auto& [k, v] : values_) {
            if (k.rfind(base, 0) != 0) continue;
            const std::string tail = k.substr(base.size());
            if (tail.empty() || std::all_of(tail.begin(), tail.end(),
                                            [](char c) { return c >= '0' && c <= '9'; }))
                keys.push_back(k);
        }
        std::sort(keys.begin(), keys.end());
        return keys;
    }

    // Unknown keys guard against silent typos.
    void require_all_consumed() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : values_)
            if (!consumed_.count(k)) unknown.push_back(k);
        if (!unknown.empty()) {
            std::string msg = origin_ + ": unknown key(s):";
            for (const auto& k : unknown) msg += " " + k;
            throw ConfigError(msg);
        }
    }

    const std::string& origin() const { return origin_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    double to_double(const std::string& key, const std::string& text) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(origin_ + ": key " + key + " has a non-numeric value '" + text +
                              "'");
        }
    }

    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace perimts
