#include "lightgrad/config.hpp"

#include <fstream>
#include <sstream>

#include "lightgrad/common.hpp"

namespace lightgrad {

namespace {
std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw format_error("config line " + std::to_string(lineno) +
                               ": expected key=value, got '" + line + "'");
        cfg.kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

std::string Config::get(const std::string& key, const std::string& def) const {
    const auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw format_error("config key '" + key + "': not a number: " + it->second);
    }
}

int Config::get_int(const std::string& key, int def) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        size_t used = 0;
        const int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw format_error("config key '" + key + "': not an integer: " + it->second);
    }
}

uint64_t Config::get_u64(const std::string& key, uint64_t def) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw format_error("config key '" + key + "': not an integer: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool def) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return def;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw format_error("config key '" + key + "': not a boolean: " + v);
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

}  // namespace lightgrad
