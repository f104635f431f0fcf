#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace lightgrad {

// Flat key=value text config. '#' starts a comment; blank lines ignored.
struct Config {
    std::map<std::string, std::string> kv;

    static Config load(const std::string& path);
    static Config parse(const std::string& text);

    bool has(const std::string& key) const { return kv.count(key) != 0; }
    std::string get(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    uint64_t get_u64(const std::string& key, uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;

    void set(const std::string& key, const std::string& value) { kv[key] = value; }
    std::string dump() const;
};

}  // namespace lightgrad
