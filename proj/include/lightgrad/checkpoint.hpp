#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lightgrad/common.hpp"

namespace lightgrad {

// Named-parameter table, little-endian. Layout: magic "LGCK", version u32,
// count u32, then per entry: name length u16 + UTF-8 name, rank u8,
// extents u32 x rank, f32 data.
struct CheckpointEntry {
    std::string name;
    std::vector<uint32_t> extents;
    std::vector<float> data;

    int64_t numel() const {
        int64_t n = 1;
        for (uint32_t e : extents) n *= e;
        return n;
    }
};

struct Checkpoint {
    std::vector<CheckpointEntry> entries;

    void add(std::string name, std::vector<uint32_t> extents, std::vector<float> data);
    void add_scalar(const std::string& name, float v) { add(name, {1}, {v}); }
    const CheckpointEntry* find(const std::string& name) const;
    const CheckpointEntry& at(const std::string& name) const;
    float scalar(const std::string& name) const;
    int64_t total_params(const std::string& prefix_filter = "") const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace lightgrad
