#include "lightgrad/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace lightgrad {

namespace {

constexpr uint32_t kCkptVersion = 1;

void put_u16(std::string& buf, uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, uint32_t v) {
    put_u16(buf, static_cast<uint16_t>(v & 0xffff));
    put_u16(buf, static_cast<uint16_t>(v >> 16));
}

void put_f32(std::string& buf, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(buf, v);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) {
        if (pos + n > buf.size()) throw format_error("truncated checkpoint: " + path);
    }
    uint16_t u16() {
        need(2);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 2;
        return static_cast<uint16_t>(p[0] | (p[1] << 8));
    }
    uint32_t u32() {
        const uint32_t lo = u16();
        const uint32_t hi = u16();
        return lo | (hi << 16);
    }
    float f32() {
        const uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string str(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void Checkpoint::add(std::string name, std::vector<uint32_t> extents,
                     std::vector<float> data) {
    CheckpointEntry e;
    e.name = std::move(name);
    e.extents = std::move(extents);
    e.data = std::move(data);
    require(static_cast<int64_t>(e.data.size()) == e.numel(),
            "checkpoint entry data length mismatch: " + e.name);
    require(e.extents.size() <= 255, "checkpoint entry rank > 255: " + e.name);
    require(e.name.size() <= 65535, "checkpoint entry name too long");
    entries.push_back(std::move(e));
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
    const auto* e = find(name);
    if (!e) throw format_error("checkpoint missing entry: " + name);
    return *e;
}

float Checkpoint::scalar(const std::string& name) const {
    const auto& e = at(name);
    if (e.data.size() != 1) throw format_error("checkpoint entry not scalar: " + name);
    return e.data[0];
}

int64_t Checkpoint::total_params(const std::string& prefix_filter) const {
    int64_t n = 0;
    for (const auto& e : entries)
        if (prefix_filter.empty() || e.name.rfind(prefix_filter, 0) == 0) n += e.numel();
    return n;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string buf;
    buf += "LGCK";
    put_u32(buf, kCkptVersion);
    put_u32(buf, static_cast<uint32_t>(ckpt.entries.size()));
    for (const auto& e : ckpt.entries) {
        put_u16(buf, static_cast<uint16_t>(e.name.size()));
        buf += e.name;
        buf.push_back(static_cast<char>(e.extents.size()));
        for (uint32_t x : e.extents) put_u32(buf, x);
        for (float f : e.data) put_f32(buf, f);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw format_error("short write: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || buf.compare(0, 4, "LGCK") != 0)
        throw format_error("not a checkpoint file: " + path);
    Reader r{buf, 4, path};
    const uint32_t version = r.u32();
    if (version != kCkptVersion)
        throw format_error("unsupported checkpoint version in " + path);
    const uint32_t count = r.u32();
    Checkpoint ckpt;
    ckpt.entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const uint16_t name_len = r.u16();
        e.name = r.str(name_len);
        r.need(1);
        const uint8_t rank = static_cast<uint8_t>(buf[r.pos++]);
        e.extents.resize(rank);
        for (auto& x : e.extents) x = r.u32();
        const int64_t n = e.numel();
        e.data.resize(static_cast<size_t>(n));
        for (auto& f : e.data) f = r.f32();
        ckpt.entries.push_back(std::move(e));
    }
    if (r.pos != buf.size())
        throw format_error("trailing bytes in checkpoint: " + path);
    return ckpt;
}

}  // namespace lightgrad
