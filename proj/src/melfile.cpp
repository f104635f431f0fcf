#include "lightgrad/melfile.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace lightgrad {

namespace {

constexpr uint32_t kMelVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& buf, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(buf, v);
}

uint32_t get_u32(const char* p) {
    return static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
           static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
           static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
           static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

float get_f32(const char* p) {
    const uint32_t v = get_u32(p);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

void write_mel_file(const std::string& path, const Mel& mel) {
    std::string buf;
    buf.reserve(16 + mel.size() * 4);
    buf += "MELB";
    put_u32(buf, kMelVersion);
    put_u32(buf, static_cast<uint32_t>(mel.n_frames));
    put_u32(buf, static_cast<uint32_t>(mel.n_mels));
    for (int f = 0; f < mel.n_frames; ++f)
        for (int m = 0; m < mel.n_mels; ++m) put_f32(buf, mel.at(m, f));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw format_error("short write: " + path);
}

Mel read_mel_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open mel file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || buf.compare(0, 4, "MELB") != 0)
        throw format_error("not a mel file: " + path);
    const uint32_t version = get_u32(buf.data() + 4);
    if (version != kMelVersion)
        throw format_error("unsupported mel file version in " + path);
    const uint32_t n_frames = get_u32(buf.data() + 8);
    const uint32_t n_mels = get_u32(buf.data() + 12);
    const size_t expect = 16 + static_cast<size_t>(n_frames) * n_mels * 4;
    if (buf.size() != expect)
        throw format_error("mel file payload length mismatch: " + path);
    Mel mel(static_cast<int>(n_mels), static_cast<int>(n_frames));
    const char* p = buf.data() + 16;
    for (uint32_t f = 0; f < n_frames; ++f)
        for (uint32_t m = 0; m < n_mels; ++m, p += 4)
            mel.at(static_cast<int>(m), static_cast<int>(f)) = get_f32(p);
    return mel;
}

}  // namespace lightgrad
