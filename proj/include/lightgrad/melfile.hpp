#pragma once

#include <string>

#include "lightgrad/mel.hpp"

namespace lightgrad {

// Binary mel format: magic "MELB", version u32, n_frames u32, n_mels u32,
// then f32 little-endian frames (one frame = n_mels values, frames in order).
void write_mel_file(const std::string& path, const Mel& mel);
Mel read_mel_file(const std::string& path);

}  // namespace lightgrad
