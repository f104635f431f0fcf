#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lightgrad/common.hpp"

namespace lightgrad {

// Mel-spectrogram fragment, [n_mels x n_frames] row-major (row = mel bin).
// Values are log-mel magnitudes. Float in the product paths; tests
// instantiate double for oracle arithmetic.
template <typename T>
struct BasicMel {
    int n_mels = 0;
    int n_frames = 0;
    std::vector<T> data;

    BasicMel() = default;
    BasicMel(int mels, int frames, T fill = T(0))
        : n_mels(mels), n_frames(frames),
          data(static_cast<size_t>(mels) * frames, fill) {}

    T& at(int m, int f) { return data[static_cast<size_t>(m) * n_frames + f]; }
    const T& at(int m, int f) const {
        return data[static_cast<size_t>(m) * n_frames + f];
    }
    size_t size() const { return data.size(); }

    bool same_shape(const BasicMel& o) const {
        return n_mels == o.n_mels && n_frames == o.n_frames;
    }
};

using Mel = BasicMel<float>;

template <typename T>
inline void require_same_shape(const BasicMel<T>& a, const BasicMel<T>& b,
                               const std::string& who) {
    require_shape(a.same_shape(b), who + ": mel shape mismatch (" +
                                       std::to_string(a.n_mels) + "x" +
                                       std::to_string(a.n_frames) + " vs " +
                                       std::to_string(b.n_mels) + "x" +
                                       std::to_string(b.n_frames) + ")");
}

}  // namespace lightgrad
