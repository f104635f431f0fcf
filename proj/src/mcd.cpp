#include "lightgrad/mcd.hpp"

#include <cmath>

namespace lightgrad {

std::vector<double> mel_cepstrum(const float* col, int n_mels) {
    const double pi = 3.14159265358979323846;
    std::vector<double> c(static_cast<size_t>(n_mels));
    for (int k = 0; k < n_mels; ++k) {
        double acc = 0.0;
        for (int n = 0; n < n_mels; ++n)
            acc += static_cast<double>(col[n]) * std::cos(pi * (n + 0.5) * k / n_mels);
        const double s = k == 0 ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels);
        c[static_cast<size_t>(k)] = s * acc;
    }
    return c;
}

double mcd(const Mel& ref, const Mel& hyp) {
    require(ref.n_mels == hyp.n_mels, "mcd: n_mels mismatch");
    require(ref.n_frames == hyp.n_frames,
            "mcd: frame count mismatch (" + std::to_string(ref.n_frames) + " vs " +
                std::to_string(hyp.n_frames) + "); align durations first");
    require(ref.n_mels >= 14, "mcd: needs at least 14 mel bins for coefficients 1..13");
    require(ref.n_frames >= 1, "mcd: empty mel");

    const double scale = 10.0 / std::log(10.0);
    std::vector<float> col_a(static_cast<size_t>(ref.n_mels));
    std::vector<float> col_b(static_cast<size_t>(ref.n_mels));
    double total = 0.0;
    for (int f = 0; f < ref.n_frames; ++f) {
        for (int m = 0; m < ref.n_mels; ++m) {
            col_a[static_cast<size_t>(m)] = ref.at(m, f);
            col_b[static_cast<size_t>(m)] = hyp.at(m, f);
        }
        const auto ca = mel_cepstrum(col_a.data(), ref.n_mels);
        const auto cb = mel_cepstrum(col_b.data(), ref.n_mels);
        double ss = 0.0;
        for (int d = 1; d <= 13; ++d) {
            const double diff = ca[static_cast<size_t>(d)] - cb[static_cast<size_t>(d)];
            ss += diff * diff;
        }
        total += scale * std::sqrt(2.0 * ss);
    }
    return total / ref.n_frames;
}

}  // namespace lightgrad
