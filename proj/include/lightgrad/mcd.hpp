#pragma once

#include <vector>

#include "lightgrad/mel.hpp"

namespace lightgrad {

// Orthonormal DCT-II of one log-mel column.
std::vector<double> mel_cepstrum(const float* col, int n_mels);

// Mel cepstral distortion in dB: per frame, cepstra of the log-mel column,
// coefficients 1..13 (c0 excluded), (10/ln 10) * sqrt(2 sum of squared
// differences), averaged over frames. Requires equal shapes; callers align
// frames (teacher-forced durations in eval).
double mcd(const Mel& ref, const Mel& hyp);

}  // namespace lightgrad
