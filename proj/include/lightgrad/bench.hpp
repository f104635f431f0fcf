#pragma once

#include <string>
#include <vector>

#include "lightgrad/model.hpp"
#include "lightgrad/synth.hpp"

namespace lightgrad {

// Audio seconds covered by n mel frames at hop 256 / 22050 Hz.
inline double frames_to_seconds(int frames) { return frames * 256.0 / 22050.0; }

struct BenchRow {
    std::string system;
    int nfe = 0;
    double latency_s = 0.0;       // mean wall time per utterance
    double audio_s = 0.0;         // mean synthesized audio duration
    double rtf = 0.0;             // latency / audio seconds
    double first_chunk_s = 0.0;   // streaming rows only
    double peak_mem_mb = 0.0;     // max RSS delta around the measured calls
    int64_t params = 0;
};

struct BenchReport {
    std::string protocol;
    std::vector<BenchRow> rows;

    std::string table() const;
    std::string csv() const;
};

struct BenchOptions {
    int nfe_slow = 10;
    int nfe_fast = 4;
    double tau = 1.5;
    uint64_t seed = 0;
    int repeats = 5;  // timed runs per utterance after 1 warm-up
};

// Runs {non-streaming NFE=10, non-streaming NFE=4, streaming NFE=4} on a
// single thread and reports mean latency, RTF, peak memory and parameter
// count per system.
BenchReport bench(const TtsModel& model, const NoiseSchedule& sched,
                  const std::vector<std::vector<int>>& utterances,
                  const BenchOptions& opt);

}  // namespace lightgrad
