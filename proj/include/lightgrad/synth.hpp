#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lightgrad/model.hpp"
#include "lightgrad/samplers.hpp"
#include "lightgrad/streaming.hpp"

namespace lightgrad {

struct SynthFlags {
    int nfe = 4;
    double tau = 1.5;
    SamplerMethod method = SamplerMethod::dpm_solver1;
    bool grid_set = false;  // when false, spacing defaults per method
    GridSpacing grid = GridSpacing::uniform_lambda;
    uint64_t seed = 0;
    // streaming
    int min_frames = 22;  // ~0.25 s at hop 256 / 22050 Hz
    int max_frames = 43;  // ~0.5 s
    bool parallel_chunks = false;
};

struct SynthResult {
    Mel mel;
    std::vector<int> durations;  // predicted (or forced) per-phoneme frames
};

SamplerConfig sampler_config(const NoiseSchedule& sched, const SynthFlags& flags);

// encode -> predicted durations (round(exp(log_dur)), min 1) -> expand ->
// sample. Pass forced_durations to override the duration predictor (teacher
// forcing for evaluation).
SynthResult synth(const TtsModel& model, const NoiseSchedule& sched,
                  const std::vector<int>& phonemes, const SynthFlags& flags,
                  const std::vector<int>* forced_durations = nullptr);

// Chunked variant of synth; on_chunk (optional) receives chunks in order.
SynthResult synth_streaming(const TtsModel& model, const NoiseSchedule& sched,
                            const std::vector<int>& phonemes, const SynthFlags& flags,
                            const std::vector<int>* forced_durations = nullptr,
                            const ChunkCallback<float>& on_chunk = {});

}  // namespace lightgrad
