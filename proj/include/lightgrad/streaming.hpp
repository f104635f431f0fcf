#pragma once

#include <functional>
#include <future>
#include <string>
#include <vector>

#include "lightgrad/mel.hpp"
#include "lightgrad/samplers.hpp"
#include "lightgrad/tts.hpp"

// Chunked decoding: split the utterance at phoneme boundaries, pad one
// phoneme of context on each side where a neighbor exists, decode each
// padded chunk with the diffusion sampler, trim the padded frames, and emit
// core frames in order.

namespace lightgrad {

struct ChunkSpan {
    int ph_begin = 0, ph_end = 0;    // core phoneme range [begin, end)
    int pad_begin = 0, pad_end = 0;  // padded range (core +/- 1 where possible)
    int fr_begin = 0, fr_end = 0;    // core frame range
    int pfr_begin = 0, pfr_end = 0;  // padded frame range
};

struct ChunkPlan {
    std::vector<ChunkSpan> chunks;
};

// Greedy accumulation of whole phonemes up to max_frames per chunk. If the
// final chunk lands under min_frames it is merged into its predecessor when
// that still fits; otherwise the short tail is unavoidable and kept.
inline ChunkPlan plan_chunks(const std::vector<int>& durations, int min_frames,
                             int max_frames) {
    require(!durations.empty(), "plan_chunks: no phonemes");
    require(min_frames >= 1 && min_frames <= max_frames,
            "plan_chunks: invalid frame bounds");
    const int P = static_cast<int>(durations.size());
    for (int d : durations) {
        require(d >= 1, "plan_chunks: durations must be >= 1");
        require(d <= max_frames,
                "plan_chunks: a single phoneme exceeds max_frames; raise max_frames");
    }

    std::vector<std::pair<int, int>> ranges;  // core phoneme ranges
    int start = 0, acc = 0;
    for (int p = 0; p < P; ++p) {
        if (acc > 0 && acc + durations[static_cast<size_t>(p)] > max_frames) {
            ranges.emplace_back(start, p);
            start = p;
            acc = 0;
        }
        acc += durations[static_cast<size_t>(p)];
    }
    ranges.emplace_back(start, P);

    if (ranges.size() >= 2) {
        int tail = 0;
        for (int p = ranges.back().first; p < ranges.back().second; ++p)
            tail += durations[static_cast<size_t>(p)];
        if (tail < min_frames) {
            int prev = 0;
            const auto& r = ranges[ranges.size() - 2];
            for (int p = r.first; p < r.second; ++p) prev += durations[static_cast<size_t>(p)];
            if (prev + tail <= max_frames) {
                ranges[ranges.size() - 2].second = ranges.back().second;
                ranges.pop_back();
            }
        }
    }

    std::vector<int> prefix(static_cast<size_t>(P) + 1, 0);
    for (int p = 0; p < P; ++p)
        prefix[static_cast<size_t>(p) + 1] = prefix[static_cast<size_t>(p)] + durations[static_cast<size_t>(p)];

    ChunkPlan plan;
    for (auto [a, b] : ranges) {
        ChunkSpan c;
        c.ph_begin = a;
        c.ph_end = b;
        c.pad_begin = a > 0 ? a - 1 : a;
        c.pad_end = b < P ? b + 1 : b;
        c.fr_begin = prefix[static_cast<size_t>(a)];
        c.fr_end = prefix[static_cast<size_t>(b)];
        c.pfr_begin = prefix[static_cast<size_t>(c.pad_begin)];
        c.pfr_end = prefix[static_cast<size_t>(c.pad_end)];
        plan.chunks.push_back(c);
    }
    return plan;
}

// (chunk index, core frame range, core mel frames), invoked in plan order.
template <typename T>
using ChunkCallback = std::function<void(int, int, int, const BasicMel<T>&)>;

namespace detail_streaming {

template <typename T, typename ScoreFn>
BasicMel<T> decode_one_chunk(const std::vector<T>& mu_pp, int n_mels,
                             const std::vector<int>& durations, const ChunkSpan& c,
                             ScoreFn&& score_net, const NoiseSchedule& sched,
                             SamplerConfig cfg, int chunk_index) {
    std::vector<T> mu_slice(static_cast<size_t>(c.pad_end - c.pad_begin) * n_mels);
    std::copy_n(mu_pp.data() + static_cast<size_t>(c.pad_begin) * n_mels, mu_slice.size(),
                mu_slice.data());
    std::vector<int> dur_slice(durations.begin() + c.pad_begin, durations.begin() + c.pad_end);
    BasicMel<T> mu = expand(mu_slice, c.pad_end - c.pad_begin, n_mels, dur_slice);

    cfg.stream = static_cast<uint64_t>(chunk_index);
    BasicMel<T> full = sample(score_net, mu, sched, cfg);

    // trim frames of the padded phonemes
    const int left = c.fr_begin - c.pfr_begin;
    const int core = c.fr_end - c.fr_begin;
    BasicMel<T> out(n_mels, core);
    for (int m = 0; m < n_mels; ++m)
        for (int f = 0; f < core; ++f) out.at(m, f) = full.at(m, left + f);
    return out;
}

}  // namespace detail_streaming

// Decode every chunk and emit core frames in order. Each chunk draws its
// prior noise from (cfg.seed, chunk index), so a single-chunk plan is
// bit-identical to non-streaming sampling with stream 0, and parallel chunk
// decoding reproduces the serial result exactly.
template <typename T, typename ScoreFn>
BasicMel<T> decode_streaming(const std::vector<T>& mu_pp, int n_mels,
                             const std::vector<int>& durations, const ChunkPlan& plan,
                             ScoreFn&& score_net, const NoiseSchedule& sched,
                             const SamplerConfig& cfg, const ChunkCallback<T>& on_chunk = {},
                             bool parallel = false) {
    require(!plan.chunks.empty(), "decode_streaming: empty plan");
    int total = 0;
    for (const auto& c : plan.chunks) total += c.fr_end - c.fr_begin;
    BasicMel<T> out(n_mels, total);

    std::vector<BasicMel<T>> cores(plan.chunks.size());
    if (parallel) {
        std::vector<std::future<BasicMel<T>>> futs;
        futs.reserve(plan.chunks.size());
        for (size_t k = 0; k < plan.chunks.size(); ++k)
            futs.push_back(std::async(std::launch::async, [&, k] {
                return detail_streaming::decode_one_chunk(mu_pp, n_mels, durations,
                                                          plan.chunks[k], score_net, sched,
                                                          cfg, static_cast<int>(k));
            }));
        for (size_t k = 0; k < plan.chunks.size(); ++k) cores[k] = futs[k].get();
        for (size_t k = 0; k < plan.chunks.size(); ++k) {
            const auto& c = plan.chunks[k];
            if (on_chunk) on_chunk(static_cast<int>(k), c.fr_begin, c.fr_end, cores[k]);
        }
    } else {
        for (size_t k = 0; k < plan.chunks.size(); ++k) {
            const auto& c = plan.chunks[k];
            cores[k] = detail_streaming::decode_one_chunk(mu_pp, n_mels, durations, c,
                                                          score_net, sched, cfg,
                                                          static_cast<int>(k));
            if (on_chunk) on_chunk(static_cast<int>(k), c.fr_begin, c.fr_end, cores[k]);
        }
    }

    for (size_t k = 0; k < plan.chunks.size(); ++k) {
        const auto& c = plan.chunks[k];
        for (int m = 0; m < n_mels; ++m)
            for (int f = 0; f < c.fr_end - c.fr_begin; ++f)
                out.at(m, c.fr_begin + f) = cores[k].at(m, f);
    }
    return out;
}

}  // namespace lightgrad
