#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lightgrad/layers.hpp"
#include "lightgrad/mel.hpp"

namespace lightgrad {

// Monotone surjective phoneme-to-frame map as per-phoneme frame counts.
struct Alignment {
    std::vector<int> durations;  // all >= 1, sum = n_frames
    int total_frames() const {
        int t = 0;
        for (int d : durations) t += d;
        return t;
    }
};

// Most-likely monotone surjective alignment of phonemes to frames by dynamic
// programming over Q[i][j] = log_like[i][j] + max(Q[i-1][j-1], Q[i][j-1]).
// Ties prefer staying on the current phoneme. log_like is [n_phonemes x
// n_frames] row-major.
inline Alignment mas_align(const std::vector<double>& log_like, int n_phonemes,
                           int n_frames) {
    require(n_phonemes >= 1 && n_frames >= 1, "mas_align: empty problem");
    require(static_cast<size_t>(n_phonemes) * n_frames == log_like.size(),
            "mas_align: matrix size mismatch");
    require(n_frames >= n_phonemes,
            "mas_align: infeasible, fewer frames than phonemes");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> Q(static_cast<size_t>(n_phonemes) * n_frames, neg_inf);
    auto ll = [&](int i, int j) { return log_like[static_cast<size_t>(i) * n_frames + j]; };
    auto q = [&](int i, int j) -> double& { return Q[static_cast<size_t>(i) * n_frames + j]; };

    q(0, 0) = ll(0, 0);
    for (int j = 1; j < n_frames; ++j) q(0, j) = q(0, j - 1) + ll(0, j);
    for (int i = 1; i < n_phonemes; ++i)
        for (int j = i; j < n_frames; ++j) {
            const double stay = q(i, j - 1);
            const double advance = q(i - 1, j - 1);
            q(i, j) = ll(i, j) + (advance > stay ? advance : stay);
        }

    Alignment a;
    a.durations.assign(static_cast<size_t>(n_phonemes), 0);
    int i = n_phonemes - 1;
    for (int j = n_frames - 1; j >= 0; --j) {
        ++a.durations[static_cast<size_t>(i)];
        if (j > 0 && i > 0 && q(i - 1, j - 1) > q(i, j - 1)) --i;
    }
    return a;
}

// Terminal DP score of the optimal path; used for internal consistency checks.
inline double mas_best_score(const std::vector<double>& log_like, int n_phonemes,
                             int n_frames) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> Q(static_cast<size_t>(n_phonemes) * n_frames, neg_inf);
    auto ll = [&](int i, int j) { return log_like[static_cast<size_t>(i) * n_frames + j]; };
    auto q = [&](int i, int j) -> double& { return Q[static_cast<size_t>(i) * n_frames + j]; };
    q(0, 0) = ll(0, 0);
    for (int j = 1; j < n_frames; ++j) q(0, j) = q(0, j - 1) + ll(0, j);
    for (int i = 1; i < n_phonemes; ++i)
        for (int j = i; j < n_frames; ++j)
            q(i, j) = ll(i, j) + std::max(q(i - 1, j - 1), q(i, j - 1));
    return q(n_phonemes - 1, n_frames - 1);
}

// log N(y_j ; mu_i, I) for every (phoneme, frame) pair.
// mu_pp is [P x M] row-major, y is [M x F].
template <typename T>
std::vector<double> gaussian_log_like(const std::vector<T>& mu_pp, int n_phonemes,
                                      const BasicMel<T>& y) {
    const int M = y.n_mels, F = y.n_frames;
    require(static_cast<size_t>(n_phonemes) * M == mu_pp.size(),
            "gaussian_log_like: mu size mismatch");
    const double log2pi = std::log(2.0 * 3.14159265358979323846);
    std::vector<double> ll(static_cast<size_t>(n_phonemes) * F);
    for (int i = 0; i < n_phonemes; ++i)
        for (int j = 0; j < F; ++j) {
            double acc = 0.0;
            for (int m = 0; m < M; ++m) {
                const double d = static_cast<double>(y.at(m, j)) -
                                 static_cast<double>(mu_pp[static_cast<size_t>(i) * M + m]);
                acc += d * d;
            }
            ll[static_cast<size_t>(i) * F + j] = -0.5 * acc - 0.5 * M * log2pi;
        }
    return ll;
}

// Repeat per-phoneme prior rows into frames (plain, no gradient).
template <typename T>
BasicMel<T> expand(const std::vector<T>& mu_pp, int n_phonemes, int n_mels,
                   const std::vector<int>& durations) {
    require(static_cast<size_t>(n_phonemes) * n_mels == mu_pp.size(),
            "expand: mu size mismatch");
    require(durations.size() == static_cast<size_t>(n_phonemes),
            "expand: durations length mismatch");
    int F = 0;
    for (int d : durations) {
        require(d >= 1, "expand: durations must be >= 1");
        F += d;
    }
    BasicMel<T> out(n_mels, F);
    int f = 0;
    for (int p = 0; p < n_phonemes; ++p)
        for (int r = 0; r < durations[static_cast<size_t>(p)]; ++r, ++f)
            for (int m = 0; m < n_mels; ++m)
                out.at(m, f) = mu_pp[static_cast<size_t>(p) * n_mels + m];
    return out;
}

// Unit-variance Gaussian NLL, mean over elements: 1/2 (y - mu)^2 + 1/2 log 2pi.
template <typename T>
nn::TensorT<T> encoder_loss(const nn::TensorT<T>& mu_frames, const nn::TensorT<T>& y) {
    require_shape(mu_frames.shape() == y.shape(), "encoder_loss: shape mismatch");
    auto d = nn::sub(y, mu_frames);
    const T half_log2pi = static_cast<T>(0.5 * std::log(2.0 * 3.14159265358979323846));
    return nn::add_scalar(nn::scale(nn::mean(nn::mul(d, d)), T(0.5)), half_log2pi);
}

// MSE between predicted log-durations and log of the aligned durations.
template <typename T>
nn::TensorT<T> duration_loss(const nn::TensorT<T>& log_dur_pred,
                             const std::vector<int>& durations) {
    require_shape(log_dur_pred.numel() == static_cast<int64_t>(durations.size()),
                  "duration_loss: length mismatch");
    std::vector<T> target(durations.size());
    for (size_t i = 0; i < durations.size(); ++i)
        target[i] = static_cast<T>(std::log(static_cast<double>(durations[i])));
    auto tgt = nn::TensorT<T>::from({static_cast<int>(durations.size())}, std::move(target));
    auto d = nn::sub(nn::reshape(log_dur_pred, {static_cast<int>(durations.size())}), tgt);
    return nn::mean(nn::mul(d, d));
}

// ---------------------------------------------------------------------------
// phoneme encoder
// ---------------------------------------------------------------------------

struct EncoderConfig {
    int vocab = 17;      // 16 pseudo-phonemes + reserved padding id 0
    int hidden = 128;    // embedding dim
    int channels = 512;  // conv channels
    int blocks = 3;
    int kernel = 5;
    int groups = 8;
    int dur_hidden = 256;
    int dur_kernel = 3;
    int n_mels = 80;
};

namespace nn {

template <typename T>
struct EncoderOutputT {
    TensorT<T> mu_pp;    // [n_phonemes, n_mels]
    TensorT<T> log_dur;  // [n_phonemes]
};

// Embedding -> conv prenet -> residual conv blocks -> linear head for the
// prior mean; a small conv head predicts log-durations from detached
// features so the duration loss does not shape mu.
template <typename T>
struct EncoderT {
    EncoderConfig cfg;
    EmbeddingLayer<T> emb;
    Conv1dLayer<T> prenet;
    struct Block {
        Conv1dLayer<T> conv;
        GroupNormLayer<T> gn;
    };
    std::vector<Block> blocks;
    Conv1dLayer<T> mu_head;
    Conv1dLayer<T> dur1, dur2;

    static EncoderT build(const EncoderConfig& cfg, uint64_t init_seed) {
        require(cfg.vocab >= 2 && cfg.hidden >= 1 && cfg.channels >= 1, "encoder config invalid");
        require(cfg.channels % cfg.groups == 0,
                "encoder config: channels must divide by groups");
        EncoderT e;
        e.cfg = cfg;
        Rng rng(init_seed, 0x656e63);
        e.emb = EmbeddingLayer<T>(cfg.vocab, cfg.hidden, rng);
        e.prenet = Conv1dLayer<T>(cfg.hidden, cfg.channels, cfg.kernel, rng);
        for (int i = 0; i < cfg.blocks; ++i)
            e.blocks.push_back({Conv1dLayer<T>(cfg.channels, cfg.channels, cfg.kernel, rng),
                                GroupNormLayer<T>(cfg.channels, cfg.groups)});
        e.mu_head = Conv1dLayer<T>(cfg.channels, cfg.n_mels, 1, rng);
        e.dur1 = Conv1dLayer<T>(cfg.channels, cfg.dur_hidden, cfg.dur_kernel, rng);
        e.dur2 = Conv1dLayer<T>(cfg.dur_hidden, 1, 1, rng);
        return e;
    }

    EncoderOutputT<T> forward(const std::vector<int>& ids) const {
        require(!ids.empty(), "encode: empty phoneme sequence");
        const int P = static_cast<int>(ids.size());
        auto e = emb.forward(ids);  // [P, hidden]
        auto x = reshape(transpose12(reshape(e, {1, P, cfg.hidden})), {1, cfg.hidden, 1, P});
        x = mish(prenet.forward(x));
        for (const auto& blk : blocks)
            x = add(mish(blk.gn.forward(blk.conv.forward(x))), x);

        auto mu4 = mu_head.forward(x);  // [1, n_mels, 1, P]
        auto mu_pp = reshape(transpose12(reshape(mu4, {1, cfg.n_mels, P})), {P, cfg.n_mels});

        auto feat = detach(x);
        auto h = mish(dur1.forward(feat));
        auto log_dur = reshape(dur2.forward(h), {P});
        return {mu_pp, log_dur};
    }

    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        emb.register_params(p + ".emb", r);
        prenet.register_params(p + ".prenet", r);
        for (size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].conv.register_params(p + ".block" + std::to_string(i) + ".conv", r);
            blocks[i].gn.register_params(p + ".block" + std::to_string(i) + ".gn", r);
        }
        mu_head.register_params(p + ".mu_head", r);
        dur1.register_params(p + ".dur1", r);
        dur2.register_params(p + ".dur2", r);
    }
};

}  // namespace nn

using Encoder = nn::EncoderT<float>;
using EncoderOutput = nn::EncoderOutputT<float>;

}  // namespace lightgrad
