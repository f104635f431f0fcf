#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lightgrad/layers.hpp"
#include "lightgrad/mel.hpp"

// Score network s_theta(X_t, mu, t): a three-level U-Net over [x_t; mu]
// stacked on channels, built from separable resnet blocks and linear
// attention, with stride-2 convs between levels. Downsampling is removed in
// the last level; the two upsampling blocks consume the attention outputs of
// the matching-resolution levels, concatenated on channels.

namespace lightgrad {

struct UNetConfig {
    int base_channels = 64;
    std::vector<int> channel_mults = {1, 2, 4};  // exactly 3 resolution levels
    int n_mels = 80;
    int groups = 8;
    int heads = 1;
    int res_kernel = 3;
    int attn_kernel = 3;
    double step_scale = 1000.0;
    bool separable = true;  // dense twin used for parameter comparisons
};

namespace nn {

// Two SepConv2d+GroupNorm+Mish stages with the step embedding added after
// the first Mish, plus a residual path (1x1 conv when channels change).
template <typename T>
struct SepResBlockT {
    SpatialConv<T> conv1, conv2;
    GroupNormLayer<T> gn1, gn2;
    LinearLayer<T> step_proj;
    Conv2dLayer<T> res_conv;
    bool channels_differ = false;

    SepResBlockT() = default;
    SepResBlockT(int c_in, int c_out, int k, int groups, int emb_dim, Rng& rng,
                 bool separable)
        : conv1(c_in, c_out, k, rng, separable),
          conv2(c_out, c_out, k, rng, separable),
          gn1(c_out, groups),
          gn2(c_out, groups),
          step_proj(emb_dim, c_out, rng),
          channels_differ(c_in != c_out) {
        if (channels_differ) res_conv = Conv2dLayer<T>(c_in, c_out, 1, 1, 0, rng);
    }

    TensorT<T> forward(const TensorT<T>& x, const TensorT<T>& emb) const {
        auto h = mish(gn1.forward(conv1.forward(x)));
        h = add_channel_vec(h, step_proj.forward(emb));
        h = mish(gn2.forward(conv2.forward(h)));
        return add(h, channels_differ ? res_conv.forward(x) : x);
    }

    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        conv1.register_params(p + ".conv1", r);
        conv2.register_params(p + ".conv2", r);
        gn1.register_params(p + ".gn1", r);
        gn2.register_params(p + ".gn2", r);
        step_proj.register_params(p + ".step", r);
        if (channels_differ) res_conv.register_params(p + ".res", r);
    }
};

template <typename T>
struct UNetT {
    UNetConfig cfg;
    StepEmbeddingLayer<T> step_emb;

    struct Down {
        SepResBlockT<T> r1, r2;
        LinearAttentionLayer<T> attn;
        Conv2dLayer<T> down;
        bool has_down = false;
    };
    struct Up {
        SepResBlockT<T> r1, r2;
        LinearAttentionLayer<T> attn;
        ConvTranspose2dLayer<T> up;
    };

    std::vector<Down> downs;
    SepResBlockT<T> mid1, mid2;
    LinearAttentionLayer<T> mid_attn;
    std::vector<Up> ups;
    Conv2dLayer<T> final_conv, out_conv;
    GroupNormLayer<T> final_gn;

    // test hook: applied to each level's attention output before it is stored
    // as a skip (and passed on); empty in normal operation
    std::function<TensorT<T>(int, const TensorT<T>&)> skip_tap;

    static UNetT build(const UNetConfig& cfg, uint64_t init_seed) {
        require(cfg.channel_mults.size() == 3,
                "unet config: exactly 3 resolution levels expected");
        require(cfg.n_mels % 4 == 0, "unet config: n_mels must be a multiple of 4");
        require(cfg.base_channels % 2 == 0 && cfg.base_channels >= 4,
                "unet config: base_channels must be even and >= 4");
        UNetT net;
        net.cfg = cfg;
        Rng rng(init_seed, 0x756e6574);  // independent init stream

        const int b = cfg.base_channels;
        const std::vector<int> chans = {b * cfg.channel_mults[0], b * cfg.channel_mults[1],
                                        b * cfg.channel_mults[2]};
        net.step_emb = StepEmbeddingLayer<T>(b, static_cast<T>(cfg.step_scale), rng);

        int c_prev = 2;  // [x_t; mu]
        for (int lvl = 0; lvl < 3; ++lvl) {
            Down d;
            d.r1 = SepResBlockT<T>(c_prev, chans[lvl], cfg.res_kernel, cfg.groups, b, rng,
                                   cfg.separable);
            d.r2 = SepResBlockT<T>(chans[lvl], chans[lvl], cfg.res_kernel, cfg.groups, b, rng,
                                   cfg.separable);
            d.attn = LinearAttentionLayer<T>(chans[lvl], cfg.heads, cfg.attn_kernel, rng,
                                             cfg.separable);
            d.has_down = lvl < 2;  // no downsampling in the last block
            if (d.has_down)
                d.down = Conv2dLayer<T>(chans[lvl], chans[lvl], 3, 2, 1, rng);
            net.downs.push_back(std::move(d));
            c_prev = chans[lvl];
        }

        net.mid1 = SepResBlockT<T>(chans[2], chans[2], cfg.res_kernel, cfg.groups, b, rng,
                                   cfg.separable);
        net.mid_attn =
            LinearAttentionLayer<T>(chans[2], cfg.heads, cfg.attn_kernel, rng, cfg.separable);
        net.mid2 = SepResBlockT<T>(chans[2], chans[2], cfg.res_kernel, cfg.groups, b, rng,
                                   cfg.separable);

        // up block 0 pairs with level 2 (skip at quarter resolution),
        // up block 1 pairs with level 1 (skip at half resolution)
        for (int k = 0; k < 2; ++k) {
            const int skip_c = chans[static_cast<size_t>(2 - k)];
            const int out_c = chans[static_cast<size_t>(1 - k)];
            Up u;
            u.r1 = SepResBlockT<T>(skip_c * 2, out_c, cfg.res_kernel, cfg.groups, b, rng,
                                   cfg.separable);
            u.r2 = SepResBlockT<T>(out_c, out_c, cfg.res_kernel, cfg.groups, b, rng,
                                   cfg.separable);
            u.attn =
                LinearAttentionLayer<T>(out_c, cfg.heads, cfg.attn_kernel, rng, cfg.separable);
            u.up = ConvTranspose2dLayer<T>(out_c, out_c, 4, 2, 1, rng);
            net.ups.push_back(std::move(u));
        }

        net.final_conv = Conv2dLayer<T>(chans[0], chans[0], 3, 1, 1, rng);
        net.final_gn = GroupNormLayer<T>(chans[0], cfg.groups);
        net.out_conv = Conv2dLayer<T>(chans[0], 1, 1, 1, 0, rng);
        return net;
    }

    // x_t, mu: [n_mels, n_frames]. Frames are zero-padded to a multiple of 4
    // internally and the output is trimmed back to the input frame count.
    TensorT<T> forward(const TensorT<T>& x_t, const TensorT<T>& mu, double t) const {
        require_shape(x_t.shape().size() == 2 && mu.shape().size() == 2 &&
                          x_t.shape() == mu.shape(),
                      "unet forward: x_t and mu must be equal-shape [n_mels, n_frames]");
        const int M = x_t.dim(0), F = x_t.dim(1);
        require_shape(M == cfg.n_mels, "unet forward: n_mels mismatch with config");

        auto x4 = concat_channels(reshape(x_t, {1, 1, M, F}), reshape(mu, {1, 1, M, F}));
        const int pad = (4 - F % 4) % 4;
        x4 = pad_frames(x4, pad);

        auto emb = step_emb.forward(t);

        std::vector<TensorT<T>> skips;
        auto h = x4;
        for (size_t lvl = 0; lvl < downs.size(); ++lvl) {
            const auto& d = downs[lvl];
            h = d.r1.forward(h, emb);
            h = d.r2.forward(h, emb);
            h = d.attn.forward(h);
            if (skip_tap) h = skip_tap(static_cast<int>(lvl), h);
            skips.push_back(h);
            if (d.has_down) h = d.down.forward(h);
        }

        h = mid1.forward(h, emb);
        h = mid_attn.forward(h);
        h = mid2.forward(h, emb);

        for (size_t k = 0; k < ups.size(); ++k) {
            h = concat_channels(h, skips[2 - k]);
            h = ups[k].r1.forward(h, emb);
            h = ups[k].r2.forward(h, emb);
            h = ups[k].attn.forward(h);
            h = ups[k].up.forward(h);
        }

        h = mish(final_gn.forward(final_conv.forward(h)));
        h = out_conv.forward(h);
        h = slice_frames(h, F);
        return reshape(h, {M, F});
    }

    BasicMel<T> score_mel(const BasicMel<T>& x_t, const BasicMel<T>& mu, double t) const {
        auto out = forward(TensorT<T>::from({x_t.n_mels, x_t.n_frames}, x_t.data),
                           TensorT<T>::from({mu.n_mels, mu.n_frames}, mu.data), t);
        BasicMel<T> m(x_t.n_mels, x_t.n_frames);
        m.data = out.value();
        return m;
    }

    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        step_emb.register_params(p + ".step_emb", r);
        for (size_t i = 0; i < downs.size(); ++i) {
            const std::string q = p + ".down" + std::to_string(i);
            downs[i].r1.register_params(q + ".r1", r);
            downs[i].r2.register_params(q + ".r2", r);
            downs[i].attn.register_params(q + ".attn", r);
            if (downs[i].has_down) downs[i].down.register_params(q + ".down", r);
        }
        mid1.register_params(p + ".mid1", r);
        mid_attn.register_params(p + ".mid_attn", r);
        mid2.register_params(p + ".mid2", r);
        for (size_t i = 0; i < ups.size(); ++i) {
            const std::string q = p + ".up" + std::to_string(i);
            ups[i].r1.register_params(q + ".r1", r);
            ups[i].r2.register_params(q + ".r2", r);
            ups[i].attn.register_params(q + ".attn", r);
            ups[i].up.register_params(q + ".up", r);
        }
        final_conv.register_params(p + ".final_conv", r);
        final_gn.register_params(p + ".final_gn", r);
        out_conv.register_params(p + ".out_conv", r);
    }

    ParamRegistry<T> registry() const {
        ParamRegistry<T> r;
        register_params("unet", r);
        return r;
    }

    int64_t param_count() const { return registry().count(); }
};

}  // namespace nn

using UNet = nn::UNetT<float>;

}  // namespace lightgrad
