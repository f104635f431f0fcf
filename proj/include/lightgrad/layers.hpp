#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lightgrad/conv.hpp"
#include "lightgrad/tensor.hpp"

namespace lightgrad::nn {

template <typename T>
struct ParamRegistry {
    std::vector<std::pair<std::string, TensorT<T>>> items;
    void add(const std::string& name, const TensorT<T>& t) { items.emplace_back(name, t); }
    int64_t count() const {
        int64_t n = 0;
        for (auto& [name, t] : items) n += t.numel();
        return n;
    }
};

template <typename T>
struct Conv2dLayer {
    TensorT<T> w, b;
    int stride = 1, pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int c_in, int c_out, int k, int stride_, int pad_, Rng& rng)
        : stride(stride_), pad(pad_) {
        w = TensorT<T>::zeros({c_out, c_in, k, k}, true);
        b = TensorT<T>::zeros({c_out}, true);
        init_uniform_fanin(w, c_in * k * k, rng);
        init_uniform_fanin(b, c_in * k * k, rng);
    }
    TensorT<T> forward(const TensorT<T>& x) const { return conv2d(x, w, b, stride, pad); }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".w", w);
        r.add(p + ".b", b);
    }
};

template <typename T>
struct ConvTranspose2dLayer {
    TensorT<T> w, b;
    int stride = 1, pad = 0;

    ConvTranspose2dLayer() = default;
    ConvTranspose2dLayer(int c_in, int c_out, int k, int stride_, int pad_, Rng& rng)
        : stride(stride_), pad(pad_) {
        w = TensorT<T>::zeros({c_in, c_out, k, k}, true);
        b = TensorT<T>::zeros({c_out}, true);
        init_uniform_fanin(w, c_in * k * k, rng);
        init_uniform_fanin(b, c_in * k * k, rng);
    }
    TensorT<T> forward(const TensorT<T>& x) const {
        return conv_transpose2d(x, w, b, stride, pad);
    }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".w", w);
        r.add(p + ".b", b);
    }
};

// Depthwise k x k conv followed by a pointwise 1x1 conv.
// Parameter count: k^2*C_in + C_in + C_in*C_out + C_out.
template <typename T>
struct SepConv2dLayer {
    TensorT<T> dw, db;  // depthwise [C_in,1,k,k] + bias
    TensorT<T> pw, pb;  // pointwise [C_out,C_in,1,1] + bias
    int stride = 1, pad = 0;

    SepConv2dLayer() = default;
    SepConv2dLayer(int c_in, int c_out, int k, Rng& rng, int stride_ = 1, int pad_ = -1)
        : stride(stride_), pad(pad_ < 0 ? k / 2 : pad_) {
        dw = TensorT<T>::zeros({c_in, 1, k, k}, true);
        db = TensorT<T>::zeros({c_in}, true);
        pw = TensorT<T>::zeros({c_out, c_in, 1, 1}, true);
        pb = TensorT<T>::zeros({c_out}, true);
        init_uniform_fanin(dw, k * k, rng);
        init_uniform_fanin(db, k * k, rng);
        init_uniform_fanin(pw, c_in, rng);
        init_uniform_fanin(pb, c_in, rng);
    }
    TensorT<T> forward(const TensorT<T>& x) const {
        return conv2d(depthwise_conv2d(x, dw, db, stride, pad), pw, pb, 1, 0);
    }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".depthwise.w", dw);
        r.add(p + ".depthwise.b", db);
        r.add(p + ".pointwise.w", pw);
        r.add(p + ".pointwise.b", pb);
    }
};

// Spatial conv slot that is separable by default and can be built dense with
// the same topology, for like-for-like parameter comparisons.
template <typename T>
struct SpatialConv {
    bool separable = true;
    SepConv2dLayer<T> sep;
    Conv2dLayer<T> dense;

    SpatialConv() = default;
    SpatialConv(int c_in, int c_out, int k, Rng& rng, bool separable_)
        : separable(separable_) {
        if (separable) sep = SepConv2dLayer<T>(c_in, c_out, k, rng);
        else dense = Conv2dLayer<T>(c_in, c_out, k, 1, k / 2, rng);
    }
    TensorT<T> forward(const TensorT<T>& x) const {
        return separable ? sep.forward(x) : dense.forward(x);
    }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        if (separable) sep.register_params(p, r);
        else dense.register_params(p, r);
    }
};

template <typename T>
struct GroupNormLayer {
    TensorT<T> gain, bias;
    int groups = 8;
    T eps = T(1e-5);

    GroupNormLayer() = default;
    GroupNormLayer(int channels, int groups_) : groups(groups_) {
        gain = TensorT<T>::zeros({channels}, true);
        bias = TensorT<T>::zeros({channels}, true);
        for (auto& v : gain.value()) v = T(1);
    }
    TensorT<T> forward(const TensorT<T>& x) const {
        return group_norm(x, groups, gain, bias, eps);
    }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".gain", gain);
        r.add(p + ".bias", bias);
    }
};

template <typename T>
struct LinearLayer {
    TensorT<T> w, b;

    LinearLayer() = default;
    LinearLayer(int in, int out, Rng& rng) {
        w = TensorT<T>::zeros({out, in}, true);
        b = TensorT<T>::zeros({out}, true);
        init_uniform_fanin(w, in, rng);
        init_uniform_fanin(b, in, rng);
    }
    TensorT<T> forward(const TensorT<T>& x) const { return linear(x, w, b); }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".w", w);
        r.add(p + ".b", b);
    }
};

template <typename T>
struct EmbeddingLayer {
    TensorT<T> table;

    EmbeddingLayer() = default;
    EmbeddingLayer(int vocab, int dim, Rng& rng) {
        table = TensorT<T>::zeros({vocab, dim}, true);
        init_uniform_fanin(table, dim, rng);
    }
    TensorT<T> forward(const std::vector<int>& ids) const { return embedding(ids, table); }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".table", table);
    }
};

// [G, A, B] -> [G, B, A]
template <typename T>
TensorT<T> transpose12(const TensorT<T>& x) {
    require_shape(x.shape().size() == 3, "transpose12: expects 3-D");
    const int G = x.dim(0), A = x.dim(1), B = x.dim(2);
    auto n = detail::make_op<T>({G, B, A}, {x.node()});
    for (int g = 0; g < G; ++g)
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < B; ++b)
                n->value[(static_cast<int64_t>(g) * B + b) * A + a] =
                    x.value()[(static_cast<int64_t>(g) * A + a) * B + b];
    if (n->requires_grad)
        n->backward = [G, A, B](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (int g = 0; g < G; ++g)
                for (int a = 0; a < A; ++a)
                    for (int b = 0; b < B; ++b)
                        p->grad[(static_cast<int64_t>(g) * A + a) * B + b] +=
                            self.grad[(static_cast<int64_t>(g) * B + b) * A + a];
        };
    return TensorT<T>(n);
}

// Linear self-attention over the flattened mels x frames sequence with a
// ReZero residual gate (gain starts at 0, so the layer starts as identity).
// Q is softmax-normalized over its channel axis (with 1/sqrt(d) temperature)
// and K over the sequence axis, so context = softmax(K)^T V is formed once
// and applied to every query position: cost is linear in sequence length.
template <typename T>
struct LinearAttentionLayer {
    SpatialConv<T> to_q, to_k, to_v, to_out;
    TensorT<T> gain;
    int heads = 1;

    LinearAttentionLayer() = default;
    LinearAttentionLayer(int channels, int heads_, int k, Rng& rng, bool separable = true)
        : heads(heads_) {
        require(channels % heads_ == 0, "linear attention: channels % heads != 0");
        to_q = SpatialConv<T>(channels, channels, k, rng, separable);
        to_k = SpatialConv<T>(channels, channels, k, rng, separable);
        to_v = SpatialConv<T>(channels, channels, k, rng, separable);
        to_out = SpatialConv<T>(channels, channels, k, rng, separable);
        gain = TensorT<T>::scalar(T(0), true);
    }

    // context-attended values before the output projection and residual gate
    TensorT<T> attention(const TensorT<T>& x) const {
        require_shape(x.shape().size() == 4, "linear attention: expects 4-D [B,C,H,W]");
        const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        const int d = C / heads;
        const int n = H * W;
        auto q = reshape(to_q.forward(x), {B * heads, d, n});
        auto k = reshape(to_k.forward(x), {B * heads, d, n});
        auto v = reshape(to_v.forward(x), {B * heads, d, n});
        auto qs = softmax_lastdim(scale(transpose12(q), T(1) / std::sqrt(static_cast<T>(d))));
        auto ks = softmax_lastdim(k);
        auto context = bmm(ks, v, false, true);  // [B*heads, d, d]
        auto attn = bmm(qs, context);            // [B*heads, n, d]
        return reshape(transpose12(attn), {B, C, H, W});
    }

    TensorT<T> forward(const TensorT<T>& x) const {
        return add(x, scale_by(to_out.forward(attention(x)), gain));
    }

    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        to_q.register_params(p + ".q", r);
        to_k.register_params(p + ".k", r);
        to_v.register_params(p + ".v", r);
        to_out.register_params(p + ".out", r);
        r.add(p + ".gain", gain);
    }
};

// Sinusoidal features of the (scaled) diffusion time pushed through a
// two-layer MLP with Mish in between. Output dim equals the sinusoid dim.
template <typename T>
struct StepEmbeddingLayer {
    int dim = 64;
    T scale = T(1000);
    LinearLayer<T> l1, l2;

    StepEmbeddingLayer() = default;
    StepEmbeddingLayer(int dim_, T scale_, Rng& rng) : dim(dim_), scale(scale_) {
        require(dim_ >= 4 && dim_ % 2 == 0, "step embedding dim must be even and >= 4");
        l1 = LinearLayer<T>(dim_, dim_ * 4, rng);
        l2 = LinearLayer<T>(dim_ * 4, dim_, rng);
    }

    // raw sinusoid features, no parameters
    std::vector<T> sinusoid(double t) const {
        const int half = dim / 2;
        std::vector<T> f(static_cast<size_t>(dim));
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
            const double arg = static_cast<double>(scale) * t * freq;
            f[static_cast<size_t>(i)] = static_cast<T>(std::sin(arg));
            f[static_cast<size_t>(half + i)] = static_cast<T>(std::cos(arg));
        }
        return f;
    }

    TensorT<T> forward(double t) const {
        auto feat = TensorT<T>::from({1, dim}, sinusoid(t));
        return l2.forward(mish(l1.forward(feat)));
    }

    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        l1.register_params(p + ".l1", r);
        l2.register_params(p + ".l2", r);
    }
};

// 1-D conv over a phoneme sequence, stored as [1, C, 1, L] 4-D tensors.
template <typename T>
struct Conv1dLayer {
    TensorT<T> w, b;  // [O, C, 1, k]
    int pad = 0;

    Conv1dLayer() = default;
    Conv1dLayer(int c_in, int c_out, int k, Rng& rng) : pad(k / 2) {
        w = TensorT<T>::zeros({c_out, c_in, 1, k}, true);
        b = TensorT<T>::zeros({c_out}, true);
        init_uniform_fanin(w, c_in * k, rng);
        init_uniform_fanin(b, c_in * k, rng);
    }
    TensorT<T> forward(const TensorT<T>& x) const { return conv2d(x, w, b, 1, 0, pad); }
    void register_params(const std::string& p, ParamRegistry<T>& r) const {
        r.add(p + ".w", w);
        r.add(p + ".b", b);
    }
};

}  // namespace lightgrad::nn
