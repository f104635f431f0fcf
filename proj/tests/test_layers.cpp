#include <doctest.h>

#include <chrono>
#include <cmath>

#include "helpers.hpp"
#include "lightgrad/layers.hpp"
#include "lightgrad/unet.hpp"

using namespace lightgrad;
namespace nn = lightgrad::nn;
using testutil::max_grad_rel_err;
using testutil::random_vec;

using DT = nn::TensorT<double>;

TEST_CASE("sepconv2d: centered delta depthwise kernel reduces to the pointwise conv") {
    Rng rng(200);
    nn::SepConv2dLayer<double> layer(3, 5, 3, rng);
    // depthwise = centered delta with zero bias
    std::fill(layer.dw.value().begin(), layer.dw.value().end(), 0.0);
    for (int c = 0; c < 3; ++c) layer.dw.value()[static_cast<size_t>(c * 9 + 4)] = 1.0;
    std::fill(layer.db.value().begin(), layer.db.value().end(), 0.0);

    auto x = DT::from({1, 3, 4, 6}, random_vec<double>(72, rng));
    auto y = layer.forward(x);
    auto pointwise_only = nn::conv2d(x, layer.pw, layer.pb, 1, 0);
    REQUIRE(y.shape() == pointwise_only.shape());
    for (size_t i = 0; i < y.value().size(); ++i)
        CHECK(y.value()[i] == doctest::Approx(pointwise_only.value()[i]).epsilon(1e-12));
}

TEST_CASE("sepconv2d: parameter count formula") {
    Rng rng(201);
    // k=3, C_in=64, C_out=128 -> 576 + 64 + 8192 + 128 = 8960 (vs dense 73856)
    nn::SepConv2dLayer<double> sep(64, 128, 3, rng);
    nn::ParamRegistry<double> r;
    sep.register_params("sep", r);
    CHECK(r.count() == 8960);
    CHECK(r.count() == 3 * 3 * 64 + 64 + 64 * 128 + 128);

    nn::Conv2dLayer<double> dense(64, 128, 3, 1, 1, rng);
    nn::ParamRegistry<double> rd;
    dense.register_params("dense", rd);
    CHECK(rd.count() == 73856);
}

TEST_CASE("sepconv2d: equals composition of generic convs") {
    Rng rng(202);
    const int C = 3, O = 4, k = 3;
    nn::SepConv2dLayer<double> layer(C, O, k, rng);
    auto x = DT::from({2, C, 5, 7}, random_vec<double>(2 * C * 35, rng));
    auto y = layer.forward(x);

    // blow the depthwise kernel up into a block-diagonal dense kernel and run
    // it through the generic conv op
    auto wdense = DT::zeros({C, C, k, k});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < k * k; ++i)
            wdense.value()[static_cast<size_t>((c * C + c) * k * k + i)] =
                layer.dw.value()[static_cast<size_t>(c * k * k + i)];
    auto mid = nn::conv2d(x, wdense, layer.db, 1, k / 2);
    auto ref = nn::conv2d(mid, layer.pw, layer.pb, 1, 0);
    REQUIRE(y.shape() == ref.shape());
    for (size_t i = 0; i < y.value().size(); ++i)
        CHECK(y.value()[i] == doctest::Approx(ref.value()[i]).epsilon(1e-10));
}

TEST_CASE("linear attention: ReZero makes the layer start as identity") {
    Rng rng(203);
    nn::LinearAttentionLayer<double> layer(8, 1, 3, rng);
    CHECK(layer.gain.value()[0] == 0.0);
    auto x = DT::from({1, 8, 4, 5}, random_vec<double>(160, rng));
    auto y = layer.forward(x);
    for (size_t i = 0; i < x.value().size(); ++i) CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("linear attention: singleton sequence returns the value projection") {
    Rng rng(204);
    nn::LinearAttentionLayer<double> layer(6, 1, 1, rng);
    auto x = DT::from({1, 6, 1, 1}, random_vec<double>(6, rng));
    auto attn = layer.attention(x);
    auto v = layer.to_v.forward(x);
    for (size_t i = 0; i < attn.value().size(); ++i)
        CHECK(attn.value()[i] == doctest::Approx(v.value()[i]).epsilon(1e-12));
}

TEST_CASE("linear attention: linear-order evaluation equals the quadratic order") {
    Rng rng(205);
    const int d = 4, n = 8;
    auto q = DT::from({1, d, n}, random_vec<double>(d * n, rng));
    auto k = DT::from({1, d, n}, random_vec<double>(d * n, rng));
    auto v = DT::from({1, d, n}, random_vec<double>(d * n, rng));
    auto qs = nn::softmax_lastdim(nn::scale(nn::transpose12(q), 1.0 / std::sqrt(double(d))));
    auto ks = nn::softmax_lastdim(k);
    // linear order: Q (K^T V)
    auto linear_path = nn::bmm(qs, nn::bmm(ks, v, false, true));
    // quadratic order: (Q K^T) V, with the n x n attention matrix formed
    auto quad_path = nn::bmm(nn::bmm(qs, ks), v, false, true);
    REQUIRE(linear_path.shape() == quad_path.shape());
    for (size_t i = 0; i < linear_path.value().size(); ++i)
        CHECK(std::abs(linear_path.value()[i] - quad_path.value()[i]) < 1e-5);
}

TEST_CASE("linear attention: wall time grows linearly with sequence length") {
    Rng rng(206);
    nn::LinearAttentionLayer<float> layer(32, 1, 3, rng);
    auto time_forward = [&](int W) {
        auto x = nn::TensorT<float>::from({1, 32, 16, W},
                                          random_vec<float>(static_cast<size_t>(32 * 16 * W), rng));
        auto warm = layer.forward(x);
        double best = 1e18 + warm.value()[0] * 0.0;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            auto y = layer.forward(x);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                  .count();
            best = std::min(best, dt + y.value()[0] * 0.0);
        }
        return best;
    };
    const double t256 = time_forward(16);    // n = 256
    const double t1024 = time_forward(64);   // n = 1024
    const double t4096 = time_forward(256);  // n = 4096
    CHECK(t1024 / t256 < 5.5);
    CHECK(t4096 / t1024 < 5.5);
}

TEST_CASE("step embedding: determinism, unit sinusoid pairs, continuity") {
    Rng rng(207);
    nn::StepEmbeddingLayer<double> emb(16, 1000.0, rng);

    auto a = emb.forward(0.37);
    auto b = emb.forward(0.37);
    CHECK(a.value() == b.value());

    const auto feat = emb.sinusoid(0.61);
    for (int i = 0; i < 8; ++i) {
        const double s = feat[static_cast<size_t>(i)], c = feat[static_cast<size_t>(8 + i)];
        CHECK(s * s + c * c == doctest::Approx(1.0).epsilon(1e-12));
    }

    // continuity: bound |emb(t+dt) - emb(t)| by dt * scale * max_freq * L(mlp),
    // where the mlp Lipschitz constant is bounded through Frobenius norms and
    // the mish slope bound ~1.1
    const double dt = 1e-4;
    auto e1 = emb.forward(0.5);
    auto e2 = emb.forward(0.5 + dt);
    double diff = 0.0;
    for (size_t i = 0; i < e1.value().size(); ++i)
        diff += (e1.value()[i] - e2.value()[i]) * (e1.value()[i] - e2.value()[i]);
    diff = std::sqrt(diff);
    auto frob = [](const DT& w) {
        double s = 0;
        for (double v : w.value()) s += v * v;
        return std::sqrt(s);
    };
    const double sin_rate = 1000.0 * 1.0 * std::sqrt(16.0);  // max freq 1, all coords
    const double bound = dt * sin_rate * frob(emb.l1.w) * 1.1 * frob(emb.l2.w) + 1e-12;
    CHECK(diff > 0.0);
    CHECK(diff < bound);
}

TEST_CASE("layer gradient checks (double precision)") {
    Rng rng(208);
    SUBCASE("sepconv2d") {
        nn::SepConv2dLayer<double> layer(2, 3, 3, rng);
        auto x = DT::from({1, 2, 4, 4}, random_vec<double>(32, rng));
        auto f = [&] {
            auto y = layer.forward(x);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&layer.dw, &layer.db, &layer.pw, &layer.pb}) < 1e-5);
    }
    SUBCASE("linear attention") {
        nn::LinearAttentionLayer<double> layer(4, 2, 3, rng);
        layer.gain.value()[0] = 0.35;  // move off the identity point
        auto x = DT::from({1, 4, 3, 4}, random_vec<double>(48, rng));
        auto f = [&] {
            auto y = layer.forward(x);
            return nn::mean(nn::mul(y, y));
        };
        std::vector<DT*> params = {&layer.gain, &layer.to_q.sep.dw, &layer.to_q.sep.pw,
                                   &layer.to_k.sep.dw, &layer.to_k.sep.pw, &layer.to_v.sep.dw,
                                   &layer.to_v.sep.pw, &layer.to_out.sep.dw,
                                   &layer.to_out.sep.pw};
        CHECK(max_grad_rel_err<double>(f, params) < 1e-5);
    }
    SUBCASE("step embedding mlp") {
        nn::StepEmbeddingLayer<double> emb(8, 1000.0, rng);
        auto f = [&] {
            auto y = emb.forward(0.4);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&emb.l1.w, &emb.l1.b, &emb.l2.w, &emb.l2.b}) < 1e-5);
    }
    SUBCASE("composed SepResBlock") {
        nn::SepResBlockT<double> blk(3, 5, 3, 1, 8, rng, true);
        nn::StepEmbeddingLayer<double> emb(8, 1000.0, rng);
        auto x = DT::from({1, 3, 4, 4}, random_vec<double>(48, rng));
        auto f = [&] {
            auto y = blk.forward(x, emb.forward(0.3));
            return nn::mean(nn::mul(y, y));
        };
        std::vector<DT*> params = {&blk.conv1.sep.dw, &blk.conv1.sep.pw, &blk.conv2.sep.dw,
                                   &blk.conv2.sep.pw, &blk.gn1.gain,     &blk.gn1.bias,
                                   &blk.gn2.gain,     &blk.gn2.bias,     &blk.step_proj.w,
                                   &blk.step_proj.b,  &blk.res_conv.w,   &blk.res_conv.b,
                                   &emb.l1.w,         &emb.l2.w};
        CHECK(max_grad_rel_err<double>(f, params) < 1e-5);
    }
}

TEST_CASE("parameter-count formulas hold for every layer") {
    Rng rng(209);
    auto count = [](auto& layer) {
        nn::ParamRegistry<double> r;
        layer.register_params("x", r);
        return r.count();
    };
    nn::Conv2dLayer<double> conv(5, 7, 3, 1, 1, rng);
    CHECK(count(conv) == 5 * 7 * 9 + 7);
    nn::ConvTranspose2dLayer<double> tconv(5, 7, 4, 2, 1, rng);
    CHECK(count(tconv) == 5 * 7 * 16 + 7);
    nn::SepConv2dLayer<double> sep(5, 7, 3, rng);
    CHECK(count(sep) == 9 * 5 + 5 + 5 * 7 + 7);
    nn::GroupNormLayer<double> gn(6, 2);
    CHECK(count(gn) == 12);
    nn::LinearLayer<double> lin(4, 9, rng);
    CHECK(count(lin) == 4 * 9 + 9);
    nn::EmbeddingLayer<double> emb(11, 3, rng);
    CHECK(count(emb) == 33);
    nn::LinearAttentionLayer<double> attn(6, 1, 3, rng);
    CHECK(count(attn) == 4 * (9 * 6 + 6 + 6 * 6 + 6) + 1);
    nn::StepEmbeddingLayer<double> se(8, 1000.0, rng);
    CHECK(count(se) == (8 * 32 + 32) + (32 * 8 + 8));
}
