#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lightgrad/conv.hpp"
#include "lightgrad/tensor.hpp"

using namespace lightgrad;
namespace nn = lightgrad::nn;
using testutil::max_grad_rel_err;
using testutil::random_vec;

using DT = nn::TensorT<double>;

namespace {

DT rand_param(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return DT::from(std::move(shape), random_vec<double>(static_cast<size_t>(n), rng, scale),
                    true);
}

// plain nested-loop cross-correlation, the reference for conv2d
std::vector<double> naive_conv2d(const std::vector<double>& x, int C, int H, int W,
                                 const std::vector<double>& w, int O, int kh, int kw,
                                 const std::vector<double>& b, int stride, int pad) {
    const int OH = (H + 2 * pad - kh) / stride + 1;
    const int OW = (W + 2 * pad - kw) / stride + 1;
    std::vector<double> out(static_cast<size_t>(O) * OH * OW, 0.0);
    for (int o = 0; o < O; ++o)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                double acc = b[static_cast<size_t>(o)];
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < kh; ++i)
                        for (int j = 0; j < kw; ++j) {
                            const int ih = oh * stride - pad + i;
                            const int iw = ow * stride - pad + j;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            acc += x[static_cast<size_t>((c * H + ih) * W + iw)] *
                                   w[static_cast<size_t>(((o * C + c) * kh + i) * kw + j)];
                        }
                out[static_cast<size_t>((o * OH + oh) * OW + ow)] = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("autodiff: elementwise and reduction gradients") {
    Rng rng(100);
    auto a = rand_param({3, 4}, rng);
    auto b = rand_param({3, 4}, rng);

    SUBCASE("add/sub/mul/scale/add_scalar") {
        auto f = [&] {
            auto y = nn::mul(nn::add(a, b), nn::sub(a, nn::scale(b, 0.5)));
            return nn::mean(nn::add_scalar(y, 0.25));
        };
        CHECK(max_grad_rel_err<double>(f, {&a, &b}) < 1e-5);
    }
    SUBCASE("mish") {
        auto f = [&] { return nn::mean(nn::mish(a)); };
        CHECK(max_grad_rel_err<double>(f, {&a}) < 1e-5);
    }
    SUBCASE("sum") {
        auto f = [&] { return nn::sum(nn::mul(a, a)); };
        CHECK(max_grad_rel_err<double>(f, {&a}) < 1e-5);
    }
    SUBCASE("scale_by") {
        auto g = DT::scalar(0.7, true);
        auto f = [&] { return nn::mean(nn::scale_by(a, g)); };
        CHECK(max_grad_rel_err<double>(f, {&a, &g}) < 1e-5);
    }
}

TEST_CASE("mish values") {
    auto x = DT::from({3}, {0.0, 1.0, 20.0});
    auto y = nn::mish(x);
    CHECK(y.value()[0] == 0.0);
    CHECK(y.value()[1] == doctest::Approx(0.865098).epsilon(1e-5));
    CHECK(std::abs(y.value()[2] - 20.0) < 1e-6);  // mish(x) -> x for large x
}

TEST_CASE("autodiff: shape ops gradients") {
    Rng rng(101);
    SUBCASE("reshape") {
        auto a = rand_param({2, 6}, rng);
        auto f = [&] { return nn::mean(nn::mul(nn::reshape(a, {3, 4}), nn::reshape(a, {3, 4}))); };
        CHECK(max_grad_rel_err<double>(f, {&a}) < 1e-5);
    }
    SUBCASE("concat_channels") {
        auto a = rand_param({1, 2, 3, 4}, rng);
        auto b = rand_param({1, 3, 3, 4}, rng);
        auto f = [&] {
            auto c = nn::concat_channels(a, b);
            return nn::mean(nn::mul(c, c));
        };
        CHECK(max_grad_rel_err<double>(f, {&a, &b}) < 1e-5);
    }
    SUBCASE("pad and slice frames") {
        auto a = rand_param({1, 2, 3, 5}, rng);
        auto f = [&] {
            auto p = nn::pad_frames(a, 3);
            auto s = nn::slice_frames(p, 4);
            return nn::mean(nn::mul(s, s));
        };
        CHECK(max_grad_rel_err<double>(f, {&a}) < 1e-5);
    }
}

TEST_CASE("autodiff: linear and bmm gradients") {
    Rng rng(102);
    SUBCASE("linear") {
        auto x = rand_param({3, 4}, rng);
        auto w = rand_param({5, 4}, rng);
        auto b = rand_param({5}, rng);
        auto f = [&] {
            auto y = nn::linear(x, w, b);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&x, &w, &b}) < 1e-5);
    }
    SUBCASE("bmm all transpose combinations") {
        for (bool ta : {false, true})
            for (bool tb : {false, true}) {
                auto A = ta ? rand_param({2, 4, 3}, rng) : rand_param({2, 3, 4}, rng);
                auto B = tb ? rand_param({2, 5, 4}, rng) : rand_param({2, 4, 5}, rng);
                auto f = [&] {
                    auto y = nn::bmm(A, B, ta, tb);
                    return nn::mean(nn::mul(y, y));
                };
                CHECK(max_grad_rel_err<double>(f, {&A, &B}) < 1e-5);
            }
    }
}

TEST_CASE("autodiff: softmax, group_norm, broadcast add") {
    Rng rng(103);
    SUBCASE("softmax_lastdim") {
        auto x = rand_param({2, 3, 5}, rng, 2.0);
        auto w = DT::from({2, 3, 5}, random_vec<double>(30, rng));
        auto f = [&] { return nn::mean(nn::mul(nn::softmax_lastdim(x), w)); };
        CHECK(max_grad_rel_err<double>(f, {&x}) < 1e-5);
    }
    SUBCASE("group_norm") {
        auto x = rand_param({2, 4, 3, 3}, rng);
        auto gain = rand_param({4}, rng);
        auto bias = rand_param({4}, rng);
        auto w = DT::from({2, 4, 3, 3}, random_vec<double>(72, rng));
        auto f = [&] { return nn::mean(nn::mul(nn::group_norm(x, 2, gain, bias), w)); };
        CHECK(max_grad_rel_err<double>(f, {&x, &gain, &bias}) < 1e-5);
    }
    SUBCASE("add_channel_vec") {
        auto x = rand_param({2, 3, 2, 2}, rng);
        auto v = rand_param({3}, rng);
        auto f = [&] {
            auto y = nn::add_channel_vec(x, v);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&x, &v}) < 1e-5);
    }
}

TEST_CASE("group_norm: statistics and naive reference") {
    Rng rng(104);
    const int B = 2, C = 6, H = 3, W = 4, groups = 3;
    auto x = rand_param({B, C, H, W}, rng, 2.0);
    auto gain = DT::from({C}, std::vector<double>(C, 1.0));
    auto bias = DT::from({C}, std::vector<double>(C, 0.0));
    auto y = nn::group_norm(x, groups, gain, bias);

    // constant input -> zero output
    auto cst = DT::from({1, 4, 2, 2}, std::vector<double>(16, 3.7));
    auto g1 = DT::from({4}, std::vector<double>(4, 1.0));
    auto b0 = DT::from({4}, std::vector<double>(4, 0.0));
    auto gn_cst = nn::group_norm(cst, 2, g1, b0);
    for (double v : gn_cst.value()) CHECK(std::abs(v) < 1e-6);

    // per-group statistics: mean ~ 0, var ~ 1
    const int cpg = C / groups, n = cpg * H * W;
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < groups; ++g) {
            double s = 0, ss = 0;
            for (int c = g * cpg; c < (g + 1) * cpg; ++c)
                for (int i = 0; i < H * W; ++i) {
                    const double v = y.value()[static_cast<size_t>(((b * C + c) * H * W) + i)];
                    s += v;
                    ss += v * v;
                }
            const double mean = s / n, var = ss / n - mean * mean;
            CHECK(std::abs(mean) < 1e-6);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
        }

    // naive two-pass reference
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < groups; ++g) {
            double s = 0, ss = 0;
            for (int c = g * cpg; c < (g + 1) * cpg; ++c)
                for (int i = 0; i < H * W; ++i) {
                    const double v = x.value()[static_cast<size_t>(((b * C + c) * H * W) + i)];
                    s += v;
                    ss += v * v;
                }
            const double mean = s / n, var = ss / n - mean * mean;
            for (int c = g * cpg; c < (g + 1) * cpg; ++c)
                for (int i = 0; i < H * W; ++i) {
                    const size_t idx = static_cast<size_t>(((b * C + c) * H * W) + i);
                    const double expect = (x.value()[idx] - mean) / std::sqrt(var + 1e-5);
                    CHECK(y.value()[idx] == doctest::Approx(expect).epsilon(1e-9));
                }
        }

    CHECK_THROWS_AS(nn::group_norm(x, 4, gain, bias), std::invalid_argument);
}

TEST_CASE("autodiff: embedding and expand_rows gradients") {
    Rng rng(105);
    SUBCASE("embedding") {
        auto table = rand_param({5, 3}, rng);
        const std::vector<int> ids = {1, 4, 1, 0};
        auto f = [&] {
            auto e = nn::embedding(ids, table);
            return nn::mean(nn::mul(e, e));
        };
        CHECK(max_grad_rel_err<double>(f, {&table}) < 1e-5);
        CHECK_THROWS_AS(nn::embedding({5}, table), std::invalid_argument);
        CHECK_THROWS_AS(nn::embedding({-1}, table), std::invalid_argument);
    }
    SUBCASE("expand_rows") {
        auto mu = rand_param({3, 2}, rng);
        const std::vector<int> durations = {2, 1, 3};
        auto f = [&] {
            auto y = nn::expand_rows(mu, durations);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&mu}) < 1e-5);
        auto y = nn::expand_rows(mu, durations);
        CHECK(y.shape() == std::vector<int>{2, 6});
        // block structure: frames 0-1 from phoneme 0, frame 2 from 1, 3-5 from 2
        for (int m = 0; m < 2; ++m) {
            CHECK(y.value()[static_cast<size_t>(m * 6 + 0)] == mu.value()[static_cast<size_t>(0 * 2 + m)]);
            CHECK(y.value()[static_cast<size_t>(m * 6 + 2)] == mu.value()[static_cast<size_t>(1 * 2 + m)]);
            CHECK(y.value()[static_cast<size_t>(m * 6 + 5)] == mu.value()[static_cast<size_t>(2 * 2 + m)]);
        }
    }
}

TEST_CASE("conv2d: matches nested-loop reference") {
    Rng rng(106);
    const int C = 1, H = 4, W = 4, O = 2, k = 3;
    auto x = rand_param({1, C, H, W}, rng);
    auto w = rand_param({O, C, k, k}, rng);
    auto b = rand_param({O}, rng);
    for (int stride : {1, 2})
        for (int pad : {0, 1}) {
            if (H + 2 * pad < k) continue;
            auto y = nn::conv2d(x, w, b, stride, pad);
            auto ref = naive_conv2d(x.value(), C, H, W, w.value(), O, k, k, b.value(), stride, pad);
            REQUIRE(y.value().size() == ref.size());
            for (size_t i = 0; i < ref.size(); ++i)
                CHECK(y.value()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
        }
}

TEST_CASE("conv2d: 1x1 identity kernel copies input") {
    auto x = DT::from({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto w = DT::from({2, 2, 1, 1}, {1, 0, 0, 1});  // identity mixing
    auto b = DT::from({2}, {0, 0});
    auto y = nn::conv2d(x, w, b, 1, 0);
    CHECK(y.value() == x.value());
}

TEST_CASE("conv gradients: conv2d, transposed, depthwise") {
    Rng rng(107);
    SUBCASE("conv2d") {
        auto x = rand_param({2, 2, 4, 5}, rng);
        auto w = rand_param({3, 2, 3, 3}, rng);
        auto b = rand_param({3}, rng);
        auto f = [&] {
            auto y = nn::conv2d(x, w, b, 1, 1);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&x, &w, &b}) < 1e-5);
    }
    SUBCASE("conv2d stride 2") {
        auto x = rand_param({1, 2, 6, 6}, rng);
        auto w = rand_param({2, 2, 3, 3}, rng);
        auto b = rand_param({2}, rng);
        auto f = [&] {
            auto y = nn::conv2d(x, w, b, 2, 1);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&x, &w, &b}) < 1e-5);
    }
    SUBCASE("conv_transpose2d") {
        auto x = rand_param({1, 3, 3, 4}, rng);
        auto w = rand_param({3, 2, 4, 4}, rng);
        auto b = rand_param({2}, rng);
        auto f = [&] {
            auto y = nn::conv_transpose2d(x, w, b, 2, 1);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&x, &w, &b}) < 1e-5);
    }
    SUBCASE("depthwise") {
        auto x = rand_param({2, 3, 4, 4}, rng);
        auto w = rand_param({3, 1, 3, 3}, rng);
        auto b = rand_param({3}, rng);
        auto f = [&] {
            auto y = nn::depthwise_conv2d(x, w, b, 1, 1);
            return nn::mean(nn::mul(y, y));
        };
        CHECK(max_grad_rel_err<double>(f, {&x, &w, &b}) < 1e-5);
    }
}

TEST_CASE("conv shape algebra: stride-2 down then stride-2 transposed restores extents") {
    Rng rng(108);
    auto x = rand_param({1, 2, 8, 12}, rng);
    auto wd = rand_param({2, 2, 3, 3}, rng);
    auto wu = rand_param({2, 2, 4, 4}, rng);
    auto b = rand_param({2}, rng);
    auto down = nn::conv2d(x, wd, b, 2, 1);
    CHECK(down.shape() == std::vector<int>{1, 2, 4, 6});
    auto up = nn::conv_transpose2d(down, wu, b, 2, 1);
    CHECK(up.shape() == std::vector<int>{1, 2, 8, 12});
}

TEST_CASE("backward: contract") {
    Rng rng(109);
    SUBCASE("loss = sum(W * x) gives dW = x") {
        auto W = rand_param({2, 3}, rng);
        auto x = DT::from({2, 3}, random_vec<double>(6, rng));
        auto loss = nn::sum(nn::mul(W, x));
        nn::backward(loss);
        for (size_t i = 0; i < 6; ++i) CHECK(W.grad()[i] == doctest::Approx(x.value()[i]));
    }
    SUBCASE("unreached parameters keep zero grads") {
        auto a = rand_param({2}, rng);
        auto b = rand_param({2}, rng);
        a.zero_grad();
        b.zero_grad();
        auto loss = nn::mean(nn::mul(a, a));
        nn::backward(loss);
        CHECK(b.grad()[0] == 0.0);
        CHECK(b.grad()[1] == 0.0);
    }
    SUBCASE("backward twice accumulates parameter grads (doubles them)") {
        auto a = rand_param({3}, rng);
        a.zero_grad();
        auto loss = nn::mean(nn::mul(a, a));
        nn::backward(loss);
        const auto once = a.grad();
        nn::backward(loss);
        for (size_t i = 0; i < once.size(); ++i)
            CHECK(a.grad()[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
    }
    SUBCASE("non-scalar root is rejected") {
        auto a = rand_param({2, 2}, rng);
        auto y = nn::mul(a, a);
        CHECK_THROWS_AS(nn::backward(y), std::invalid_argument);
    }
}
