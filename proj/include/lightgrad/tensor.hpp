#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "lightgrad/common.hpp"
#include "lightgrad/rng.hpp"

// Minimal define-by-run reverse-mode tensor engine. Graphs are DAGs of
// shared_ptr nodes; ops record a backward closure that pulls the node's grad
// and pushes contributions into its parents. Dense matrix products go through
// Eigen; everything else is plain loops. Single-threaded by design: a graph
// is built and differentiated by one thread, distinct graphs are independent.

namespace lightgrad::nn {

template <typename T>
struct Node {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until needed; same length as value once used
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

template <typename T>
class TensorT {
  public:
    TensorT() = default;
    explicit TensorT(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>();
        int64_t count = 1;
        for (int d : shape) {
            require(d >= 0, "tensor extents must be non-negative");
            count *= d;
        }
        n->shape = std::move(shape);
        n->value.assign(static_cast<size_t>(count), T(0));
        n->requires_grad = requires_grad;
        return TensorT(std::move(n));
    }

    static TensorT from(std::vector<int> shape, std::vector<T> data,
                        bool requires_grad = false) {
        auto t = zeros(std::move(shape), requires_grad);
        require_shape(data.size() == t.value().size(),
                      "tensor data length does not match shape");
        t.value() = std::move(data);
        return t;
    }

    static TensorT scalar(T v, bool requires_grad = false) {
        auto t = zeros({1}, requires_grad);
        t.value()[0] = v;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return node_->numel(); }
    std::vector<T>& value() { return node_->value; }
    const std::vector<T>& value() const { return node_->value; }
    std::vector<T>& grad() { node_->ensure_grad(); return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    std::shared_ptr<Node<T>>& node() { return node_; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

    T item() const {
        require_shape(numel() == 1, "item() on non-scalar tensor");
        return node_->value[0];
    }

    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_op(std::vector<int> shape,
                                 std::vector<std::shared_ptr<Node<T>>> parents) {
    auto n = std::make_shared<Node<T>>();
    int64_t count = 1;
    for (int d : shape) count *= d;
    n->shape = std::move(shape);
    n->value.assign(static_cast<size_t>(count), T(0));
    for (auto& p : n->parents = std::move(parents))
        n->requires_grad = n->requires_grad || p->requires_grad;
    return n;
}

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const Mat<T>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    require_shape(a.shape() == b.shape(), "add: shape mismatch");
    auto n = detail::make_op<T>(a.shape(), {a.node(), b.node()});
    for (size_t i = 0; i < n->value.size(); ++i)
        n->value[i] = a.value()[i] + b.value()[i];
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            for (int k = 0; k < 2; ++k) {
                auto& p = self.parents[static_cast<size_t>(k)];
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    p->grad[i] += self.grad[i];
            }
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    require_shape(a.shape() == b.shape(), "sub: shape mismatch");
    auto n = detail::make_op<T>(a.shape(), {a.node(), b.node()});
    for (size_t i = 0; i < n->value.size(); ++i)
        n->value[i] = a.value()[i] - b.value()[i];
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
            }
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    require_shape(a.shape() == b.shape(), "mul: shape mismatch");
    auto n = detail::make_op<T>(a.shape(), {a.node(), b.node()});
    for (size_t i = 0; i < n->value.size(); ++i)
        n->value[i] = a.value()[i] * b.value()[i];
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pa->grad[i] += self.grad[i] * pb->value[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pb->grad[i] += self.grad[i] * pa->value[i];
            }
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    auto n = detail::make_op<T>(a.shape(), {a.node()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] * s;
    if (n->requires_grad)
        n->backward = [s](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                p->grad[i] += self.grad[i] * s;
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
    auto n = detail::make_op<T>(a.shape(), {a.node()});
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.value()[i] + s;
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        };
    return TensorT<T>(n);
}

// y = x * g with g a learnable scalar (ReZero gate)
template <typename T>
TensorT<T> scale_by(const TensorT<T>& x, const TensorT<T>& g) {
    require_shape(g.numel() == 1, "scale_by: gain must be scalar");
    auto n = detail::make_op<T>(x.shape(), {x.node(), g.node()});
    const T gv = g.value()[0];
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = x.value()[i] * gv;
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pg = self.parents[1];
            const T gv = pg->value[0];
            if (px->requires_grad) {
                px->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    px->grad[i] += self.grad[i] * gv;
            }
            if (pg->requires_grad) {
                pg->ensure_grad();
                T acc = 0;
                for (size_t i = 0; i < self.grad.size(); ++i)
                    acc += self.grad[i] * px->value[i];
                pg->grad[0] += acc;
            }
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> mish(const TensorT<T>& x) {
    auto n = detail::make_op<T>(x.shape(), {x.node()});
    auto sp = [](T v) -> T {
        if (v > T(20)) return v;  // overflow-safe branch
        return std::log1p(std::exp(v));
    };
    for (size_t i = 0; i < n->value.size(); ++i) {
        const T v = x.value()[i];
        n->value[i] = v * std::tanh(sp(v));
    }
    if (n->requires_grad)
        n->backward = [sp](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const T v = p->value[i];
                const T th = std::tanh(sp(v));
                const T sig = T(1) / (T(1) + std::exp(-v));
                p->grad[i] += self.grad[i] * (th + v * (T(1) - th * th) * sig);
            }
        };
    return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// reductions / shape
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
    auto n = detail::make_op<T>({1}, {x.node()});
    T acc = 0;
    for (T v : x.value()) acc += v;
    n->value[0] = acc;
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            const T g = self.grad[0];
            for (auto& gi : p->grad) gi += g;
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> mean(const TensorT<T>& x) {
    require(x.numel() > 0, "mean over empty tensor");
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<int> shape) {
    int64_t count = 1;
    for (int d : shape) count *= d;
    require_shape(count == x.numel(), "reshape: element count mismatch");
    auto n = detail::make_op<T>(std::move(shape), {x.node()});
    n->value = x.value();
    if (n->requires_grad)
        n->backward = [](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        };
    return TensorT<T>(n);
}

// Leaf copy: same values, no gradient path back to x.
template <typename T>
TensorT<T> detach(const TensorT<T>& x) {
    return TensorT<T>::from(x.shape(), x.value(), false);
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    require_shape(a.shape().size() == 4 && b.shape().size() == 4,
                  "concat_channels: expects 4-D [B,C,H,W]");
    require_shape(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
                  "concat_channels: non-channel extents differ");
    const int B = a.dim(0), C1 = a.dim(1), C2 = b.dim(1), H = a.dim(2), W = a.dim(3);
    auto n = detail::make_op<T>({B, C1 + C2, H, W}, {a.node(), b.node()});
    const int64_t plane = static_cast<int64_t>(H) * W;
    for (int bb = 0; bb < B; ++bb) {
        std::copy_n(a.value().data() + bb * C1 * plane, C1 * plane,
                    n->value.data() + bb * (C1 + C2) * plane);
        std::copy_n(b.value().data() + bb * C2 * plane, C2 * plane,
                    n->value.data() + bb * (C1 + C2) * plane + C1 * plane);
    }
    if (n->requires_grad)
        n->backward = [B, C1, C2, plane](Node<T>& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            for (int bb = 0; bb < B; ++bb) {
                const T* g = self.grad.data() + bb * (C1 + C2) * plane;
                if (pa->requires_grad) {
                    pa->ensure_grad();
                    T* ga = pa->grad.data() + bb * C1 * plane;
                    for (int64_t i = 0; i < C1 * plane; ++i) ga[i] += g[i];
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    T* gb = pb->grad.data() + bb * C2 * plane;
                    for (int64_t i = 0; i < C2 * plane; ++i) gb[i] += g[C1 * plane + i];
                }
            }
        };
    return TensorT<T>(n);
}

// Zero-pad the frame (last) axis on the right.
template <typename T>
TensorT<T> pad_frames(const TensorT<T>& x, int right) {
    require(right >= 0, "pad_frames: negative pad");
    require_shape(x.shape().size() == 4, "pad_frames: expects 4-D [B,C,H,W]");
    if (right == 0) return x;
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto n = detail::make_op<T>({B, C, H, W + right}, {x.node()});
    const int64_t rows = static_cast<int64_t>(B) * C * H;
    for (int64_t r = 0; r < rows; ++r)
        std::copy_n(x.value().data() + r * W, W, n->value.data() + r * (W + right));
    if (n->requires_grad)
        n->backward = [rows, W, right](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int w = 0; w < W; ++w)
                    p->grad[r * W + w] += self.grad[r * (W + right) + w];
        };
    return TensorT<T>(n);
}

// Keep the first `count` frames of the last axis.
template <typename T>
TensorT<T> slice_frames(const TensorT<T>& x, int count) {
    require_shape(x.shape().size() == 4, "slice_frames: expects 4-D [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(count >= 0 && count <= W, "slice_frames: count out of range");
    if (count == W) return x;
    auto n = detail::make_op<T>({B, C, H, count}, {x.node()});
    const int64_t rows = static_cast<int64_t>(B) * C * H;
    for (int64_t r = 0; r < rows; ++r)
        std::copy_n(x.value().data() + r * W, count, n->value.data() + r * count);
    if (n->requires_grad)
        n->backward = [rows, W, count](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int w = 0; w < count; ++w)
                    p->grad[r * W + w] += self.grad[r * count + w];
        };
    return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

// y[N, out] = x[N, in] * w[out, in]^T + b[out]
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    require_shape(x.shape().size() == 2 && w.shape().size() == 2,
                  "linear: x and w must be 2-D");
    const int N = x.dim(0), In = x.dim(1), Out = w.dim(0);
    require_shape(w.dim(1) == In, "linear: weight in-features mismatch");
    require_shape(b.numel() == Out, "linear: bias size mismatch");
    auto n = detail::make_op<T>({N, Out}, {x.node(), w.node(), b.node()});
    detail::CMatMap<T> X(x.value().data(), N, In), W(w.value().data(), Out, In);
    detail::MatMap<T> Y(n->value.data(), N, Out);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < N; ++i)
        for (int o = 0; o < Out; ++o) n->value[static_cast<size_t>(i) * Out + o] += b.value()[o];
    if (n->requires_grad)
        n->backward = [N, In, Out](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pw = self.parents[1];
            auto& pb = self.parents[2];
            detail::CMatMap<T> dY(self.grad.data(), N, Out);
            detail::CMatMap<T> X(px->value.data(), N, In), W(pw->value.data(), Out, In);
            if (px->requires_grad) {
                px->ensure_grad();
                detail::MatMap<T>(px->grad.data(), N, In).noalias() += dY * W;
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                detail::MatMap<T>(pw->grad.data(), Out, In).noalias() += dY.transpose() * X;
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int i = 0; i < N; ++i)
                    for (int o = 0; o < Out; ++o) pb->grad[static_cast<size_t>(o)] += dY(i, o);
            }
        };
    return TensorT<T>(n);
}

// Batched matmul: C[g] = opA(A[g]) * opB(B[g]), op = transpose when flagged.
template <typename T>
TensorT<T> bmm(const TensorT<T>& a, const TensorT<T>& b, bool ta = false, bool tb = false) {
    require_shape(a.shape().size() == 3 && b.shape().size() == 3, "bmm: expects 3-D");
    require_shape(a.dim(0) == b.dim(0), "bmm: batch extents differ");
    const int G = a.dim(0);
    const int M = ta ? a.dim(2) : a.dim(1);
    const int K = ta ? a.dim(1) : a.dim(2);
    const int Kb = tb ? b.dim(2) : b.dim(1);
    const int N = tb ? b.dim(1) : b.dim(2);
    require_shape(K == Kb, "bmm: inner extents differ");
    auto n = detail::make_op<T>({G, M, N}, {a.node(), b.node()});
    const int64_t sa = static_cast<int64_t>(a.dim(1)) * a.dim(2);
    const int64_t sb = static_cast<int64_t>(b.dim(1)) * b.dim(2);
    const int64_t sc = static_cast<int64_t>(M) * N;
    for (int g = 0; g < G; ++g) {
        detail::CMatMap<T> A(a.value().data() + g * sa, a.dim(1), a.dim(2));
        detail::CMatMap<T> B(b.value().data() + g * sb, b.dim(1), b.dim(2));
        detail::MatMap<T> C(n->value.data() + g * sc, M, N);
        if (!ta && !tb) C.noalias() = A * B;
        else if (ta && !tb) C.noalias() = A.transpose() * B;
        else if (!ta && tb) C.noalias() = A * B.transpose();
        else C.noalias() = A.transpose() * B.transpose();
    }
    if (n->requires_grad)
        n->backward = [G, M, N, sa, sb, sc, ta, tb](Node<T>& self) {
            auto& pa = self.parents[0];
            auto& pb = self.parents[1];
            for (int g = 0; g < G; ++g) {
                detail::CMatMap<T> dC(self.grad.data() + g * sc, M, N);
                detail::CMatMap<T> A(pa->value.data() + g * sa, pa->shape[1], pa->shape[2]);
                detail::CMatMap<T> B(pb->value.data() + g * sb, pb->shape[1], pb->shape[2]);
                if (pa->requires_grad) {
                    pa->ensure_grad();
                    detail::MatMap<T> dA(pa->grad.data() + g * sa, pa->shape[1], pa->shape[2]);
                    // dAop = dC * Bop^T ; un-transpose if needed
                    if (!ta) {
                        if (!tb) dA.noalias() += dC * B.transpose();
                        else dA.noalias() += dC * B;
                    } else {
                        if (!tb) dA.noalias() += B * dC.transpose();
                        else dA.noalias() += B.transpose() * dC.transpose();
                    }
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    detail::MatMap<T> dB(pb->grad.data() + g * sb, pb->shape[1], pb->shape[2]);
                    // dBop = Aop^T * dC
                    if (!tb) {
                        if (!ta) dB.noalias() += A.transpose() * dC;
                        else dB.noalias() += A * dC;
                    } else {
                        if (!ta) dB.noalias() += dC.transpose() * A;
                        else dB.noalias() += dC.transpose() * A.transpose();
                    }
                }
            }
        };
    return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// softmax / normalization / broadcast helpers
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> softmax_lastdim(const TensorT<T>& x) {
    require_shape(!x.shape().empty(), "softmax: empty shape");
    const int n_last = x.shape().back();
    require_shape(n_last > 0, "softmax: empty last axis");
    const int64_t rows = x.numel() / n_last;
    auto n = detail::make_op<T>(x.shape(), {x.node()});
    for (int64_t r = 0; r < rows; ++r) {
        const T* in = x.value().data() + r * n_last;
        T* out = n->value.data() + r * n_last;
        T mx = in[0];
        for (int i = 1; i < n_last; ++i) mx = std::max(mx, in[i]);
        T z = 0;
        for (int i = 0; i < n_last; ++i) z += (out[i] = std::exp(in[i] - mx));
        for (int i = 0; i < n_last; ++i) out[i] /= z;
    }
    if (n->requires_grad)
        n->backward = [rows, n_last](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const T* y = self.value.data() + r * n_last;
                const T* dy = self.grad.data() + r * n_last;
                T dot = 0;
                for (int i = 0; i < n_last; ++i) dot += dy[i] * y[i];
                T* dx = p->grad.data() + r * n_last;
                for (int i = 0; i < n_last; ++i) dx[i] += y[i] * (dy[i] - dot);
            }
        };
    return TensorT<T>(n);
}

// Group normalization over [B,C,H,W]: zero mean / unit variance per (b, group),
// then per-channel affine.
template <typename T>
TensorT<T> group_norm(const TensorT<T>& x, int groups, const TensorT<T>& gain,
                      const TensorT<T>& bias, T eps = T(1e-5)) {
    require_shape(x.shape().size() == 4, "group_norm: expects 4-D [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require(groups >= 1 && C % groups == 0,
            "group_norm: channels not divisible by groups");
    require_shape(gain.numel() == C && bias.numel() == C,
                  "group_norm: affine parameter size mismatch");
    const int cpg = C / groups;
    const int64_t plane = static_cast<int64_t>(H) * W;
    const int64_t gsize = cpg * plane;
    auto n = detail::make_op<T>(x.shape(), {x.node(), gain.node(), bias.node()});
    std::vector<T> means(static_cast<size_t>(B) * groups), invs(static_cast<size_t>(B) * groups);
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < groups; ++g) {
            const T* base = x.value().data() + (static_cast<int64_t>(b) * C + g * cpg) * plane;
            T m = 0;
            for (int64_t i = 0; i < gsize; ++i) m += base[i];
            m /= static_cast<T>(gsize);
            T v = 0;
            for (int64_t i = 0; i < gsize; ++i) {
                const T d = base[i] - m;
                v += d * d;
            }
            v /= static_cast<T>(gsize);
            const T inv = T(1) / std::sqrt(v + eps);
            means[static_cast<size_t>(b) * groups + g] = m;
            invs[static_cast<size_t>(b) * groups + g] = inv;
            T* out = n->value.data() + (static_cast<int64_t>(b) * C + g * cpg) * plane;
            for (int c = 0; c < cpg; ++c) {
                const T ga = gain.value()[static_cast<size_t>(g * cpg + c)];
                const T bi = bias.value()[static_cast<size_t>(g * cpg + c)];
                for (int64_t i = 0; i < plane; ++i)
                    out[c * plane + i] = (base[c * plane + i] - m) * inv * ga + bi;
            }
        }
    if (n->requires_grad)
        n->backward = [B, C, groups, cpg, plane, gsize, means, invs](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pg = self.parents[1];
            auto& pbias = self.parents[2];
            if (pg->requires_grad) pg->ensure_grad();
            if (pbias->requires_grad) pbias->ensure_grad();
            if (px->requires_grad) px->ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int g = 0; g < groups; ++g) {
                    const T m = means[static_cast<size_t>(b) * groups + g];
                    const T inv = invs[static_cast<size_t>(b) * groups + g];
                    const int64_t off = (static_cast<int64_t>(b) * C + g * cpg) * plane;
                    const T* xv = px->value.data() + off;
                    const T* dy = self.grad.data() + off;
                    // accumulate affine grads and the two group sums
                    T sum_gxh = 0, sum_g = 0;
                    for (int c = 0; c < cpg; ++c) {
                        const T ga = pg->value[static_cast<size_t>(g * cpg + c)];
                        T dga = 0, dbi = 0;
                        for (int64_t i = 0; i < plane; ++i) {
                            const T xh = (xv[c * plane + i] - m) * inv;
                            const T d = dy[c * plane + i];
                            dga += d * xh;
                            dbi += d;
                            const T gg = d * ga;
                            sum_g += gg;
                            sum_gxh += gg * xh;
                        }
                        if (pg->requires_grad) pg->grad[static_cast<size_t>(g * cpg + c)] += dga;
                        if (pbias->requires_grad) pbias->grad[static_cast<size_t>(g * cpg + c)] += dbi;
                    }
                    if (!px->requires_grad) continue;
                    const T mean_g = sum_g / static_cast<T>(gsize);
                    const T mean_gxh = sum_gxh / static_cast<T>(gsize);
                    T* dx = px->grad.data() + off;
                    for (int c = 0; c < cpg; ++c) {
                        const T ga = pg->value[static_cast<size_t>(g * cpg + c)];
                        for (int64_t i = 0; i < plane; ++i) {
                            const T xh = (xv[c * plane + i] - m) * inv;
                            dx[c * plane + i] +=
                                inv * (dy[c * plane + i] * ga - mean_g - xh * mean_gxh);
                        }
                    }
                }
        };
    return TensorT<T>(n);
}

// y[b,c,h,w] = x[b,c,h,w] + v[c] (broadcast over batch and space)
template <typename T>
TensorT<T> add_channel_vec(const TensorT<T>& x, const TensorT<T>& v) {
    require_shape(x.shape().size() == 4, "add_channel_vec: expects 4-D [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    require_shape(v.numel() == C, "add_channel_vec: vector length != channels");
    auto n = detail::make_op<T>(x.shape(), {x.node(), v.node()});
    const int64_t plane = static_cast<int64_t>(H) * W;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const T vv = v.value()[static_cast<size_t>(c)];
            const int64_t off = (static_cast<int64_t>(b) * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i)
                n->value[off + i] = x.value()[off + i] + vv;
        }
    if (n->requires_grad)
        n->backward = [B, C, plane](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pv = self.parents[1];
            if (px->requires_grad) {
                px->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
            }
            if (pv->requires_grad) {
                pv->ensure_grad();
                for (int b = 0; b < B; ++b)
                    for (int c = 0; c < C; ++c) {
                        const int64_t off = (static_cast<int64_t>(b) * C + c) * plane;
                        T acc = 0;
                        for (int64_t i = 0; i < plane; ++i) acc += self.grad[off + i];
                        pv->grad[static_cast<size_t>(c)] += acc;
                    }
            }
        };
    return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// lookup / expansion
// ---------------------------------------------------------------------------

// out[i, :] = table[ids[i], :]
template <typename T>
TensorT<T> embedding(const std::vector<int>& ids, const TensorT<T>& table) {
    require_shape(table.shape().size() == 2, "embedding: table must be 2-D");
    const int V = table.dim(0), D = table.dim(1);
    for (int id : ids)
        require(id >= 0 && id < V,
                "embedding: phoneme id " + std::to_string(id) + " outside vocabulary of " +
                    std::to_string(V));
    const int P = static_cast<int>(ids.size());
    auto n = detail::make_op<T>({P, D}, {table.node()});
    for (int i = 0; i < P; ++i)
        std::copy_n(table.value().data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * D,
                    D, n->value.data() + static_cast<int64_t>(i) * D);
    if (n->requires_grad)
        n->backward = [ids, D](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (size_t i = 0; i < ids.size(); ++i)
                for (int d = 0; d < D; ++d)
                    p->grad[static_cast<int64_t>(ids[i]) * D + d] +=
                        self.grad[static_cast<int64_t>(i) * D + d];
        };
    return TensorT<T>(n);
}

// Repeat per-phoneme rows into frames: mu_pp[P, M] + durations -> [M, F].
template <typename T>
TensorT<T> expand_rows(const TensorT<T>& mu_pp, const std::vector<int>& durations) {
    require_shape(mu_pp.shape().size() == 2, "expand_rows: expects [P, M]");
    const int P = mu_pp.dim(0), M = mu_pp.dim(1);
    require(static_cast<int>(durations.size()) == P,
            "expand_rows: durations length != phoneme count");
    int F = 0;
    for (int d : durations) {
        require(d >= 1, "expand_rows: durations must be >= 1");
        F += d;
    }
    auto n = detail::make_op<T>({M, F}, {mu_pp.node()});
    int f0 = 0;
    for (int p = 0; p < P; ++p) {
        for (int r = 0; r < durations[static_cast<size_t>(p)]; ++r, ++f0)
            for (int m = 0; m < M; ++m)
                n->value[static_cast<int64_t>(m) * F + f0] =
                    mu_pp.value()[static_cast<int64_t>(p) * M + m];
    }
    if (n->requires_grad)
        n->backward = [durations, M, F](Node<T>& self) {
            auto& p = self.parents[0];
            p->ensure_grad();
            int f0 = 0;
            for (size_t ph = 0; ph < durations.size(); ++ph)
                for (int r = 0; r < durations[ph]; ++r, ++f0)
                    for (int m = 0; m < M; ++m)
                        p->grad[ph * M + m] += self.grad[static_cast<int64_t>(m) * F + f0];
        };
    return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// reverse pass
// ---------------------------------------------------------------------------

// Reverse-mode accumulation from a scalar root. Intermediate grads are reset
// per call; leaf (parameter) grads accumulate across calls, so a second
// backward on the same graph doubles parameter grads.
template <typename T>
void backward(const TensorT<T>& root) {
    require(root.numel() == 1, "backward: root must be a scalar");
    if (!root.requires_grad()) return;

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* parent = node->parents[idx++].get();
            if (parent->requires_grad && !seen.count(parent)) {
                seen.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // order is post-order: parents before children; walk it backwards.
    for (Node<T>* n : order)
        if (n->backward) n->grad.assign(n->value.size(), T(0));  // non-leaf reset
        else n->ensure_grad();
    root.node()->ensure_grad();
    root.node()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward) (*it)->backward(**it);
}

// ---------------------------------------------------------------------------
// init
// ---------------------------------------------------------------------------

// Uniform fan-in init, U(-sqrt(1/fan_in), +sqrt(1/fan_in)).
template <typename T>
void init_uniform_fanin(TensorT<T>& t, int fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / std::max(1, fan_in));
    for (auto& v : t.value()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace lightgrad::nn
