#pragma once

#include "lightgrad/tensor.hpp"

// conv2d / conv_transpose2d / depthwise_conv2d on [B,C,H,W] tensors.
// Dense convs go through im2col + GEMM; depthwise is direct loops (its cost
// is negligible next to the pointwise products it pairs with).

namespace lightgrad::nn {

namespace detail {

inline int conv_out_extent(int in, int k, int stride, int pad) {
    const int span = in + 2 * pad - k;
    require_shape(span >= 0, "conv: kernel larger than padded input");
    return span / stride + 1;
}

// col[(c*kh + i)*kw + j, oh*OW + ow] = x[c, oh*s - ph + i, ow*s - pw + j]
template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad_h,
            int pad_w, int OH, int OW, T* col) {
    const int64_t positions = static_cast<int64_t>(OH) * OW;
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                T* row = col + ((static_cast<int64_t>(c) * kh + i) * kw + j) * positions;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad_h + i;
                    if (ih < 0 || ih >= H) {
                        std::fill_n(row + static_cast<int64_t>(oh) * OW, OW, T(0));
                        continue;
                    }
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad_w + j;
                        row[static_cast<int64_t>(oh) * OW + ow] =
                            (iw < 0 || iw >= W) ? T(0)
                                                : x[(static_cast<int64_t>(c) * H + ih) * W + iw];
                    }
                }
            }
}

// scatter-add inverse of im2col
template <typename T>
void col2im(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad_h,
            int pad_w, int OH, int OW, T* x) {
    const int64_t positions = static_cast<int64_t>(OH) * OW;
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const T* row = col + ((static_cast<int64_t>(c) * kh + i) * kw + j) * positions;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad_h + i;
                    if (ih < 0 || ih >= H) continue;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad_w + j;
                        if (iw < 0 || iw >= W) continue;
                        x[(static_cast<int64_t>(c) * H + ih) * W + iw] +=
                            row[static_cast<int64_t>(oh) * OW + ow];
                    }
                }
            }
}

}  // namespace detail

// Cross-correlation: x[B,Cin,H,W] * w[Cout,Cin,kh,kw] + b[Cout]
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  int stride, int pad_h, int pad_w) {
    require_shape(x.shape().size() == 4 && w.shape().size() == 4,
                  "conv2d: expects 4-D input and weight");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    require_shape(w.dim(1) == C, "conv2d: channel count mismatch");
    require_shape(b.numel() == O, "conv2d: bias size mismatch");
    const int OH = detail::conv_out_extent(H, kh, stride, pad_h);
    const int OW = detail::conv_out_extent(W, kw, stride, pad_w);
    auto n = detail::make_op<T>({B, O, OH, OW}, {x.node(), w.node(), b.node()});

    const int ckk = C * kh * kw;
    const int64_t positions = static_cast<int64_t>(OH) * OW;
    std::vector<T> col(static_cast<size_t>(ckk) * positions);
    detail::CMatMap<T> Wmat(w.value().data(), O, ckk);
    for (int bb = 0; bb < B; ++bb) {
        detail::im2col(x.value().data() + static_cast<int64_t>(bb) * C * H * W, C, H, W, kh,
                       kw, stride, pad_h, pad_w, OH, OW, col.data());
        detail::CMatMap<T> Col(col.data(), ckk, positions);
        detail::MatMap<T> Out(n->value.data() + static_cast<int64_t>(bb) * O * positions, O,
                              positions);
        Out.noalias() = Wmat * Col;
        for (int o = 0; o < O; ++o) Out.row(o).array() += b.value()[static_cast<size_t>(o)];
    }

    if (n->requires_grad)
        n->backward = [B, C, H, W, O, kh, kw, stride, pad_h, pad_w, OH, OW](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pw = self.parents[1];
            auto& pb = self.parents[2];
            const int ckk = C * kh * kw;
            const int64_t positions = static_cast<int64_t>(OH) * OW;
            std::vector<T> col(static_cast<size_t>(ckk) * positions);
            std::vector<T> dcol;
            detail::CMatMap<T> Wmat(pw->value.data(), O, ckk);
            if (px->requires_grad) {
                px->ensure_grad();
                dcol.resize(col.size());
            }
            if (pw->requires_grad) pw->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (int bb = 0; bb < B; ++bb) {
                detail::CMatMap<T> dOut(self.grad.data() + static_cast<int64_t>(bb) * O * positions,
                                        O, positions);
                if (pw->requires_grad || px->requires_grad)
                    detail::im2col(px->value.data() + static_cast<int64_t>(bb) * C * H * W, C, H,
                                   W, kh, kw, stride, pad_h, pad_w, OH, OW, col.data());
                if (pw->requires_grad) {
                    detail::CMatMap<T> Col(col.data(), ckk, positions);
                    detail::MatMap<T>(pw->grad.data(), O, ckk).noalias() += dOut * Col.transpose();
                }
                if (pb->requires_grad)
                    for (int o = 0; o < O; ++o)
                        pb->grad[static_cast<size_t>(o)] += dOut.row(o).sum();
                if (px->requires_grad) {
                    detail::MatMap<T> dCol(dcol.data(), ckk, positions);
                    dCol.noalias() = Wmat.transpose() * dOut;
                    detail::col2im(dcol.data(), C, H, W, kh, kw, stride, pad_h, pad_w, OH, OW,
                                   px->grad.data() + static_cast<int64_t>(bb) * C * H * W);
                }
            }
        };
    return TensorT<T>(n);
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  int stride = 1, int pad = 0) {
    return conv2d(x, w, b, stride, pad, pad);
}

// Transposed conv: x[B,Cin,H,W] * w[Cin,Cout,kh,kw] + b[Cout],
// output extent (H-1)*stride - 2*pad + kh.
template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride = 1, int pad = 0) {
    require_shape(x.shape().size() == 4 && w.shape().size() == 4,
                  "conv_transpose2d: expects 4-D input and weight");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    require_shape(w.dim(0) == C, "conv_transpose2d: channel count mismatch");
    require_shape(b.numel() == O, "conv_transpose2d: bias size mismatch");
    const int OH = (H - 1) * stride - 2 * pad + kh;
    const int OW = (W - 1) * stride - 2 * pad + kw;
    require_shape(OH > 0 && OW > 0, "conv_transpose2d: empty output");
    auto n = detail::make_op<T>({B, O, OH, OW}, {x.node(), w.node(), b.node()});

    const int okk = O * kh * kw;
    const int64_t positions = static_cast<int64_t>(H) * W;
    std::vector<T> cols(static_cast<size_t>(okk) * positions);
    detail::CMatMap<T> Wmat(w.value().data(), C, okk);
    for (int bb = 0; bb < B; ++bb) {
        detail::CMatMap<T> X(x.value().data() + static_cast<int64_t>(bb) * C * positions, C,
                             positions);
        detail::MatMap<T> Cols(cols.data(), okk, positions);
        Cols.noalias() = Wmat.transpose() * X;
        T* out = n->value.data() + static_cast<int64_t>(bb) * O * OH * OW;
        detail::col2im(cols.data(), O, OH, OW, kh, kw, stride, pad, pad, H, W, out);
        for (int o = 0; o < O; ++o)
            for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i)
                out[static_cast<int64_t>(o) * OH * OW + i] += b.value()[static_cast<size_t>(o)];
    }

    if (n->requires_grad)
        n->backward = [B, C, H, W, O, kh, kw, stride, pad, OH, OW](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pw = self.parents[1];
            auto& pb = self.parents[2];
            const int okk = O * kh * kw;
            const int64_t positions = static_cast<int64_t>(H) * W;
            std::vector<T> col(static_cast<size_t>(okk) * positions);
            detail::CMatMap<T> Wmat(pw->value.data(), C, okk);
            if (px->requires_grad) px->ensure_grad();
            if (pw->requires_grad) pw->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (int bb = 0; bb < B; ++bb) {
                const T* dout = self.grad.data() + static_cast<int64_t>(bb) * O * OH * OW;
                detail::im2col(dout, O, OH, OW, kh, kw, stride, pad, pad, H, W, col.data());
                detail::CMatMap<T> Col(col.data(), okk, positions);
                if (px->requires_grad)
                    detail::MatMap<T>(px->grad.data() + static_cast<int64_t>(bb) * C * positions,
                                      C, positions)
                        .noalias() += Wmat * Col;
                if (pw->requires_grad) {
                    detail::CMatMap<T> X(px->value.data() + static_cast<int64_t>(bb) * C * positions,
                                         C, positions);
                    detail::MatMap<T>(pw->grad.data(), C, okk).noalias() += X * Col.transpose();
                }
                if (pb->requires_grad)
                    for (int o = 0; o < O; ++o) {
                        T acc = 0;
                        for (int64_t i = 0; i < static_cast<int64_t>(OH) * OW; ++i)
                            acc += dout[static_cast<int64_t>(o) * OH * OW + i];
                        pb->grad[static_cast<size_t>(o)] += acc;
                    }
            }
        };
    return TensorT<T>(n);
}

// Per-channel conv: x[B,C,H,W] * w[C,1,kh,kw] + b[C]
template <typename T>
TensorT<T> depthwise_conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            int stride = 1, int pad = 0) {
    require_shape(x.shape().size() == 4 && w.shape().size() == 4,
                  "depthwise_conv2d: expects 4-D input and weight");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int kh = w.dim(2), kw = w.dim(3);
    require_shape(w.dim(0) == C && w.dim(1) == 1, "depthwise_conv2d: weight must be [C,1,kh,kw]");
    require_shape(b.numel() == C, "depthwise_conv2d: bias size mismatch");
    const int OH = detail::conv_out_extent(H, kh, stride, pad);
    const int OW = detail::conv_out_extent(W, kw, stride, pad);
    auto n = detail::make_op<T>({B, C, OH, OW}, {x.node(), w.node(), b.node()});
    for (int bb = 0; bb < B; ++bb)
        for (int c = 0; c < C; ++c) {
            const T* xc = x.value().data() + (static_cast<int64_t>(bb) * C + c) * H * W;
            const T* wc = w.value().data() + static_cast<int64_t>(c) * kh * kw;
            T* oc = n->value.data() + (static_cast<int64_t>(bb) * C + c) * OH * OW;
            const T bias = b.value()[static_cast<size_t>(c)];
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = bias;
                    for (int i = 0; i < kh; ++i) {
                        const int ih = oh * stride - pad + i;
                        if (ih < 0 || ih >= H) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int iw = ow * stride - pad + j;
                            if (iw < 0 || iw >= W) continue;
                            acc += xc[static_cast<int64_t>(ih) * W + iw] * wc[i * kw + j];
                        }
                    }
                    oc[static_cast<int64_t>(oh) * OW + ow] = acc;
                }
        }
    if (n->requires_grad)
        n->backward = [B, C, H, W, kh, kw, stride, pad, OH, OW](Node<T>& self) {
            auto& px = self.parents[0];
            auto& pw = self.parents[1];
            auto& pb = self.parents[2];
            if (px->requires_grad) px->ensure_grad();
            if (pw->requires_grad) pw->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (int bb = 0; bb < B; ++bb)
                for (int c = 0; c < C; ++c) {
                    const T* xc = px->value.data() + (static_cast<int64_t>(bb) * C + c) * H * W;
                    const T* wc = pw->value.data() + static_cast<int64_t>(c) * kh * kw;
                    const T* g = self.grad.data() + (static_cast<int64_t>(bb) * C + c) * OH * OW;
                    for (int oh = 0; oh < OH; ++oh)
                        for (int ow = 0; ow < OW; ++ow) {
                            const T gv = g[static_cast<int64_t>(oh) * OW + ow];
                            if (pb->requires_grad) pb->grad[static_cast<size_t>(c)] += gv;
                            for (int i = 0; i < kh; ++i) {
                                const int ih = oh * stride - pad + i;
                                if (ih < 0 || ih >= H) continue;
                                for (int j = 0; j < kw; ++j) {
                                    const int iw = ow * stride - pad + j;
                                    if (iw < 0 || iw >= W) continue;
                                    if (pw->requires_grad)
                                        pw->grad[static_cast<int64_t>(c) * kh * kw + i * kw + j] +=
                                            gv * xc[static_cast<int64_t>(ih) * W + iw];
                                    if (px->requires_grad)
                                        px->grad[(static_cast<int64_t>(bb) * C + c) * H * W +
                                                 static_cast<int64_t>(ih) * W + iw] +=
                                            gv * wc[i * kw + j];
                                }
                            }
                        }
                }
        };
    return TensorT<T>(n);
}

}  // namespace lightgrad::nn
