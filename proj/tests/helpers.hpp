#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lightgrad/rng.hpp"
#include "lightgrad/tensor.hpp"

// Test-side oracles, independent of the library code paths they check.

namespace testutil {

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_quad_rec(const std::function<double(double)>& f, double a, double b,
                                double whole, double tol, int depth) {
    const double c = 0.5 * (a + b);
    const double left = simpson(f, a, c);
    const double right = simpson(f, c, b);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_quad_rec(f, a, c, left, tol / 2, depth - 1) +
           adaptive_quad_rec(f, c, b, right, tol / 2, depth - 1);
}

inline double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                            double tol = 1e-13) {
    return adaptive_quad_rec(f, a, b, simpson(f, a, b), tol, 40);
}

// Central finite differences against reverse-mode gradients. loss_fn must
// rebuild its graph from the live parameter values each call. Checks up to
// max_coords coordinates per parameter (all when max_coords < 0). Returns the
// max of |fd - grad| / max(|fd|, |grad|, floor).
template <typename T, typename LossFn>
double max_grad_rel_err(LossFn&& loss_fn,
                        const std::vector<lightgrad::nn::TensorT<T>*>& params,
                        double h = 1e-4, int max_coords = -1, double floor = 1e-2,
                        uint64_t pick_seed = 17) {
    namespace nn = lightgrad::nn;
    for (auto* p : params) p->zero_grad();
    auto loss = loss_fn();
    nn::backward(loss);
    std::vector<std::vector<T>> grads;
    grads.reserve(params.size());
    for (auto* p : params) grads.push_back(p->grad());

    lightgrad::Rng rng(pick_seed);
    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto* p = params[pi];
        const int64_t n = p->numel();
        std::vector<int64_t> coords;
        if (max_coords < 0 || n <= max_coords) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int k = 0; k < max_coords; ++k)
                coords.push_back(static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n))));
        }
        for (int64_t i : coords) {
            const T saved = p->value()[static_cast<size_t>(i)];
            p->value()[static_cast<size_t>(i)] = saved + static_cast<T>(h);
            const double fp = static_cast<double>(loss_fn().item());
            p->value()[static_cast<size_t>(i)] = saved - static_cast<T>(h);
            const double fm = static_cast<double>(loss_fn().item());
            p->value()[static_cast<size_t>(i)] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double g = static_cast<double>(grads[pi][static_cast<size_t>(i)]);
            const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), floor});
            if (rel > worst) worst = rel;
        }
    }
    return worst;
}

template <typename T>
std::vector<T> random_vec(size_t n, lightgrad::Rng& rng, double scale = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.gaussian() * scale);
    return v;
}

}  // namespace testutil
