#pragma once

#include <cmath>

#include "lightgrad/mel.hpp"
#include "lightgrad/schedule.hpp"
#include "lightgrad/tensor.hpp"

namespace lightgrad {

// X_t | X_0 is Gaussian with mean (1 - alpha) mu + alpha x0 and per-element
// variance 1 - e^rho; eps carries the standard normal draws.
template <typename T>
BasicMel<T> forward_sample(const NoiseSchedule& sched, const BasicMel<T>& x0,
                           const BasicMel<T>& mu, double t, const BasicMel<T>& eps) {
    require_same_shape(x0, mu, "forward_sample");
    require_same_shape(x0, eps, "forward_sample");
    const ScheduleEval se = schedule_eval(sched, t);
    const T a = static_cast<T>(se.alpha);
    const T oma = static_cast<T>(1.0 - se.alpha);
    const T sd = static_cast<T>(se.sigma);
    BasicMel<T> out(x0.n_mels, x0.n_frames);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = oma * mu.data[i] + a * x0.data[i] + sd * eps.data[i];
    return out;
}

// Score of p(X_t | X_0): -eps / sqrt(Sigma_t).
template <typename T>
BasicMel<T> score_target(const BasicMel<T>& eps, const ScheduleEval& se) {
    require_domain(se.var > 0.0, "score_target: Sigma_t must be positive");
    const T inv = static_cast<T>(-1.0 / std::sqrt(se.var));
    BasicMel<T> out(eps.n_mels, eps.n_frames);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = inv * eps.data[i];
    return out;
}

namespace nn_bridge {

template <typename T>
nn::TensorT<T> to_tensor(const BasicMel<T>& m, bool requires_grad = false) {
    return nn::TensorT<T>::from({m.n_mels, m.n_frames}, m.data, requires_grad);
}

template <typename T>
BasicMel<T> to_mel(const nn::TensorT<T>& t) {
    require_shape(t.shape().size() == 2, "to_mel: expects [n_mels, n_frames]");
    BasicMel<T> m(t.dim(0), t.dim(1));
    m.data = t.value();
    return m;
}

}  // namespace nn_bridge

// Tensor-level forward sample; gradient flows through mu (the prior mean is
// produced by the encoder and trained by the diffusion loss too).
template <typename T>
nn::TensorT<T> forward_sample_t(const NoiseSchedule& sched, const nn::TensorT<T>& x0,
                                const nn::TensorT<T>& mu, double t,
                                const nn::TensorT<T>& eps) {
    const ScheduleEval se = schedule_eval(sched, t);
    auto xt = nn::add(nn::scale(mu, static_cast<T>(1.0 - se.alpha)),
                      nn::scale(x0, static_cast<T>(se.alpha)));
    return nn::add(xt, nn::scale(eps, static_cast<T>(se.sigma)));
}

// mean over elements of (sqrt(Sigma_t) * s_theta(x_t, mu, t) + eps)^2.
// Net is any callable (x_t, mu, t) -> score tensor of the same shape.
template <typename T, typename Net>
nn::TensorT<T> diffusion_loss_t(const NoiseSchedule& sched, Net&& net,
                                const nn::TensorT<T>& x0, const nn::TensorT<T>& mu,
                                double t, const nn::TensorT<T>& eps) {
    require_shape(x0.shape() == mu.shape() && x0.shape() == eps.shape(),
                  "diffusion_loss: shape mismatch");
    const ScheduleEval se = schedule_eval(sched, t);
    auto xt = forward_sample_t(sched, x0, mu, t, eps);
    auto score = net(xt, mu, t);
    require_shape(score.shape() == x0.shape(), "diffusion_loss: net output shape mismatch");
    auto resid = nn::add(nn::scale(score, static_cast<T>(std::sqrt(se.var))), eps);
    return nn::mean(nn::mul(resid, resid));
}

// Mel-level convenience: mu enters as a constant, so the loss is
// differentiable w.r.t. net parameters only.
template <typename T, typename Net>
nn::TensorT<T> diffusion_loss(const NoiseSchedule& sched, Net&& net, const BasicMel<T>& x0,
                              const BasicMel<T>& mu, double t, const BasicMel<T>& eps) {
    require_same_shape(x0, mu, "diffusion_loss");
    require_same_shape(x0, eps, "diffusion_loss");
    return diffusion_loss_t<T>(sched, std::forward<Net>(net), nn_bridge::to_tensor(x0),
                               nn_bridge::to_tensor(mu), t, nn_bridge::to_tensor(eps));
}

}  // namespace lightgrad
