#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lightgrad/mel.hpp"
#include "lightgrad/rng.hpp"
#include "lightgrad/schedule.hpp"

// Backward-time integrators that turn prior noise into mel frames:
// Euler-Maruyama on the reverse SDE, plain Euler on the probability-flow ODE,
// and the first-order exponential-integrator update that solves the linear
// part of the semi-linear ODE exactly (one network evaluation per step).

namespace lightgrad {

enum class GridSpacing { uniform_t, uniform_lambda };
enum class SamplerMethod { sde_euler, ode_euler, dpm_solver1 };

struct TimeGrid {
    std::vector<double> points;  // decreasing, points[0] = T, points[nfe] = t_min
    int nfe = 0;
    GridSpacing spacing = GridSpacing::uniform_t;
};

struct SamplerConfig {
    SamplerMethod method = SamplerMethod::dpm_solver1;
    double temperature = 1.5;  // prior variance divisor: X_T ~ N(mu, I/tau)
    TimeGrid grid;
    uint64_t seed = 0;
    uint64_t stream = 0;  // per-sample / per-chunk noise stream index
};

inline GridSpacing default_spacing(SamplerMethod m) {
    return m == SamplerMethod::dpm_solver1 ? GridSpacing::uniform_lambda
                                           : GridSpacing::uniform_t;
}

inline TimeGrid make_grid(const NoiseSchedule& sched, int nfe, GridSpacing spacing) {
    require(nfe >= 1, "make_grid: nfe must be >= 1");
    TimeGrid g;
    g.nfe = nfe;
    g.spacing = spacing;
    g.points.resize(static_cast<size_t>(nfe) + 1);
    if (spacing == GridSpacing::uniform_t) {
        const double step = (sched.horizon - sched.t_min) / nfe;
        for (int i = 0; i <= nfe; ++i) g.points[static_cast<size_t>(i)] = sched.horizon - i * step;
    } else {
        const double lam_start = schedule_eval(sched, sched.horizon).lambda;
        const double lam_end = schedule_eval(sched, sched.t_min).lambda;
        for (int i = 1; i < nfe; ++i) {
            const double lam = lam_start + (lam_end - lam_start) * i / nfe;
            g.points[static_cast<size_t>(i)] = lambda_inverse(sched, lam);
        }
    }
    g.points.front() = sched.horizon;  // endpoints exact
    g.points.back() = sched.t_min;
    return g;
}

// One reverse Euler-Maruyama step of the backward SDE from time s to s - h:
//   x' = x - h beta(s) (1/2 (mu - x) - score) + sqrt(beta(s) h) z
template <typename T>
BasicMel<T> sde_euler_step(const NoiseSchedule& sched, const BasicMel<T>& x_s,
                           const BasicMel<T>& mu, const BasicMel<T>& score, double s,
                           double h, const BasicMel<T>& z) {
    require(h > 0.0, "sde_euler_step: step must be positive");
    require_same_shape(x_s, mu, "sde_euler_step");
    require_same_shape(x_s, score, "sde_euler_step");
    require_same_shape(x_s, z, "sde_euler_step");
    const double beta = schedule_beta(sched, s);
    const T hb = static_cast<T>(h * beta);
    const T noise = static_cast<T>(std::sqrt(beta * h));
    BasicMel<T> out(x_s.n_mels, x_s.n_frames);
    for (size_t i = 0; i < out.size(); ++i) {
        const T drift = T(0.5) * (mu.data[i] - x_s.data[i]) - score.data[i];
        out.data[i] = x_s.data[i] - hb * drift + noise * z.data[i];
    }
    return out;
}

// One reverse Euler step of the probability-flow ODE:
//   x' = x - h/2 beta(s) ((mu - x) - score)
template <typename T>
BasicMel<T> ode_euler_step(const NoiseSchedule& sched, const BasicMel<T>& x_s,
                           const BasicMel<T>& mu, const BasicMel<T>& score, double s,
                           double h) {
    require(h > 0.0, "ode_euler_step: step must be positive");
    require_same_shape(x_s, mu, "ode_euler_step");
    require_same_shape(x_s, score, "ode_euler_step");
    const T hb2 = static_cast<T>(0.5 * h * schedule_beta(sched, s));
    BasicMel<T> out(x_s.n_mels, x_s.n_frames);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = x_s.data[i] - hb2 * ((mu.data[i] - x_s.data[i]) - score.data[i]);
    return out;
}

// One exponential-integrator step on the centered variable y = x - mu,
// from time s down to t:
//   y_t = (alpha_t/alpha_s) y_s + sigma_t (e^{lambda_t - lambda_s} - 1)
//                                 sqrt(Sigma_s) s_theta(y_s + mu, mu, s)
template <typename T, typename ScoreFn>
BasicMel<T> dpm_solver1_step(const NoiseSchedule& sched, const BasicMel<T>& y_s,
                             const BasicMel<T>& mu, ScoreFn&& score_net, double s,
                             double t) {
    require(t <= s, "dpm_solver1_step: requires t <= s");  // t == s is the identity step
    require_same_shape(y_s, mu, "dpm_solver1_step");
    const ScheduleEval es = schedule_eval(sched, s);
    const ScheduleEval et = schedule_eval(sched, t);
    const T ratio = static_cast<T>(et.alpha / es.alpha);
    const T coef = static_cast<T>(et.sigma * std::expm1(et.lambda - es.lambda) * es.sigma);
    BasicMel<T> x_s(y_s.n_mels, y_s.n_frames);
    for (size_t i = 0; i < x_s.size(); ++i) x_s.data[i] = y_s.data[i] + mu.data[i];
    const BasicMel<T> score = score_net(x_s, mu, s);
    require_same_shape(y_s, score, "dpm_solver1_step: score shape");
    BasicMel<T> out(y_s.n_mels, y_s.n_frames);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = ratio * y_s.data[i] + coef * score.data[i];
    return out;
}

// Draw X_T = mu + z / sqrt(tau) and integrate the configured method across
// the grid; the state at t_min is returned as X_0. Deterministic given
// (seed, stream): the initial draw consumes elements in order, then the SDE
// path consumes one z tensor per step.
template <typename T, typename ScoreFn>
BasicMel<T> sample(ScoreFn&& score_net, const BasicMel<T>& mu, const NoiseSchedule& sched,
                   const SamplerConfig& cfg) {
    require(cfg.temperature > 0.0, "sample: temperature must be positive");
    require(cfg.grid.nfe >= 1 && cfg.grid.points.size() == static_cast<size_t>(cfg.grid.nfe) + 1,
            "sample: invalid time grid");
    Rng rng = Rng::fork(cfg.seed, cfg.stream);
    const T inv_sqrt_tau = static_cast<T>(1.0 / std::sqrt(cfg.temperature));

    if (cfg.method == SamplerMethod::dpm_solver1) {
        BasicMel<T> y(mu.n_mels, mu.n_frames);
        for (auto& v : y.data) v = static_cast<T>(rng.gaussian()) * inv_sqrt_tau;
        for (int k = 0; k < cfg.grid.nfe; ++k)
            y = dpm_solver1_step(sched, y, mu, score_net, cfg.grid.points[static_cast<size_t>(k)],
                                 cfg.grid.points[static_cast<size_t>(k) + 1]);
        for (size_t i = 0; i < y.size(); ++i) y.data[i] += mu.data[i];
        return y;
    }

    BasicMel<T> x(mu.n_mels, mu.n_frames);
    for (size_t i = 0; i < x.size(); ++i)
        x.data[i] = mu.data[i] + static_cast<T>(rng.gaussian()) * inv_sqrt_tau;
    for (int k = 0; k < cfg.grid.nfe; ++k) {
        const double s = cfg.grid.points[static_cast<size_t>(k)];
        const double t = cfg.grid.points[static_cast<size_t>(k) + 1];
        const double h = s - t;
        const BasicMel<T> score = score_net(x, mu, s);
        if (cfg.method == SamplerMethod::ode_euler) {
            x = ode_euler_step(sched, x, mu, score, s, h);
        } else {
            BasicMel<T> z(mu.n_mels, mu.n_frames);
            for (auto& v : z.data) v = static_cast<T>(rng.gaussian());
            x = sde_euler_step(sched, x, mu, score, s, h, z);
        }
    }
    return x;
}

inline std::string to_string(SamplerMethod m) {
    switch (m) {
        case SamplerMethod::sde_euler: return "sde-euler";
        case SamplerMethod::ode_euler: return "ode-euler";
        case SamplerMethod::dpm_solver1: return "dpm1";
    }
    return "?";
}

}  // namespace lightgrad
