#pragma once

#include <cmath>

#include "lightgrad/common.hpp"

namespace lightgrad {

// Linear noise schedule beta(t) = beta0 + (beta1 - beta0) * t / T on [0, T].
// All derived closed forms below follow from rho(t) = -int_0^t beta(s) ds.
struct NoiseSchedule {
    double beta0 = 0.05;
    double beta1 = 20.0;
    double horizon = 1.0;  // T
    double t_min = 1e-3;   // smallest evaluable time; lambda diverges at t = 0
};

// Everything the forward/backward processes need at a single time t.
//   rho    = -(beta0 t + (beta1 - beta0) t^2 / (2T))   (<= 0)
//   alpha  = exp(rho / 2)
//   var    = 1 - exp(rho)            (per-element marginal variance Sigma_t)
//   sigma  = sqrt(var)
//   lambda = log(alpha / sigma)      (half log-SNR, strictly decreasing in t)
struct ScheduleEval {
    double t = 0.0;
    double beta = 0.0;
    double rho = 0.0;
    double alpha = 1.0;
    double sigma = 0.0;
    double lambda = 0.0;
    double var = 0.0;
};

namespace detail {
inline double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}
}  // namespace detail

inline double schedule_beta(const NoiseSchedule& s, double t) {
    return s.beta0 + (s.beta1 - s.beta0) * (t / s.horizon);
}

inline double schedule_rho(const NoiseSchedule& s, double t) {
    return -(s.beta0 * t + (s.beta1 - s.beta0) * t * t / (2.0 * s.horizon));
}

inline ScheduleEval schedule_eval(const NoiseSchedule& s, double t) {
    require_domain(t >= s.t_min && t <= s.horizon,
                   "schedule_eval: t must lie in [t_min, T]");
    ScheduleEval e;
    e.t = t;
    e.beta = schedule_beta(s, t);
    e.rho = schedule_rho(s, t);
    e.alpha = std::exp(0.5 * e.rho);
    e.var = -std::expm1(e.rho);  // 1 - e^rho without cancellation near t_min
    e.sigma = std::sqrt(e.var);
    e.lambda = 0.5 * e.rho - 0.5 * std::log(e.var);
    return e;
}

// Inverse of t -> lambda(t). Uses e^{2 lambda} = e^rho / (1 - e^rho), i.e.
// rho = -softplus(-2 lambda), then solves the quadratic rho(t) = rho for the
// positive root. Written as 2c / (b + sqrt(b^2 + 4ac)) to stay accurate for
// small t.
inline double lambda_inverse(const NoiseSchedule& s, double lam) {
    const double lam_lo = schedule_eval(s, s.horizon).lambda;
    const double lam_hi = schedule_eval(s, s.t_min).lambda;
    require_domain(lam >= lam_lo && lam <= lam_hi,
                   "lambda_inverse: lambda outside [lambda(T), lambda(t_min)]");
    const double rho = -detail::softplus(-2.0 * lam);
    const double a = (s.beta1 - s.beta0) / (2.0 * s.horizon);
    const double b = s.beta0;
    const double c = -rho;  // >= 0
    double t;
    if (std::abs(a) < 1e-14) {
        t = c / b;
    } else {
        t = 2.0 * c / (b + std::sqrt(b * b + 4.0 * a * c));
    }
    if (t < s.t_min) t = s.t_min;
    if (t > s.horizon) t = s.horizon;
    return t;
}

}  // namespace lightgrad
