#pragma once

#include <cmath>
#include <vector>

#include "lightgrad/mel.hpp"
#include "lightgrad/samplers.hpp"
#include "lightgrad/schedule.hpp"

// Scalar Gaussian testbed: for data ~ N(m, gamma^2) the forward process has
// closed-form marginals N(mean_t, var_t) with
//   mean_t = (1 - alpha_t) mu + alpha_t m,   var_t = alpha_t^2 gamma^2 + Sigma_t
// so the exact score -(x - mean_t)/var_t is available and solver endpoint
// errors can be measured against a fine-grid reference.

namespace lightgrad {

struct GaussianTestbed {
    NoiseSchedule sched;
    double data_mean = 3.0;
    double data_sd = 0.36;
    double prior_mu = 0.0;

    // clamp into the evaluable window; RK4 half/full steps can land a rounding
    // error outside [t_min, T]
    ScheduleEval eval_clamped(double t) const {
        const double tc = std::min(std::max(t, sched.t_min), sched.horizon);
        return schedule_eval(sched, tc);
    }
    double marginal_mean(double t) const {
        const ScheduleEval e = eval_clamped(t);
        return (1.0 - e.alpha) * prior_mu + e.alpha * data_mean;
    }
    double marginal_var(double t) const {
        const ScheduleEval e = eval_clamped(t);
        return e.alpha * e.alpha * data_sd * data_sd + e.var;
    }
    double score(double x, double t) const {
        return -(x - marginal_mean(t)) / marginal_var(t);
    }

    // score over 1x1 double mels, for use with the sampler API
    auto score_fn() const {
        return [this](const BasicMel<double>& x, const BasicMel<double>&, double t) {
            BasicMel<double> out(x.n_mels, x.n_frames);
            for (size_t i = 0; i < x.size(); ++i) out.data[i] = score(x.data[i], t);
            return out;
        };
    }

    // probability-flow ODE right-hand side dx/dt
    double ode_rhs(double t, double x) const {
        return 0.5 * schedule_beta(sched, t) * ((prior_mu - x) - score(x, t));
    }

    // classic RK4 from T down to t_min
    double rk4_endpoint(double x_start, int steps) const {
        double x = x_start;
        double t = sched.horizon;
        const double h = -(sched.horizon - sched.t_min) / steps;
        for (int i = 0; i < steps; ++i) {
            const double k1 = ode_rhs(t, x);
            const double k2 = ode_rhs(t + h / 2, x + h / 2 * k1);
            const double k3 = ode_rhs(t + h / 2, x + h / 2 * k2);
            const double k4 = ode_rhs(t + h, x + h * k3);
            x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            t += h;
        }
        return x;
    }

    // The exact flow is affine in x; recover x_out = A x_T + B from two runs.
    std::pair<double, double> affine_map(int steps) const {
        const double b = rk4_endpoint(0.0, steps);
        const double a = rk4_endpoint(1.0, steps) - b;
        return {a, b};
    }

    // deterministic solver endpoint starting from a fixed x_T (no noise)
    double solve_endpoint(SamplerMethod method, int nfe, double x_start) const {
        const TimeGrid grid = make_grid(sched, nfe, default_spacing(method));
        BasicMel<double> mu(1, 1, prior_mu);
        auto fn = score_fn();
        if (method == SamplerMethod::dpm_solver1) {
            BasicMel<double> y(1, 1, x_start - prior_mu);
            for (int k = 0; k < nfe; ++k)
                y = dpm_solver1_step(sched, y, mu, fn, grid.points[static_cast<size_t>(k)],
                                     grid.points[static_cast<size_t>(k) + 1]);
            return y.data[0] + prior_mu;
        }
        BasicMel<double> x(1, 1, x_start);
        for (int k = 0; k < nfe; ++k) {
            const double s = grid.points[static_cast<size_t>(k)];
            const double h = s - grid.points[static_cast<size_t>(k) + 1];
            const BasicMel<double> sc = fn(x, mu, s);
            x = ode_euler_step(sched, x, mu, sc, s, h);
        }
        return x.data[0];
    }
};

struct SolverErrorRow {
    int nfe;
    double ode_euler_err;
    double dpm1_err;
};

// Endpoint error of each deterministic solver against the fine-grid RK4
// reference, from a fixed start x_T = prior_mu + offset.
inline std::vector<SolverErrorRow> solver_compare(const GaussianTestbed& tb,
                                                  const std::vector<int>& nfes,
                                                  double offset = 0.2,
                                                  int reference_steps = 10000) {
    const double x_start = tb.prior_mu + offset;
    const double exact = tb.rk4_endpoint(x_start, reference_steps);
    std::vector<SolverErrorRow> rows;
    for (int nfe : nfes) {
        SolverErrorRow r{nfe, 0.0, 0.0};
        r.ode_euler_err = std::abs(tb.solve_endpoint(SamplerMethod::ode_euler, nfe, x_start) - exact);
        r.dpm1_err =
            std::abs(tb.solve_endpoint(SamplerMethod::dpm_solver1, nfe, x_start) - exact);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace lightgrad
