#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lightgrad/samplers.hpp"
#include "lightgrad/schedule.hpp"

using namespace lightgrad;

TEST_CASE("schedule: closed-form rho matches quadrature of beta") {
    NoiseSchedule s;  // beta0=0.05, beta1=20, T=1
    auto beta = [&](double t) { return schedule_beta(s, t); };
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        const double t = rng.uniform(s.t_min, s.horizon);
        const double oracle = -testutil::adaptive_quad(beta, 0.0, t);
        const double got = schedule_eval(s, t).rho;
        CHECK(std::abs(got - oracle) <= 1e-10 * std::abs(oracle));
    }
    // the worked value at t = T
    CHECK(schedule_eval(s, 1.0).rho == doctest::Approx(-10.025).epsilon(1e-12));
}

TEST_CASE("schedule: t -> t_min limit") {
    NoiseSchedule s;
    const ScheduleEval e = schedule_eval(s, s.t_min);
    CHECK(e.rho < 0.0);
    CHECK(e.rho > -1e-3);
    CHECK(e.alpha < 1.0);
    CHECK(e.alpha > 0.9999);
    CHECK(e.sigma > 0.0);
    CHECK(e.sigma < 0.01);
}

TEST_CASE("schedule: alpha^2 + sigma^2 = 1 at random t") {
    NoiseSchedule s;
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const double t = rng.uniform(s.t_min, s.horizon);
        const ScheduleEval e = schedule_eval(s, t);
        CHECK(e.alpha * e.alpha + e.sigma * e.sigma == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(e.sigma == doctest::Approx(std::sqrt(e.var)));
        CHECK(e.rho <= 0.0);
        CHECK(e.var >= 0.0);
        CHECK(e.var < 1.0);
    }
}

TEST_CASE("schedule: derived values at t = T match the quadrature oracle") {
    NoiseSchedule s;
    auto beta = [&](double t) { return schedule_beta(s, t); };
    const double rho = -testutil::adaptive_quad(beta, 0.0, 1.0);
    const ScheduleEval e = schedule_eval(s, 1.0);
    CHECK(e.alpha == doctest::Approx(std::exp(0.5 * rho)).epsilon(1e-12));
    CHECK(e.sigma == doctest::Approx(std::sqrt(1.0 - std::exp(rho))).epsilon(1e-12));
    CHECK(e.lambda ==
          doctest::Approx(std::log(std::exp(0.5 * rho) / std::sqrt(1.0 - std::exp(rho))))
              .epsilon(1e-12));
}

TEST_CASE("schedule: lambda strictly decreasing") {
    NoiseSchedule s;
    double prev = schedule_eval(s, s.t_min).lambda;
    for (int i = 1; i <= 64; ++i) {
        const double t = s.t_min + (s.horizon - s.t_min) * i / 64.0;
        const double lam = schedule_eval(s, t).lambda;
        CHECK(lam < prev);
        prev = lam;
    }
}

TEST_CASE("schedule: domain errors") {
    NoiseSchedule s;
    CHECK_THROWS_AS(schedule_eval(s, 0.0), std::domain_error);
    CHECK_THROWS_AS(schedule_eval(s, s.t_min / 2), std::domain_error);
    CHECK_THROWS_AS(schedule_eval(s, s.horizon + 1e-9), std::domain_error);
}

TEST_CASE("lambda_inverse: round-trips schedule_eval") {
    NoiseSchedule s;
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double t = rng.uniform(s.t_min, s.horizon);
        const double lam = schedule_eval(s, t).lambda;
        const double back = lambda_inverse(s, lam);
        CHECK(std::abs(back - t) <= 1e-9 * t);
    }
}

TEST_CASE("lambda_inverse: boundary and domain") {
    NoiseSchedule s;
    const double lam_T = schedule_eval(s, s.horizon).lambda;
    CHECK(lambda_inverse(s, lam_T) == doctest::Approx(s.horizon).epsilon(1e-12));
    const double lam_min = schedule_eval(s, s.t_min).lambda;
    CHECK(lambda_inverse(s, lam_min) == doctest::Approx(s.t_min).epsilon(1e-9));
    CHECK_THROWS_AS(lambda_inverse(s, lam_min + 1.0), std::domain_error);
    CHECK_THROWS_AS(lambda_inverse(s, lam_T - 1.0), std::domain_error);
}

TEST_CASE("lambda_inverse: constant-beta closed form") {
    // with beta0 == beta1, rho(t) = -beta0 t, so t = -rho / beta0
    NoiseSchedule s;
    s.beta0 = s.beta1 = 4.0;
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(s.t_min, s.horizon);
        const ScheduleEval e = schedule_eval(s, t);
        const double expect = -e.rho / s.beta0;
        CHECK(lambda_inverse(s, e.lambda) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("make_grid: endpoints and counts") {
    NoiseSchedule s;
    const TimeGrid g1 = make_grid(s, 1, GridSpacing::uniform_t);
    REQUIRE(g1.points.size() == 2);
    CHECK(g1.points[0] == s.horizon);
    CHECK(g1.points[1] == s.t_min);

    const TimeGrid g4 = make_grid(s, 4, GridSpacing::uniform_t);
    REQUIRE(g4.points.size() == 5);
    CHECK(g4.points[0] == doctest::Approx(1.0));
    CHECK(g4.points[1] == doctest::Approx(0.75025));
    CHECK(g4.points[2] == doctest::Approx(0.5005));
    CHECK(g4.points[3] == doctest::Approx(0.25075));
    CHECK(g4.points[4] == doctest::Approx(0.001));

    CHECK_THROWS_AS(make_grid(s, 0, GridSpacing::uniform_t), std::invalid_argument);
}

TEST_CASE("make_grid: uniform-in-lambda spacing is arithmetic in lambda") {
    NoiseSchedule s;
    const TimeGrid g = make_grid(s, 4, GridSpacing::uniform_lambda);
    REQUIRE(g.points.size() == 5);
    std::vector<double> lams;
    for (double t : g.points) lams.push_back(schedule_eval(s, t).lambda);
    const double step = (lams.back() - lams.front()) / 4.0;
    for (int i = 0; i < 4; ++i) {
        const double diff = lams[static_cast<size_t>(i) + 1] - lams[static_cast<size_t>(i)];
        CHECK(std::abs(diff - step) <= 1e-9 * std::abs(step));
    }
    for (size_t i = 1; i < g.points.size(); ++i) CHECK(g.points[i] < g.points[i - 1]);
}
