#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dera/errors.hpp"
#include "dera/schedule.hpp"

using namespace dera;

namespace {

// Spot values recomputed externally with 50-digit arithmetic (cumulative
// products of 1 - beta_t for the default linear ladder).
struct SpotValue {
    int t;
    double alpha;
    double sigma;
};
constexpr SpotValue kLinear1000Spots[] = {
    {1, 0.99994999874993749609, 0.01},
    {250, 0.72393741015737023519, 0.68986565806295902254},
    {500, 0.28033416288739807701, 0.95990247271179678041},
    {750, 0.057883939386817653555, 0.99832331915119723899},
    {1000, 0.006352818087570022113, 0.99997982064756998934},
};

} // namespace

TEST_CASE("linear-beta ladder matches high-precision recomputation") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 1000);
    for (const auto& spot : kLinear1000Spots) {
        CHECK(std::abs(s.alpha(spot.t) - spot.alpha) <= 1e-12);
        CHECK(std::abs(s.sigma(spot.t) - spot.sigma) <= 1e-12);
    }
    for (int t = 1; t <= 1000; ++t) CHECK(s.alpha(t) < s.alpha(t - 1));
}

TEST_CASE("cosine ladder has a clean t = 0 endpoint") {
    const auto s = make_schedule(ScheduleKind::cosine, 10);
    CHECK(s.alpha(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.sigma(0) == doctest::Approx(0.0).epsilon(1e-12));
    for (int t = 1; t <= 10; ++t) {
        CHECK(s.alpha(t) < s.alpha(t - 1));
        CHECK(s.step_variance(t, t - 1) > 0.0);
    }
}

TEST_CASE("single-step ladder with beta = 0.5") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 1, {0.5, 0.5});
    CHECK(s.alpha(1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(s.sigma(1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("invalid schedule parameters are rejected") {
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear_beta, 0), ConfigError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear_beta, 10, {0.5, 0.1}), ConfigError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear_beta, 10, {-0.1, 0.5}), ConfigError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear_beta, 10, {0.1, 1.5}), ConfigError);
}

TEST_CASE("forward marginal endpoints and variance preservation") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 100);
    const auto [a0, s0] = forward_marginal(s, 0);
    CHECK(a0 == 1.0);
    CHECK(s0 == 0.0);

    const auto one = make_schedule(ScheduleKind::linear_beta, 1, {0.5, 0.5});
    const auto [a1, s1] = forward_marginal(one, 1);
    CHECK(a1 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(s1 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    for (const auto& sched :
         {s, make_schedule(ScheduleKind::cosine, 100)}) {
        for (int t = 0; t <= 100; ++t) {
            const auto [a, sg] = forward_marginal(sched, t);
            CHECK(std::abs(a * a + sg * sg - 1.0) <= 1e-9);
        }
    }
    CHECK_THROWS_AS(forward_marginal(s, -1), IndexError);
    CHECK_THROWS_AS(forward_marginal(s, 101), IndexError);
}

TEST_CASE("posterior with exact noise and eta = 0 lands on the forward point") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 50);
    const double x0 = 1.7, eps = -0.6;
    const int t = 30, tp = 25;
    const double x_t = s.alpha(t) * x0 + s.sigma(t) * eps;
    const auto post = scheduler_posterior({&x_t, 1}, {&eps, 1}, {t, tp, 0.0}, s);
    CHECK(post.var[0] == 0.0);
    CHECK(post.mean[0] ==
          doctest::Approx(s.alpha(tp) * x0 + s.sigma(tp) * eps).epsilon(1e-12));
}

TEST_CASE("posterior is zero for zero inputs") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 50);
    const double x = 0.0, e = 0.0;
    const auto post = scheduler_posterior({&x, 1}, {&e, 1}, {10, 9, 1.0}, s);
    CHECK(post.mean[0] == 0.0);
}

TEST_CASE("posterior worked case matches hand evaluation of the formula chain") {
    // independently recomputed at 50 digits for linear_beta T=2, step 2 -> 1,
    // eta = 1, x = 1, eps = 0.5
    const auto s = make_schedule(ScheduleKind::linear_beta, 2);
    const double x = 1.0, e = 0.5;
    const auto post = scheduler_posterior({&x, 1}, {&e, 1}, {2, 1, 1.0}, s);
    CHECK(std::abs(post.mean[0] - 0.93889833261352312545) <= 1e-12);
    CHECK(std::abs(post.var[0] - 9.9512389292466912131e-5) <= 1e-16);
}

TEST_CASE("posterior rejects mismatched shapes and bad steps") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 10);
    const double x[2] = {1.0, 2.0};
    const double e[1] = {0.5};
    CHECK_THROWS_AS(scheduler_posterior({x, 2}, {e, 1}, {5, 4, 1.0}, s), ShapeError);
    CHECK_THROWS_AS(scheduler_posterior({e, 1}, {e, 1}, {4, 5, 1.0}, s), IndexError);
    CHECK_THROWS_AS(scheduler_posterior({e, 1}, {e, 1}, {0, -1, 1.0}, s), IndexError);
}

TEST_CASE("ancestral variance strictly contracts") {
    for (const auto& s : {make_schedule(ScheduleKind::linear_beta, 200),
                          make_schedule(ScheduleKind::cosine, 200)}) {
        for (int t = 2; t <= 200; ++t) {
            CHECK(s.step_variance(t, t - 1) > 0.0);
            const double sp = s.sigma(t - 1);
            const double var = s.step_variance(t, t - 1) * sp * sp / (s.sigma(t) * s.sigma(t));
            CHECK(var < sp * sp);
        }
    }
}

TEST_CASE("inference ladder uses an integer stride ending at zero") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 1000);
    const auto steps = inference_steps(s, 200, 1.0);
    REQUIRE(steps.size() == 200);
    CHECK(steps.front().t == 1000);
    CHECK(steps.back().t_prev == 0);
    for (const auto& st : steps) CHECK(st.t - st.t_prev == 5);
    CHECK_THROWS_AS(inference_steps(s, 300, 1.0), ConfigError);
    CHECK_THROWS_AS(inference_steps(s, 0, 1.0), ConfigError);
    CHECK_THROWS_AS(inference_steps(s, 1001, 1.0), ConfigError);
}

TEST_CASE("csv dump emits one row per ladder entry") {
    const auto s = make_schedule(ScheduleKind::linear_beta, 5);
    std::ostringstream out;
    dump_csv(s, out);
    const std::string text = out.str();
    CHECK(text.rfind("t,alpha,sigma\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == 7); // header + 6 ladder entries
    CHECK(text.find("0,1,0\n") != std::string::npos);
}
