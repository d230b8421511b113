#include <doctest.h>

#include <cmath>

#include "dera/errors.hpp"
#include "dera/mixture.hpp"
#include "dera/rng.hpp"

using namespace dera;

namespace {

GaussianMixture single(double mean, double var) {
    GaussianMixture g;
    g.dim = 1;
    g.components = {{1.0, {mean}, {var}}};
    return g;
}

GaussianMixture symmetric_pair(double sep, double var) {
    GaussianMixture g;
    g.dim = 1;
    g.components = {{0.5, {-sep}, {var}}, {0.5, {sep}, {var}}};
    return g;
}

double mixture_mean(const GaussianMixture& g) {
    double acc = 0.0;
    for (const auto& c : g.components) acc += c.weight * c.mean[0];
    return acc;
}

double mixture_second_moment(const GaussianMixture& g) {
    double acc = 0.0;
    for (const auto& c : g.components)
        acc += c.weight * (c.var_at(0) + c.mean[0] * c.mean[0]);
    return acc;
}

// test-only oracle: normalized moments of p(x) exp(r(x) ib) by direct grid
// integration on [lo, hi]
struct GridTilt {
    double mass_ratio_second_to_first; // for two-component weight checks
    double mean;
    double second;
};
GridTilt grid_tilt_moments(const GaussianMixture& g, const RewardSpec& r, double ib,
                           double lo, double hi, double h) {
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (double x = lo; x <= hi; x += h) {
        const double p = std::exp(g.log_density({&x, 1}) + ib * r.evaluate({&x, 1}));
        z += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    return {0.0, m1 / z, m2 / z};
}

} // namespace

TEST_CASE("noised marginal endpoints") {
    const auto sched = make_schedule(ScheduleKind::linear_beta, 1000);
    const auto g = symmetric_pair(2.0, 1.0);

    const auto at0 = noised_marginal(g, sched, 0);
    CHECK(at0.components[0].mean[0] == g.components[0].mean[0]);
    CHECK(at0.components[0].var[0] == g.components[0].var[0]);

    const auto atT = noised_marginal(g, sched, 1000);
    for (const auto& c : atT.components) {
        CHECK(std::abs(c.mean[0]) < 0.02);
        CHECK(c.var[0] == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("noised marginal pushforward of a single component") {
    // alpha = 0.6, sigma = 0.8 ladder entry built directly
    NoiseSchedule s;
    s.kind = ScheduleKind::linear_beta;
    s.num_train_steps = 1;
    s.alphas = {1.0, 0.6};
    s.sigmas = {0.0, 0.8};
    const auto out = noised_marginal(single(2.0, 1.0), s, 1);
    CHECK(out.components[0].mean[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(out.components[0].var[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("exact eps closed form for one standard Gaussian") {
    const auto sched = make_schedule(ScheduleKind::linear_beta, 100);
    const auto g = single(0.0, 1.0);
    for (int t : {1, 25, 60, 100}) {
        const auto [a, s] = forward_marginal(sched, t);
        for (double x : {-2.3, -0.4, 0.0, 1.1, 3.7}) {
            const auto eps = exact_eps(g, {&x, 1}, t, sched);
            CHECK(eps[0] == doctest::Approx(s * x / (a * a + s * s)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(exact_eps(g, std::vector<double>{0.0}, 0, sched), IndexError);
}

TEST_CASE("exact eps symmetry") {
    const auto sched = make_schedule(ScheduleKind::linear_beta, 100);
    const double zero = 0.0;

    const auto centered = single(0.0, 1.0);
    CHECK(exact_eps(centered, {&zero, 1}, 40, sched)[0] == 0.0);

    const auto pair = symmetric_pair(1.5, 0.7);
    CHECK(exact_eps(pair, {&zero, 1}, 40, sched)[0] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("exact eps equals the score transform by central differences") {
    const auto sched = make_schedule(ScheduleKind::linear_beta, 500);
    GaussianMixture g;
    g.dim = 1;
    g.components = {{0.3, {-1.5}, {0.6}}, {0.5, {0.4}, {1.2}}, {0.2, {2.2}, {0.9}}};

    RngStream rng(20250810);
    const double h = 1e-4;
    for (int i = 0; i < 100; ++i) {
        const int t = 1 + static_cast<int>(rng.uniform() * 500.0);
        const double x = 3.0 * rng.normal();
        const auto noised = noised_marginal(g, sched, t);
        const double xp = x + h, xm = x - h;
        const double score =
            (noised.log_density({&xp, 1}) - noised.log_density({&xm, 1})) / (2.0 * h);
        const double expected = -sched.sigma(t) * score;
        const double got = exact_eps(g, {&x, 1}, t, sched)[0];
        CHECK(std::abs(got - expected) / std::max(std::abs(got), 1e-3) <= 1e-5);
    }
}

TEST_CASE("exact eps matches the score transform in two dimensions") {
    const auto sched = make_schedule(ScheduleKind::linear_beta, 400);
    GaussianMixture g;
    g.dim = 2;
    g.components = {{0.6, {-1.0, 0.5}, {0.7, 1.4}}, {0.4, {1.2, -0.8}, {1.1}}};

    RngStream rng(31415);
    const double h = 1e-4;
    for (int i = 0; i < 50; ++i) {
        const int t = 1 + static_cast<int>(rng.uniform() * 400.0);
        std::vector<double> x{2.5 * rng.normal(), 2.5 * rng.normal()};
        const auto noised = noised_marginal(g, sched, t);
        const auto eps = exact_eps(g, x, t, sched);
        for (std::size_t d = 0; d < 2; ++d) {
            auto shifted = x;
            shifted[d] = x[d] + h;
            const double up = noised.log_density(shifted);
            shifted[d] = x[d] - h;
            const double down = noised.log_density(shifted);
            const double expected = -sched.sigma(t) * (up - down) / (2.0 * h);
            CHECK(std::abs(eps[d] - expected) / std::max(std::abs(eps[d]), 1e-3) <= 1e-5);
        }
    }
}

TEST_CASE("tilt at zero strength is the identity") {
    const auto g = symmetric_pair(2.0, 1.0);
    const RewardSpec r{LinearReward{{1.0}, 0.0}};
    const auto out = tilt(g, r, 0.0);
    CHECK(out.components[0].mean[0] == g.components[0].mean[0]);
    CHECK(out.components[0].weight == g.components[0].weight);
}

TEST_CASE("linear tilt of one Gaussian shifts the mean by var * a * ib") {
    const RewardSpec r{LinearReward{{1.0}, 0.0}};
    const auto out = tilt(single(0.0, 1.0), r, 1.0);
    CHECK(out.components[0].mean[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.components[0].var[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.components[0].weight == doctest::Approx(1.0).epsilon(1e-15));

    // independent grid integration of p(x) e^x over [-8, 10]
    const auto oracle = grid_tilt_moments(single(0.0, 1.0), r, 1.0, -8.0, 10.0, 1e-3);
    CHECK(oracle.mean == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(oracle.second - oracle.mean * oracle.mean == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear tilt reweights well-separated components") {
    const RewardSpec r{LinearReward{{1.0}, 0.0}};
    const auto out = tilt(symmetric_pair(2.0, 1.0), r, 1.0);
    REQUIRE(out.components.size() == 2);
    CHECK(out.components[0].mean[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(out.components[1].mean[0] == doctest::Approx(3.0).epsilon(1e-14));
    const double w1 = 1.0 / (1.0 + std::exp(4.0));
    CHECK(out.components[0].weight == doctest::Approx(w1).epsilon(1e-12));
    CHECK(out.components[1].weight == doctest::Approx(1.0 - w1).epsilon(1e-12));

    const auto oracle =
        grid_tilt_moments(symmetric_pair(2.0, 1.0), r, 1.0, -10.0, 12.0, 1e-3);
    CHECK(mixture_mean(out) == doctest::Approx(oracle.mean).epsilon(1e-6));
    CHECK(mixture_second_moment(out) == doctest::Approx(oracle.second).epsilon(1e-6));
}

TEST_CASE("tilt composes additively in strength") {
    RngStream rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        GaussianMixture g;
        g.dim = 1;
        const int K = 1 + static_cast<int>(rng.uniform() * 3.0);
        double total = 0.0;
        std::vector<double> raw(static_cast<std::size_t>(K));
        for (auto& w : raw) {
            w = 0.2 + rng.uniform();
            total += w;
        }
        for (int k = 0; k < K; ++k)
            g.components.push_back({raw[static_cast<std::size_t>(k)] / total,
                                    {3.0 * rng.normal()},
                                    {0.3 + 2.0 * rng.uniform()}});
        RewardSpec r;
        if (trial % 2 == 0)
            r.reward = LinearReward{{rng.normal()}, 0.0};
        else
            r.reward = QuadraticReward{{-0.4 * rng.uniform()}, {rng.normal()}, 0.0};
        const double u = rng.uniform(), v = rng.uniform();

        const auto two = tilt(tilt(g, r, u), r, v);
        const auto one = tilt(g, r, u + v);
        for (std::size_t k = 0; k < two.components.size(); ++k) {
            CHECK(std::abs(two.components[k].weight - one.components[k].weight) <= 1e-10);
            CHECK(std::abs(two.components[k].mean[0] - one.components[k].mean[0]) <= 1e-10);
            CHECK(std::abs(two.components[k].var_at(0) - one.components[k].var_at(0)) <=
                  1e-10);
        }
    }
}

TEST_CASE("tilted densities stay normalized") {
    const RewardSpec r{LinearReward{{1.0}, 0.0}};
    const auto g = tilt(symmetric_pair(2.0, 1.0), r, 0.7);
    double z = 0.0;
    const double h = 1e-3;
    for (double x = -12.0; x <= 14.0; x += h) z += std::exp(g.log_density({&x, 1})) * h;
    CHECK(z == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("log-domain weights survive extreme tilts") {
    GaussianMixture g;
    g.dim = 1;
    g.components = {{0.5, {-50.0}, {1.0}}, {0.5, {50.0}, {1.0}}};
    const RewardSpec r{LinearReward{{1.0}, 0.0}};
    const auto out = tilt(g, r, 10.0); // weight ratio e^1000 without logs
    CHECK(std::isfinite(out.components[0].weight));
    CHECK(out.components[1].weight == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quadratic tilt rejects curvature past the component precision") {
    // component precision 1/2: curvature -3 tightens it, +3 flips its sign
    const RewardSpec r{QuadraticReward{{-3.0}, {0.0}, 0.0}};
    const RewardSpec bad{QuadraticReward{{3.0}, {0.0}, 0.0}};
    CHECK_NOTHROW(tilt(single(0.0, 2.0), r, 1.0));
    CHECK_THROWS_AS(tilt(single(0.0, 2.0), bad, 1.0), NonNormalizableTiltError);
}

TEST_CASE("quadratic tilt matches grid integration") {
    const RewardSpec r{QuadraticReward{{-1.0}, {0.5}, 0.0}};
    const auto g = symmetric_pair(1.0, 0.8);
    const auto out = tilt(g, r, 0.9);
    const auto oracle = grid_tilt_moments(g, r, 0.9, -9.0, 9.0, 1e-3);
    CHECK(mixture_mean(out) == doctest::Approx(oracle.mean).epsilon(1e-6));
    CHECK(mixture_second_moment(out) == doctest::Approx(oracle.second).epsilon(1e-6));
}

TEST_CASE("reward expectations in closed form") {
    const RewardSpec constant{LinearReward{{0.0}, 4.25}};
    CHECK(reward_expectation(symmetric_pair(2.0, 1.0), constant) == doctest::Approx(4.25));

    const RewardSpec linear{LinearReward{{2.0}, 1.0}};
    CHECK(reward_expectation(single(3.0, 4.0), linear) == doctest::Approx(7.0));

    GaussianMixture g;
    g.dim = 1;
    g.components = {{0.5, {0.0}, {1.0}}, {0.5, {2.0}, {1.0}}};
    const RewardSpec quad{QuadraticReward{{-1.0}, {0.0}, 0.0}};
    CHECK(reward_expectation(g, quad) == doctest::Approx(-1.5).epsilon(1e-14));

    // Monte-Carlo oracle for the same expectation, 3 sigma band
    RngStream rng(99);
    const std::size_t n = 10000000;
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = g.sample(rng);
        const double v = quad.evaluate(x);
        acc += v;
        acc2 += v * v;
    }
    const double mc = acc / static_cast<double>(n);
    const double se = std::sqrt((acc2 / n - mc * mc) / static_cast<double>(n));
    CHECK(std::abs(mc - (-1.5)) <= 3.0 * se);

    const RewardSpec blackbox{BlackboxReward{[](std::span<const double>) { return 0.0; }}};
    CHECK_THROWS_AS(reward_expectation(g, blackbox), ConfigError);
}

TEST_CASE("conditional family construction") {
    const auto one = make_conditional_family({single(1.0, 2.0)}, {{1.0}});
    REQUIRE(one.size() == 2);
    CHECK(find_model(one, std::nullopt).components[0].mean[0] == 1.0);

    const auto two = make_conditional_family({single(-2.0, 1.0), single(2.0, 1.0)},
                                             {{0.5, 0.5}});
    const auto& uncond = find_model(two, std::nullopt);
    REQUIRE(uncond.components.size() == 2);
    CHECK(uncond.components[0].weight == doctest::Approx(0.5));
    CHECK(uncond.components[0].mean[0] == -2.0);

    // three classes: unconditional density equals the prior-weighted sum
    GaussianMixture c0 = symmetric_pair(1.0, 0.5);
    GaussianMixture c1 = single(0.3, 2.0);
    GaussianMixture c2 = symmetric_pair(2.5, 1.5);
    const std::vector<double> priors{0.2, 0.3, 0.5};
    const auto fam = make_conditional_family({c0, c1, c2}, priors);
    const auto& mix = find_model(fam, std::nullopt);
    RngStream rng(5);
    for (int i = 0; i < 100; ++i) {
        const double x = 4.0 * rng.normal();
        const double direct = priors[0] * std::exp(c0.log_density({&x, 1})) +
                              priors[1] * std::exp(c1.log_density({&x, 1})) +
                              priors[2] * std::exp(c2.log_density({&x, 1}));
        CHECK(std::exp(mix.log_density({&x, 1})) == doctest::Approx(direct).epsilon(1e-12));
    }

    GaussianMixture wrong_dim;
    wrong_dim.dim = 2;
    wrong_dim.components = {{1.0, {0.0, 0.0}, {1.0}}};
    CHECK_THROWS_AS(make_conditional_family({single(0.0, 1.0), wrong_dim}, {{0.5, 0.5}}),
                    ShapeError);
    CHECK_THROWS_AS(make_conditional_family({single(0.0, 1.0)}, {{0.9}}), ConfigError);
    CHECK_THROWS_AS(find_model(two, 7), ConfigError);
}

TEST_CASE("mixture json round-trip is lossless") {
    RngStream rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        GaussianMixture g;
        g.dim = trial % 3 + 1;
        const int K = 1 + static_cast<int>(rng.uniform() * 3.0);
        std::vector<double> raw(static_cast<std::size_t>(K));
        double total = 0.0;
        for (auto& w : raw) {
            w = 0.1 + rng.uniform();
            total += w;
        }
        for (int k = 0; k < K; ++k) {
            GaussianComponent c;
            c.weight = raw[static_cast<std::size_t>(k)] / total;
            for (int d = 0; d < g.dim; ++d) c.mean.push_back(rng.normal() * 3.0);
            if (trial % 2 == 0) {
                c.var = {0.3 + rng.uniform()};
            } else {
                c.var.clear();
                for (int d = 0; d < g.dim; ++d) c.var.push_back(0.3 + rng.uniform());
            }
            g.components.push_back(std::move(c));
        }
        // weights renormalize to machine precision; nudge the last weight so
        // validate() passes exactly
        double sum = 0.0;
        for (const auto& c : g.components) sum += c.weight;
        g.components.back().weight += 1.0 - sum;

        nlohmann::json j = g;
        const auto back = j.get<GaussianMixture>();
        REQUIRE(back.components.size() == g.components.size());
        for (std::size_t k = 0; k < g.components.size(); ++k) {
            CHECK(back.components[k].weight == g.components[k].weight);
            CHECK(back.components[k].mean == g.components[k].mean);
            CHECK(back.components[k].var == g.components[k].var);
        }
    }
}
