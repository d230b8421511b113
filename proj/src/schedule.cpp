#include "dera/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "dera/errors.hpp"

namespace dera {

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::linear_beta: return "linear_beta";
        case ScheduleKind::cosine: return "cosine";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "linear_beta") return ScheduleKind::linear_beta;
    if (name == "cosine") return ScheduleKind::cosine;
    throw ConfigError("unknown schedule kind: " + name);
}

double NoiseSchedule::alpha(int t) const {
    if (t < 0 || t > num_train_steps) throw IndexError("schedule: t out of range");
    return alphas[static_cast<std::size_t>(t)];
}

double NoiseSchedule::sigma(int t) const {
    if (t < 0 || t > num_train_steps) throw IndexError("schedule: t out of range");
    return sigmas[static_cast<std::size_t>(t)];
}

double NoiseSchedule::step_variance(int t, int t_prev) const {
    const double a_ratio = alpha(t) / alpha(t_prev);
    return sigma(t) * sigma(t) - a_ratio * a_ratio * sigma(t_prev) * sigma(t_prev);
}

void NoiseSchedule::validate() const {
    const std::size_t n = static_cast<std::size_t>(num_train_steps) + 1;
    if (num_train_steps < 1 || alphas.size() != n || sigmas.size() != n)
        throw ConfigError("schedule: inconsistent array lengths");
    if (alphas[0] < 1.0 - 1e-6 || sigmas[0] > 1e-6)
        throw ConfigError("schedule: index 0 must be the clean-data endpoint");
    for (std::size_t t = 0; t < n; ++t) {
        if (!(alphas[t] > 0.0 && alphas[t] <= 1.0))
            throw ConfigError("schedule: alpha outside (0, 1]");
        const double vp = alphas[t] * alphas[t] + sigmas[t] * sigmas[t];
        if (std::abs(vp - 1.0) > 1e-9)
            throw ConfigError("schedule: not variance-preserving");
    }
    for (int t = 1; t <= num_train_steps; ++t) {
        if (!(alphas[t] < alphas[t - 1]))
            throw ConfigError("schedule: alpha not strictly decreasing");
        if (t >= 2 && !(sigmas[t] > sigmas[t - 1]))
            throw ConfigError("schedule: sigma not strictly increasing");
        if (!(step_variance(t, t - 1) > 0.0))
            throw ConfigError("schedule: non-positive per-step variance");
    }
}

namespace {

NoiseSchedule from_alpha_bar(ScheduleKind kind, int T, const std::vector<double>& alpha_bar) {
    NoiseSchedule s;
    s.kind = kind;
    s.num_train_steps = T;
    s.alphas.resize(static_cast<std::size_t>(T) + 1);
    s.sigmas.resize(static_cast<std::size_t>(T) + 1);
    s.alphas[0] = 1.0;
    s.sigmas[0] = 0.0;
    for (int t = 1; t <= T; ++t) {
        const double ab = alpha_bar[static_cast<std::size_t>(t - 1)];
        s.alphas[t] = std::sqrt(ab);
        s.sigmas[t] = std::sqrt(1.0 - ab);
    }
    s.validate();
    return s;
}

} // namespace

NoiseSchedule make_schedule(ScheduleKind kind, int T, LinearBetaParams params) {
    if (T < 1) throw ConfigError("make_schedule: T must be >= 1");
    std::vector<double> alpha_bar(static_cast<std::size_t>(T));
    if (kind == ScheduleKind::linear_beta) {
        const double bmin = params.beta_min;
        const double bmax = params.beta_max;
        if (!(bmin > 0.0 && bmin < 1.0) || !(bmax > 0.0 && bmax < 1.0) || bmin > bmax)
            throw ConfigError("make_schedule: need 0 < beta_min <= beta_max < 1");
        double prod = 1.0;
        for (int t = 0; t < T; ++t) {
            const double beta =
                T == 1 ? bmin : bmin + (bmax - bmin) * static_cast<double>(t) / (T - 1);
            prod *= 1.0 - beta;
            alpha_bar[static_cast<std::size_t>(t)] = prod;
        }
    } else {
        // squared-cosine alpha-bar with the usual 0.999 per-step beta cap so
        // alpha_T stays strictly positive
        const double s = 0.008;
        auto f = [&](double t) {
            const double c = std::cos((t / T + s) / (1.0 + s) * M_PI / 2.0);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            double ratio = f(static_cast<double>(t)) / f0 / prev;
            ratio = std::max(ratio, 1.0 - 0.999);
            prev *= ratio;
            alpha_bar[static_cast<std::size_t>(t - 1)] = prev;
        }
    }
    return from_alpha_bar(kind, T, alpha_bar);
}

std::pair<double, double> forward_marginal(const NoiseSchedule& schedule, int t) {
    return {schedule.alpha(t), schedule.sigma(t)};
}

namespace detail {

double posterior_into(std::span<const double> x_t, std::span<const double> eps_hat,
                      const StepPair& step, const NoiseSchedule& schedule,
                      std::span<double> mean_out) {
    if (x_t.size() != eps_hat.size() || x_t.size() != mean_out.size())
        throw ShapeError("scheduler_posterior: dimension mismatch");
    if (step.t_prev >= step.t) throw IndexError("scheduler_posterior: need t_prev < t");
    if (step.t < 1) throw IndexError("scheduler_posterior: need t >= 1");
    const double a_t = schedule.alpha(step.t);
    const double s_t = schedule.sigma(step.t);
    const double a_p = schedule.alpha(step.t_prev);
    const double s_p = schedule.sigma(step.t_prev);
    if (!(a_t > 0.0)) throw ConfigError("scheduler_posterior: alpha_t must be positive");

    const double var_step = schedule.step_variance(step.t, step.t_prev);
    const double var = step.eta * step.eta * var_step * (s_p * s_p) / (s_t * s_t);
    const double dir = std::sqrt(std::max(s_p * s_p - var, 0.0));
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const double x0_hat = (x_t[i] - s_t * eps_hat[i]) / a_t;
        mean_out[i] = a_p * x0_hat + dir * eps_hat[i];
    }
    return var;
}

} // namespace detail

PosteriorGaussian scheduler_posterior(std::span<const double> x_t,
                                      std::span<const double> eps_hat,
                                      const StepPair& step, const NoiseSchedule& schedule) {
    PosteriorGaussian out;
    out.mean.resize(x_t.size());
    out.var.resize(1);
    out.var[0] = detail::posterior_into(x_t, eps_hat, step, schedule, out.mean);
    return out;
}

std::vector<StepPair> inference_steps(const NoiseSchedule& schedule, int N, double eta) {
    const int T = schedule.num_train_steps;
    if (N < 1 || N > T) throw ConfigError("inference_steps: need 1 <= N <= T");
    if (T % N != 0)
        throw ConfigError("inference_steps: N must divide T for an integer stride");
    const int stride = T / N;
    std::vector<StepPair> steps;
    steps.reserve(static_cast<std::size_t>(N));
    for (int i = N; i >= 1; --i)
        steps.push_back(StepPair{i * stride, (i - 1) * stride, eta});
    return steps;
}

void dump_csv(const NoiseSchedule& schedule, std::ostream& out) {
    out << "t,alpha,sigma\n";
    char buf[80];
    for (int t = 0; t <= schedule.num_train_steps; ++t) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g\n", t, schedule.alpha(t),
                      schedule.sigma(t));
        out << buf;
    }
}

} // namespace dera
