#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dera/gaussian.hpp"

namespace dera {

enum class ScheduleKind { linear_beta, cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct LinearBetaParams {
    double beta_min = 1e-4;
    double beta_max = 0.02;
};

/// Variance-preserving noise ladder {alpha_t, sigma_t}, t = 0..T, with index 0
/// the clean-data endpoint (alpha_0 = 1, sigma_0 = 0). Immutable after
/// construction and safe to share across threads.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear_beta;
    int num_train_steps = 0; // T
    std::vector<double> alphas; // T+1 entries, strictly decreasing
    std::vector<double> sigmas; // T+1 entries, strictly increasing for t >= 1

    double alpha(int t) const;
    double sigma(int t) const;

    /// sigma^2_{t|t_prev} = sigma_t^2 - (alpha_t/alpha_{t_prev})^2 sigma_{t_prev}^2,
    /// the forward per-step variance between two ladder points.
    double step_variance(int t, int t_prev) const;

    void validate() const;
};

NoiseSchedule make_schedule(ScheduleKind kind, int num_train_steps,
                            LinearBetaParams params = {});

/// (alpha_t, sigma_t) of the forward marginal q(x_t|x_0) = N(alpha_t x_0, sigma_t^2 I).
std::pair<double, double> forward_marginal(const NoiseSchedule& schedule, int t);

/// One reverse step t -> t_prev. eta = 1 reproduces the ancestral reverse-process
/// variance, eta = 0 is the deterministic path.
struct StepPair {
    int t = 0;
    int t_prev = 0;
    double eta = 1.0;
};

/// Converts a noise prediction into the Gaussian reverse-step parameters:
///   x0_hat  = (x_t - sigma_t eps_hat) / alpha_t
///   var     = eta^2 sigma^2_{t|t_prev} sigma_{t_prev}^2 / sigma_t^2
///   mean    = alpha_{t_prev} x0_hat + sqrt(max(sigma_{t_prev}^2 - var, 0)) eps_hat
PosteriorGaussian scheduler_posterior(std::span<const double> x_t,
                                      std::span<const double> eps_hat,
                                      const StepPair& step,
                                      const NoiseSchedule& schedule);

/// The evenly spaced inference ladder {t_i = i * (T/N)}, returned as reverse
/// step pairs from t_N = T down to t_0 = 0. N must divide T.
std::vector<StepPair> inference_steps(const NoiseSchedule& schedule, int num_inference_steps,
                                      double eta);

/// CSV dump (t, alpha, sigma at 12 significant digits) for external cross-checks.
void dump_csv(const NoiseSchedule& schedule, std::ostream& out);

namespace detail {
/// In-place core of scheduler_posterior; returns the scalar variance.
double posterior_into(std::span<const double> x_t, std::span<const double> eps_hat,
                      const StepPair& step, const NoiseSchedule& schedule,
                      std::span<double> mean_out);
} // namespace detail

} // namespace dera
