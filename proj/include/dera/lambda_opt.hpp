#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dera {

/// RBF kernel sigma_f^2 exp(-(a-b)^2 / (2 l^2)).
double rbf_kernel(double a, double b, double signal_var, double length_scale);

/// Zero-mean GP surrogate on [0,1] with fixed hyperparameters (no
/// marginal-likelihood fitting). fit() caches the Cholesky factor of
/// K + sigma_n^2 I; it throws on a failed factorization.
class GPModel {
  public:
    double signal_var = 1.0;
    double length_scale = 0.15;
    double noise_var = 1e-4;

    void fit(std::span<const double> xs, std::span<const double> ys);

    std::size_t size() const { return xs_.size(); }
    const std::vector<double>& points() const { return xs_; }
    const std::vector<double>& values() const { return ys_; }

  private:
    friend std::pair<double, double> gp_posterior(const GPModel& gp, double query);
    std::vector<double> xs_, ys_;
    std::vector<double> chol_;  // lower-triangular factor of K + noise I, row major
    std::vector<double> alpha_; // (K + noise I)^-1 y
};

/// Posterior (mean, variance) at a query point; variance clipped at 0.
std::pair<double, double> gp_posterior(const GPModel& gp, double query);

/// EI = (mean - f_best) Phi(z) + std phi(z), z = (mean - f_best)/std;
/// degenerates to max(mean - f_best, 0) at std = 0.
double expected_improvement(double mean, double std, double f_best);

/// UCB = mean + beta_n std with beta_n = sqrt(2 log(n^2 pi^2 / (6 delta))).
double ucb(double mean, double std, int n, double delta);

enum class Acquisition { ei, ucb };

struct BOConfig {
    int budget = 15;          // T, total evaluations
    int initial_design = 4;   // n0 < T
    Acquisition acquisition = Acquisition::ei;
    double ucb_delta = 0.1;
    int grid_points = 1001;   // [0,1] line-search resolution, >= 101
    int batch_per_eval = 1000; // samples per reward estimate (used by callers)
    std::uint64_t seed = 0;

    double gp_signal_var = 1.0;
    double gp_length_scale = 0.15;
    double gp_noise_var = 1e-4;
};

struct BOHistoryEntry {
    int iter = 0;
    double lambda = 0.0;
    double reward_estimate = 0.0;
    double acquisition_value = 0.0; // 0 for the initial design
};

struct BOResult {
    double lambda_star = 0.0;
    double best_value = 0.0;
    std::vector<BOHistoryEntry> history;
};

/// 1D Bayesian optimization on [0,1]: uniform initial design, GP refit each
/// round, dense-grid acquisition line search (ties break toward the smallest
/// lambda), returns the argmax over observed values. Deterministic given the
/// seed.
BOResult bo_optimize(const std::function<double(double)>& objective, const BOConfig& config);

} // namespace dera
