#include "dera/lambda_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dera/errors.hpp"
#include "dera/rng.hpp"

namespace dera {

double rbf_kernel(double a, double b, double signal_var, double length_scale) {
    if (!(signal_var > 0.0) || !(length_scale > 0.0))
        throw ConfigError("rbf_kernel: hyperparameters must be positive");
    const double d = a - b;
    return signal_var * std::exp(-d * d / (2.0 * length_scale * length_scale));
}

void GPModel::fit(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.empty())
        throw ConfigError("GPModel::fit: need matching, nonempty observations");
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            K(i, j) = rbf_kernel(xs[static_cast<std::size_t>(i)],
                                 xs[static_cast<std::size_t>(j)], signal_var, length_scale);
    K.diagonal().array() += noise_var;

    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw NumericFailure("GPModel::fit: kernel matrix is not positive definite");

    xs_.assign(xs.begin(), xs.end());
    ys_.assign(ys.begin(), ys.end());
    Eigen::MatrixXd L = llt.matrixL();
    chol_.assign(L.data(), L.data() + n * n); // column major
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
    Eigen::VectorXd a = llt.solve(y);
    alpha_.assign(a.data(), a.data() + n);
}

std::pair<double, double> gp_posterior(const GPModel& gp, double query) {
    const auto n = static_cast<Eigen::Index>(gp.xs_.size());
    if (n == 0) throw ConfigError("gp_posterior: model has no observations");
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i)
        k(i) = rbf_kernel(query, gp.xs_[static_cast<std::size_t>(i)], gp.signal_var,
                          gp.length_scale);
    const Eigen::Map<const Eigen::VectorXd> alpha(gp.alpha_.data(), n);
    const double mean = k.dot(alpha);

    const Eigen::Map<const Eigen::MatrixXd> L(gp.chol_.data(), n, n);
    Eigen::VectorXd v =
        L.triangularView<Eigen::Lower>().solve(k); // L v = k
    const double var = gp.signal_var - v.squaredNorm();
    return {mean, std::max(var, 0.0)};
}

namespace {
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
} // namespace

double expected_improvement(double mean, double std, double f_best) {
    if (std < 0.0) throw ConfigError("expected_improvement: std must be >= 0");
    if (std == 0.0) return std::max(mean - f_best, 0.0);
    const double z = (mean - f_best) / std;
    return (mean - f_best) * normal_cdf(z) + std * normal_pdf(z);
}

double ucb(double mean, double std, int n, double delta) {
    if (n < 1) throw ConfigError("ucb: n must be >= 1");
    if (!(delta > 0.0)) throw ConfigError("ucb: delta must be positive");
    const double arg = static_cast<double>(n) * n * M_PI * M_PI / (6.0 * delta);
    if (arg < 1.0) throw ConfigError("ucb: delta too large for a real exploration bonus");
    return mean + std::sqrt(2.0 * std::log(arg)) * std;
}

BOResult bo_optimize(const std::function<double(double)>& objective, const BOConfig& config) {
    if (config.initial_design < 1 || config.initial_design >= config.budget)
        throw ConfigError("bo_optimize: need 1 <= n0 < T");
    if (config.grid_points < 101) throw ConfigError("bo_optimize: grid resolution >= 101");

    auto evaluate = [&](double lambda) {
        try {
            return objective(lambda);
        } catch (const std::exception& e) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), " (at lambda = %.6g)", lambda);
            throw std::runtime_error(std::string(e.what()) + buf);
        }
    };

    BOResult result;
    std::vector<double> xs, ys;
    RngStream rng(substream_seed(config.seed, 0));
    for (int i = 0; i < config.initial_design; ++i) {
        const double lambda = rng.uniform();
        const double value = evaluate(lambda);
        xs.push_back(lambda);
        ys.push_back(value);
        result.history.push_back({i + 1, lambda, value, 0.0});
    }

    GPModel gp;
    gp.signal_var = config.gp_signal_var;
    gp.length_scale = config.gp_length_scale;
    gp.noise_var = config.gp_noise_var;

    for (int iter = config.initial_design; iter < config.budget; ++iter) {
        gp.fit(xs, ys);
        const double f_best = *std::max_element(ys.begin(), ys.end());
        const int n_evals = static_cast<int>(ys.size());

        double best_lambda = 0.0;
        double best_acq = -std::numeric_limits<double>::infinity();
        for (int g = 0; g < config.grid_points; ++g) {
            const double lambda = static_cast<double>(g) / (config.grid_points - 1);
            const auto [mean, var] = gp_posterior(gp, lambda);
            const double sd = std::sqrt(var);
            const double acq = config.acquisition == Acquisition::ei
                                   ? expected_improvement(mean, sd, f_best)
                                   : ucb(mean, sd, n_evals, config.ucb_delta);
            if (acq > best_acq) { // strict: ties keep the smallest lambda
                best_acq = acq;
                best_lambda = lambda;
            }
        }

        const double value = evaluate(best_lambda);
        xs.push_back(best_lambda);
        ys.push_back(value);
        result.history.push_back({iter + 1, best_lambda, value, best_acq});
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < ys.size(); ++i)
        if (ys[i] > ys[best]) best = i;
    result.lambda_star = xs[best];
    result.best_value = ys[best];
    return result;
}

} // namespace dera
