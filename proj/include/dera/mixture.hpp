#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dera/rng.hpp"
#include "dera/schedule.hpp"

namespace dera {

/// Mixture component with isotropic (single entry) or diagonal (dim entries)
/// variance. Weights live in linear space on the type; all tilting and
/// responsibility arithmetic is done in the log domain.
struct GaussianComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> var{1.0};

    double var_at(std::size_t i) const { return var.size() == 1 ? var[0] : var[i]; }
};

struct GaussianMixture {
    int dim = 1;
    std::vector<GaussianComponent> components;

    void validate() const;
    double log_density(std::span<const double> x) const;
    std::vector<double> sample(RngStream& rng) const;
};

void to_json(nlohmann::json& j, const GaussianMixture& g);
void from_json(const nlohmann::json& j, GaussianMixture& g);

struct LinearReward {
    std::vector<double> a;
    double b = 0.0;
};

/// r(x) = 1/2 sum_i curvature_i x_i^2 + a.x + b
struct QuadraticReward {
    std::vector<double> curvature;
    std::vector<double> a;
    double b = 0.0;
};

/// Evaluation-only reward for black-box lambda optimization.
struct BlackboxReward {
    std::function<double(std::span<const double>)> fn;
};

struct RewardSpec {
    std::variant<LinearReward, QuadraticReward, BlackboxReward> reward;

    bool is_blackbox() const { return std::holds_alternative<BlackboxReward>(reward); }
    double evaluate(std::span<const double> x) const;
};

/// VP forward marginal of a mixture at time t: means scaled by alpha_t,
/// variances alpha_t^2 s^2 + sigma_t^2.
GaussianMixture noised_marginal(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                                int t);

/// Exact E[eps | x_t] for the mixture: posterior responsibilities of the
/// noised mixture give E[x_0 | x_t], then eps = (x_t - alpha_t E[x_0|x_t]) / sigma_t.
std::vector<double> exact_eps(const GaussianMixture& gmm, std::span<const double> x_t,
                              int t, const NoiseSchedule& schedule);

/// Exact normalized tilt p(x) exp(r(x) * inv_beta) for linear and quadratic
/// rewards. Throws NonNormalizableTiltError when a quadratic curvature
/// overwhelms a component precision.
GaussianMixture tilt(const GaussianMixture& gmm, const RewardSpec& reward, double inv_beta);

/// Closed-form E[r(x)] under the mixture (linear/quadratic rewards only).
double reward_expectation(const GaussianMixture& gmm, const RewardSpec& reward);

/// A class-conditional model; label nullopt is the unconditional entry.
struct ConditionedModel {
    std::optional<int> label;
    GaussianMixture model;
};

using ModelFamily = std::vector<ConditionedModel>;

/// Builds per-class entries labelled 0..K-1 plus the prior-weighted
/// unconditional mixture as the null-label entry.
ModelFamily make_conditional_family(std::vector<GaussianMixture> class_models,
                                    std::span<const double> priors);

const GaussianMixture& find_model(const ModelFamily& family, std::optional<int> label);

/// Tilts every entry of the family with the same reward; the exact analog of
/// aligning the conditional and unconditional branches jointly.
ModelFamily tilt_family(const ModelFamily& family, const RewardSpec& reward, double inv_beta);

namespace detail {
struct EpsWorkspace {
    std::vector<double> logw;
};
void exact_eps_into(const GaussianMixture& gmm, std::span<const double> x_t, double alpha_t,
                    double sigma_t, std::span<double> out, EpsWorkspace& ws);
} // namespace detail

} // namespace dera
