#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dera/mixture.hpp"
#include "dera/realign.hpp"
#include "dera/schedule.hpp"

namespace dera {

struct SamplerConfig {
    int num_inference_steps = 50;        // N, must divide the schedule's T
    double guidance_scale = 1.0;         // gamma
    RealignWeights lambda{{1.0}};        // one entry per aligned family
    double eta = 1.0;
    std::uint64_t seed = 0;
    int batch_size = 1;
    bool record_trajectory = false;
};

struct SampleBatch {
    int dim = 0;
    std::vector<std::vector<double>> samples;               // batch_size x dim
    // per-sample latents x_{t_N} .. x_{t_0} (N+1 entries) when recorded
    std::optional<std::vector<std::vector<std::vector<double>>>> trajectory;

    struct Metadata {
        SamplerConfig config;
        ScheduleKind schedule_kind = ScheduleKind::linear_beta;
        std::string ref_id;
        std::string aligned_id;
    } metadata;
};

/// Classifier-free guidance noise prediction:
/// eps_uncond + gamma (eps_cond - eps_uncond), collapsing exactly to the
/// conditional (gamma = 1) or unconditional (gamma = 0) prediction.
std::vector<double> cfg_eps(const ModelFamily& family, std::span<const double> x_t, int t,
                            std::optional<int> label, double gamma,
                            const NoiseSchedule& schedule);

/// Realigned ancestral sampling: per step, CFG predictions for the reference
/// and each aligned family, scheduler posteriors, geometric interpolation,
/// then x <- mu_new + z sqrt(var_new). lambda = 0 / lambda = 1 are bitwise
/// identical to the corresponding baseline_sample run under a shared seed.
SampleBatch deradiff_sample(const ModelFamily& ref_family,
                            const std::vector<ModelFamily>& aligned_families,
                            const SamplerConfig& config, const NoiseSchedule& schedule,
                            std::optional<int> label, int threads = 1);

/// Single-family convenience overload (the K = 1 case).
SampleBatch deradiff_sample(const ModelFamily& ref_family, const ModelFamily& aligned_family,
                            const SamplerConfig& config, const NoiseSchedule& schedule,
                            std::optional<int> label, int threads = 1);

/// Plain ancestral sampling of one family (the from-scratch comparator).
SampleBatch baseline_sample(const ModelFamily& family, const SamplerConfig& config,
                            const NoiseSchedule& schedule, std::optional<int> label,
                            int threads = 1);

} // namespace dera
