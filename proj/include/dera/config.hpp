#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dera/lambda_opt.hpp"
#include "dera/mixture.hpp"
#include "dera/sampler.hpp"
#include "dera/schedule.hpp"

namespace dera {

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::linear_beta;
    int num_train_steps = 1000;
    LinearBetaParams linear;

    NoiseSchedule build() const { return make_schedule(kind, num_train_steps, linear); }
};

struct EvalSpec {
    std::vector<std::string> metrics{"reward_mean", "wasserstein_1d", "energy_distance"};
    std::size_t distance_subsample = 20000;
    int bootstrap_resamples = 2000;

    bool wants(const std::string& metric) const;
};

/// Fully resolved experiment description. All randomness flows from the seeds
/// recorded here; nothing is drawn from the environment.
struct ExperimentConfig {
    GaussianMixture data_mixture;
    RewardSpec reward;
    std::vector<double> anchor_betas;
    std::vector<double> target_betas;
    ScheduleSpec schedule;
    SamplerConfig sampler;
    EvalSpec eval;
    BOConfig bo;
    std::string output_dir = "out";

    void validate() const;
};

/// Parses the strict-JSON config format. Unknown keys anywhere are hard
/// errors; messages carry the line of the offending construct where known.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// The resolved config re-serialized (sorted keys); embedded in every output
/// file so runs are self-describing.
nlohmann::json config_to_json(const ExperimentConfig& config);

} // namespace dera
