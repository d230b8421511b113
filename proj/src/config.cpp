#include "dera/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dera/errors.hpp"

namespace dera {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
    if (j.is_object()) return;
    std::string name = path;
    if (!name.empty() && name.back() == '.') name.pop_back();
    throw ConfigError("config: " + (name.empty() ? "root" : name) + " must be an object");
}

void reject_unknown_keys(const json& j, const std::string& path,
                         std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* name : allowed)
            if (key == name) ok = true;
        if (!ok) throw ConfigError("config: unknown key \"" + path + key + "\"");
    }
}

template <typename T>
T get_required(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key))
        throw ConfigError("config: missing required key \"" + path + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for \"" + path + key + "\": " + e.what());
    }
}

template <typename T>
T get_optional(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for \"" + path + key + "\": " + e.what());
    }
}

GaussianMixture parse_mixture(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, path, {"dim", "components"});
    for (const auto& jc : j.at("components"))
        reject_unknown_keys(jc, path + "components.", {"w", "mean", "var"});
    GaussianMixture g = j.get<GaussianMixture>();
    g.validate();
    return g;
}

RewardSpec parse_reward(const json& j, const std::string& path) {
    require_object(j, path);
    const auto type = get_required<std::string>(j, path, "type");
    if (type == "linear") {
        reject_unknown_keys(j, path, {"type", "a", "b"});
        LinearReward r;
        r.a = get_required<std::vector<double>>(j, path, "a");
        r.b = get_optional<double>(j, path, "b", 0.0);
        return RewardSpec{r};
    }
    if (type == "quadratic") {
        reject_unknown_keys(j, path, {"type", "curvature", "a", "b"});
        QuadraticReward r;
        r.curvature = get_required<std::vector<double>>(j, path, "curvature");
        r.a = get_required<std::vector<double>>(j, path, "a");
        r.b = get_optional<double>(j, path, "b", 0.0);
        return RewardSpec{r};
    }
    throw ConfigError("config: reward type must be linear or quadratic, got \"" + type + "\"");
}

ScheduleSpec parse_schedule(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, path, {"kind", "num_train_steps", "beta_min", "beta_max"});
    ScheduleSpec s;
    s.kind = schedule_kind_from_string(get_required<std::string>(j, path, "kind"));
    s.num_train_steps = get_required<int>(j, path, "num_train_steps");
    if (s.kind == ScheduleKind::linear_beta) {
        s.linear.beta_min = get_optional<double>(j, path, "beta_min", s.linear.beta_min);
        s.linear.beta_max = get_optional<double>(j, path, "beta_max", s.linear.beta_max);
    } else if (j.contains("beta_min") || j.contains("beta_max")) {
        throw ConfigError("config: beta_min/beta_max apply to linear_beta schedules only");
    }
    return s;
}

SamplerConfig parse_sampler(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, path,
                        {"num_inference_steps", "guidance_scale", "lambda", "eta", "seed",
                         "batch_size", "record_trajectory"});
    SamplerConfig s;
    s.num_inference_steps = get_required<int>(j, path, "num_inference_steps");
    s.guidance_scale = get_optional<double>(j, path, "guidance_scale", 1.0);
    if (j.contains("lambda")) {
        const auto& jl = j.at("lambda");
        if (jl.is_array())
            s.lambda.lambdas = jl.get<std::vector<double>>();
        else
            s.lambda.lambdas = {jl.get<double>()};
    }
    s.eta = get_optional<double>(j, path, "eta", 1.0);
    if (!j.contains("seed"))
        throw ConfigError("config: " + path + "seed is required (no wall-clock entropy)");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.batch_size = get_required<int>(j, path, "batch_size");
    s.record_trajectory = get_optional<bool>(j, path, "record_trajectory", false);
    return s;
}

EvalSpec parse_eval(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, path, {"metrics", "distance_subsample", "bootstrap_resamples"});
    EvalSpec e;
    e.metrics = get_optional<std::vector<std::string>>(j, path, "metrics", e.metrics);
    for (const auto& m : e.metrics)
        if (m != "reward_mean" && m != "wasserstein_1d" && m != "energy_distance")
            throw ConfigError("config: unknown eval metric \"" + m + "\"");
    if (e.metrics.empty()) throw ConfigError("config: eval.metrics must be nonempty");
    e.distance_subsample =
        get_optional<std::size_t>(j, path, "distance_subsample", e.distance_subsample);
    e.bootstrap_resamples =
        get_optional<int>(j, path, "bootstrap_resamples", e.bootstrap_resamples);
    return e;
}

BOConfig parse_bo(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, path,
                        {"budget", "initial_design", "acquisition", "ucb_delta", "grid_points",
                         "batch_per_eval", "seed", "signal_var", "length_scale", "noise_var"});
    BOConfig b;
    b.budget = get_optional<int>(j, path, "budget", b.budget);
    b.initial_design = get_optional<int>(j, path, "initial_design", b.initial_design);
    const auto acq = get_optional<std::string>(j, path, "acquisition", "ei");
    if (acq == "ei")
        b.acquisition = Acquisition::ei;
    else if (acq == "ucb")
        b.acquisition = Acquisition::ucb;
    else
        throw ConfigError("config: acquisition must be ei or ucb, got \"" + acq + "\"");
    b.ucb_delta = get_optional<double>(j, path, "ucb_delta", b.ucb_delta);
    b.grid_points = get_optional<int>(j, path, "grid_points", b.grid_points);
    b.batch_per_eval = get_optional<int>(j, path, "batch_per_eval", b.batch_per_eval);
    b.seed = get_optional<std::uint64_t>(j, path, "seed", b.seed);
    b.gp_signal_var = get_optional<double>(j, path, "signal_var", b.gp_signal_var);
    b.gp_length_scale = get_optional<double>(j, path, "length_scale", b.gp_length_scale);
    b.gp_noise_var = get_optional<double>(j, path, "noise_var", b.gp_noise_var);
    return b;
}

} // namespace

bool EvalSpec::wants(const std::string& metric) const {
    for (const auto& m : metrics)
        if (m == metric) return true;
    return false;
}

void ExperimentConfig::validate() const {
    data_mixture.validate();
    if (eval.wants("wasserstein_1d") && data_mixture.dim != 1)
        throw ConfigError("config: wasserstein_1d applies to 1D experiments only");
    if (anchor_betas.empty() || target_betas.empty())
        throw ConfigError("config: anchor_betas and target_betas must be nonempty");
    for (double b : anchor_betas)
        if (!(b > 0.0) || !std::isfinite(b))
            throw ConfigError("config: anchor betas must be finite and positive");
    for (double b : target_betas)
        if (!(b > 0.0) || !std::isfinite(b))
            throw ConfigError("config: target betas must be finite and positive");
    if (sampler.batch_size < 1) throw ConfigError("config: sampler.batch_size must be >= 1");
    if (!(sampler.eta >= 0.0 && sampler.eta <= 1.0))
        throw ConfigError("config: sampler.eta must lie in [0, 1]");
    if (schedule.num_train_steps % sampler.num_inference_steps != 0)
        throw ConfigError(
            "config: sampler.num_inference_steps must divide schedule.num_train_steps");
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line number for the error message
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError("config: JSON parse error at line " + std::to_string(line) + ": " +
                          e.what());
    }
    require_object(j, "");
    reject_unknown_keys(j, "",
                        {"data_mixture", "reward", "anchor_betas", "target_betas", "schedule",
                         "sampler", "eval", "bo", "output_dir"});

    ExperimentConfig c;
    if (!j.contains("data_mixture")) throw ConfigError("config: missing data_mixture");
    c.data_mixture = parse_mixture(j.at("data_mixture"), "data_mixture.");
    if (!j.contains("reward")) throw ConfigError("config: missing reward");
    c.reward = parse_reward(j.at("reward"), "reward.");
    c.anchor_betas = get_required<std::vector<double>>(j, "", "anchor_betas");
    c.target_betas = get_required<std::vector<double>>(j, "", "target_betas");
    if (!j.contains("schedule")) throw ConfigError("config: missing schedule");
    c.schedule = parse_schedule(j.at("schedule"), "schedule.");
    if (!j.contains("sampler")) throw ConfigError("config: missing sampler");
    c.sampler = parse_sampler(j.at("sampler"), "sampler.");
    if (j.contains("eval")) c.eval = parse_eval(j.at("eval"), "eval.");
    if (j.contains("bo")) c.bo = parse_bo(j.at("bo"), "bo.");
    c.output_dir = get_optional<std::string>(j, "", "output_dir", c.output_dir);
    c.validate();
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    json j;
    j["data_mixture"] = config.data_mixture;

    json jr;
    if (const auto* lin = std::get_if<LinearReward>(&config.reward.reward)) {
        jr = {{"type", "linear"}, {"a", lin->a}, {"b", lin->b}};
    } else if (const auto* quad = std::get_if<QuadraticReward>(&config.reward.reward)) {
        jr = {{"type", "quadratic"},
              {"curvature", quad->curvature},
              {"a", quad->a},
              {"b", quad->b}};
    } else {
        jr = {{"type", "blackbox"}};
    }
    j["reward"] = jr;

    j["anchor_betas"] = config.anchor_betas;
    j["target_betas"] = config.target_betas;
    j["schedule"] = {{"kind", to_string(config.schedule.kind)},
                     {"num_train_steps", config.schedule.num_train_steps}};
    if (config.schedule.kind == ScheduleKind::linear_beta) {
        j["schedule"]["beta_min"] = config.schedule.linear.beta_min;
        j["schedule"]["beta_max"] = config.schedule.linear.beta_max;
    }
    j["sampler"] = {{"num_inference_steps", config.sampler.num_inference_steps},
                    {"guidance_scale", config.sampler.guidance_scale},
                    {"lambda", config.sampler.lambda.lambdas},
                    {"eta", config.sampler.eta},
                    {"seed", config.sampler.seed},
                    {"batch_size", config.sampler.batch_size},
                    {"record_trajectory", config.sampler.record_trajectory}};
    j["eval"] = {{"metrics", config.eval.metrics},
                 {"distance_subsample", config.eval.distance_subsample},
                 {"bootstrap_resamples", config.eval.bootstrap_resamples}};
    j["bo"] = {{"budget", config.bo.budget},
               {"initial_design", config.bo.initial_design},
               {"acquisition", config.bo.acquisition == Acquisition::ei ? "ei" : "ucb"},
               {"ucb_delta", config.bo.ucb_delta},
               {"grid_points", config.bo.grid_points},
               {"batch_per_eval", config.bo.batch_per_eval},
               {"seed", config.bo.seed},
               {"signal_var", config.bo.gp_signal_var},
               {"length_scale", config.bo.gp_length_scale},
               {"noise_var", config.bo.gp_noise_var}};
    j["output_dir"] = config.output_dir;
    return j;
}

} // namespace dera
