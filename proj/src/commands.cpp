#include "dera/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "dera/csv.hpp"
#include "dera/errors.hpp"
#include "dera/eval.hpp"
#include "dera/realign.hpp"
#include "dera/rng.hpp"

namespace dera {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::ofstream open_output(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir);
    const fs::path path = fs::path(out_dir) / name;
    std::ofstream out(path, std::ios::binary); // '\n' only, byte-stable reruns
    if (!out) throw ConfigError("cannot open output file " + path.string());
    return out;
}

void write_config_comment(std::ofstream& out, const ExperimentConfig& config) {
    out << "# config " << config_to_json(config).dump() << "\n";
}

std::vector<std::vector<double>> exact_model_samples(const GaussianMixture& model, int n,
                                                     std::uint64_t seed) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
    RngStream rng(seed);
    for (auto& x : out) x = model.sample(rng);
    return out;
}

std::vector<double> flatten_1d(const std::vector<std::vector<double>>& samples) {
    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i][0];
    return out;
}

struct SweepCell {
    std::string metric;
    double anchor = 0.0, target = 0.0, lambda = 0.0;
    double actual = 0.0;
    double approximated = 0.0;
    bool ok = true;
    std::string status = "ok";
};

std::string pct_field(const SweepCell& c) {
    if (!c.ok) return "";
    const double denom = std::abs(c.actual);
    if (denom == 0.0) return c.approximated == c.actual ? "0" : "inf";
    return fmt_double(std::abs(c.approximated - c.actual) / denom * 100.0, 12);
}

// distinct substream tags for the independent random uses of the sweep
constexpr std::uint64_t kExactSampleTag = 0x9000000000000000ULL;
constexpr std::uint64_t kBootstrapTag = 0xb000000000000000ULL;

} // namespace

int cmd_sweep(const ExperimentConfig& config, const std::string& out_dir, int threads,
              std::ostream& log) {
    config.validate();
    const NoiseSchedule schedule = config.schedule.build();
    const ModelFamily ref = make_conditional_family({config.data_mixture}, {{1.0}});

    struct TargetData {
        ModelFamily family;
        std::vector<std::vector<double>> baseline;
        std::vector<std::vector<double>> exact;
        double reward_actual = 0.0;
        double w1_actual = 0.0;
        double ed_actual = 0.0;
    };

    const bool want_reward = config.eval.wants("reward_mean");
    const bool want_w1 = config.eval.wants("wasserstein_1d");
    const bool want_ed = config.eval.wants("energy_distance");

    std::vector<TargetData> targets(config.target_betas.size());
    for (std::size_t ti = 0; ti < config.target_betas.size(); ++ti) {
        const double beta = config.target_betas[ti];
        auto& td = targets[ti];
        td.family = tilt_family(ref, config.reward, 1.0 / beta);
        SamplerConfig sc = config.sampler;
        td.baseline = baseline_sample(td.family, sc, schedule, std::nullopt, threads).samples;
        if (want_w1 || want_ed)
            td.exact = exact_model_samples(find_model(td.family, std::nullopt),
                                           config.sampler.batch_size,
                                           substream_seed(config.sampler.seed ^ kExactSampleTag,
                                                          ti));
        if (want_reward) td.reward_actual = mc_reward_mean(td.baseline, config.reward).first;
        if (want_ed)
            td.ed_actual =
                energy_distance(td.baseline, td.exact, config.eval.distance_subsample);
        if (want_w1)
            td.w1_actual = wasserstein_1d(flatten_1d(td.baseline), flatten_1d(td.exact));
    }

    std::vector<SweepCell> cells;
    PairedMetrics reward_pairs;
    for (std::size_t ai = 0; ai < config.anchor_betas.size(); ++ai) {
        const double anchor = config.anchor_betas[ai];
        const ModelFamily anchor_family = tilt_family(ref, config.reward, 1.0 / anchor);
        for (std::size_t ti = 0; ti < config.target_betas.size(); ++ti) {
            const double target = config.target_betas[ti];
            const double lambda = anchor / target;
            const auto& td = targets[ti];

            SweepCell reward_cell{"reward_mean", anchor, target, lambda, td.reward_actual};
            SweepCell w1_cell{"wasserstein_1d", anchor, target, lambda, td.w1_actual};
            SweepCell ed_cell{"energy_distance", anchor, target, lambda, td.ed_actual};
            try {
                SamplerConfig sc = config.sampler;
                sc.lambda.lambdas = {lambda};
                const auto batch =
                    deradiff_sample(ref, anchor_family, sc, schedule, std::nullopt, threads);
                if (want_reward) {
                    reward_cell.approximated =
                        mc_reward_mean(batch.samples, config.reward).first;
                    reward_pairs.rows.push_back({anchor, target, lambda, reward_cell.actual,
                                                 reward_cell.approximated});
                }
                if (want_ed)
                    ed_cell.approximated = energy_distance(batch.samples, td.exact,
                                                           config.eval.distance_subsample);
                if (want_w1)
                    w1_cell.approximated =
                        wasserstein_1d(flatten_1d(batch.samples), flatten_1d(td.exact));
            } catch (const NonPositiveDefiniteError& e) {
                // lambda > 1 cells may fail positivity; keep the sweep going
                for (SweepCell* cell : {&reward_cell, &w1_cell, &ed_cell}) {
                    cell->ok = false;
                    cell->status = e.what();
                }
                log << "sweep: cell (" << anchor << " -> " << target
                    << ") failed: " << e.what() << "\n";
            } catch (const NumericFailure& e) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), " in sweep cell (anchor %g, target %g)",
                              anchor, target);
                throw NumericFailure(std::string(e.what()) + buf);
            }
            if (want_reward) cells.push_back(std::move(reward_cell));
            if (want_w1) cells.push_back(std::move(w1_cell));
            if (want_ed) cells.push_back(std::move(ed_cell));
        }
    }

    auto csv = open_output(out_dir, "sweep.csv");
    write_config_comment(csv, config);
    csv << "metric,anchor_beta,target_beta,lambda,actual,approximated,abs_diff_pct,status\n";
    for (const auto& c : cells) {
        csv << csv_escape(c.metric) << ',' << fmt_double(c.anchor, 12) << ','
            << fmt_double(c.target, 12) << ',' << fmt_double(c.lambda, 12) << ','
            << fmt_double(c.actual) << ',' << (c.ok ? fmt_double(c.approximated) : "") << ','
            << pct_field(c) << ',' << csv_escape(c.status) << "\n";
    }

    json summary;
    summary["config"] = config_to_json(config);
    if (reward_pairs.rows.size() >= 2) {
        SummaryStats stats = summarize(reward_pairs);
        const auto ci = bootstrap_mae_ci(reward_pairs, config.eval.bootstrap_resamples,
                                         config.sampler.seed ^ kBootstrapTag);
        stats.mae_ci_lo = ci.lo;
        stats.mae_ci_hi = ci.hi;
        double actual_mean = 0.0;
        for (const auto& r : reward_pairs.rows) actual_mean += r.actual;
        actual_mean /= static_cast<double>(reward_pairs.rows.size());
        summary["reward_mean_stats"] = {
            {"n", stats.n},
            {"mae", stats.mae},
            {"mae_ci_lo", stats.mae_ci_lo},
            {"mae_ci_hi", stats.mae_ci_hi},
            {"mae_boot_mean", ci.boot_mean},
            {"rmse", stats.rmse},
            {"median_abs", stats.median_abs},
            {"ba_mean_diff", stats.ba_mean_diff},
            {"ba_sd", stats.ba_sd},
            {"loa_lo", stats.loa_lo},
            {"loa_hi", stats.loa_hi},
            {"mean_actual", actual_mean},
            {"mae_pct_of_mean_actual",
             actual_mean != 0.0 ? stats.mae / std::abs(actual_mean) * 100.0 : 0.0}};
    }
    auto js = open_output(out_dir, "sweep_summary.json");
    js << summary.dump(2) << "\n";

    log << "sweep: wrote " << cells.size() << " cells to " << out_dir << "\n";
    return 0;
}

int cmd_bo(const ExperimentConfig& config, const std::string& out_dir, int threads,
           std::ostream& log) {
    config.validate();
    const NoiseSchedule schedule = config.schedule.build();
    const ModelFamily ref = make_conditional_family({config.data_mixture}, {{1.0}});
    const double anchor = config.anchor_betas.front();
    const ModelFamily anchor_family = tilt_family(ref, config.reward, 1.0 / anchor);

    int eval_counter = 0;
    auto objective = [&](double lambda) {
        SamplerConfig sc = config.sampler;
        sc.batch_size = config.bo.batch_per_eval;
        sc.lambda.lambdas = {lambda};
        sc.seed = substream_seed(config.bo.seed, 0x0b0ULL + static_cast<std::uint64_t>(
                                                                 eval_counter++));
        const auto batch =
            deradiff_sample(ref, anchor_family, sc, schedule, std::nullopt, threads);
        return mc_reward_mean(batch.samples, config.reward).first;
    };

    const BOResult result = bo_optimize(objective, config.bo);

    auto csv = open_output(out_dir, "bo_history.csv");
    write_config_comment(csv, config);
    csv << "iter,lambda,reward_estimate,acquisition_value\n";
    for (const auto& h : result.history)
        csv << h.iter << ',' << fmt_double(h.lambda) << ',' << fmt_double(h.reward_estimate)
            << ',' << fmt_double(h.acquisition_value) << "\n";

    json jr;
    jr["config"] = config_to_json(config);
    jr["lambda_star"] = result.lambda_star;
    jr["best_value"] = result.best_value;
    jr["evaluations"] = result.history.size();
    auto js = open_output(out_dir, "bo_result.json");
    js << jr.dump(2) << "\n";

    log << "bo: lambda* = " << result.lambda_star << " (best estimate " << result.best_value
        << ")\n";
    return 0;
}

int cmd_oracle_check(const OracleCheckParams& params, const std::string& out_dir,
                     std::ostream& log) {
    RngStream rng(params.seed);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

    struct Row {
        double mu_closed, var_closed, mu_oracle, var_oracle, rel_err;
    };
    std::vector<Row> rows;
    double worst = 0.0;
    int failures = 0;

    for (int i = 0; i < params.n_tuples; ++i) {
        PosteriorGaussian p1 = make_isotropic({draw(-5.0, 5.0)}, draw(0.1, 5.0));
        PosteriorGaussian p2 = make_isotropic({draw(-5.0, 5.0)}, draw(0.1, 5.0));
        const double lambda = draw(0.0, 1.0);

        const PosteriorGaussian closed = geometric_interpolate(p1, p2, lambda);
        const double sd_max = std::sqrt(std::max(p1.var[0], p2.var[0]));
        GridSpec grid;
        grid.lo = std::min(p1.mean[0], p2.mean[0]) - params.half_span_sigmas * sd_max;
        grid.hi = std::max(p1.mean[0], p2.mean[0]) + params.half_span_sigmas * sd_max;
        grid.n_points = params.grid_points;
        const GridMoments oracle = grid_normalize_oracle(p1, p2, lambda, grid);

        // means are compared on the distribution's own scale so near-zero
        // means do not blow up the ratio
        const double mu_scale = std::max(std::abs(closed.mean[0]), std::sqrt(closed.var[0]));
        const double err_mu = std::abs(closed.mean[0] - oracle.mean) / mu_scale;
        const double err_var = std::abs(closed.var[0] - oracle.var) / closed.var[0];
        const double err = std::max(err_mu, err_var);
        worst = std::max(worst, err);
        if (err > params.tolerance) {
            ++failures;
            log << "oracle-check: tuple " << i << " exceeds tolerance: rel_err = " << err
                << " (mu1 " << p1.mean[0] << ", mu2 " << p2.mean[0] << ", var1 " << p1.var[0]
                << ", var2 " << p2.var[0] << ", lambda " << lambda << ")\n";
        }
        rows.push_back({closed.mean[0], closed.var[0], oracle.mean, oracle.var, err});
    }

    // tilt composition: tilt(tilt(g,r,u),r,v) == tilt(g,r,u+v) component-wise
    double worst_comp = 0.0;
    for (int i = 0; i < params.composition_checks; ++i) {
        GaussianMixture g;
        g.dim = 1;
        const int K = 1 + static_cast<int>(rng.uniform() * 3.0);
        std::vector<double> w(static_cast<std::size_t>(K));
        double total = 0.0;
        for (auto& v : w) {
            v = 0.1 + rng.uniform();
            total += v;
        }
        for (int k = 0; k < K; ++k)
            g.components.push_back(
                {w[static_cast<std::size_t>(k)] / total, {draw(-3.0, 3.0)}, {draw(0.2, 3.0)}});
        const bool quadratic = rng.uniform() < 0.5;
        RewardSpec reward;
        if (quadratic)
            reward.reward = QuadraticReward{{draw(-0.5, 0.2)}, {draw(-1.5, 1.5)}, 0.0};
        else
            reward.reward = LinearReward{{draw(-1.5, 1.5)}, 0.0};
        const double u = draw(0.0, 1.0), v = draw(0.0, 1.0);

        const GaussianMixture two_step = tilt(tilt(g, reward, u), reward, v);
        const GaussianMixture one_step = tilt(g, reward, u + v);
        for (std::size_t k = 0; k < two_step.components.size(); ++k) {
            const auto& a = two_step.components[k];
            const auto& b = one_step.components[k];
            worst_comp = std::max(worst_comp, std::abs(a.weight - b.weight));
            for (std::size_t d = 0; d < a.mean.size(); ++d)
                worst_comp = std::max(worst_comp, std::abs(a.mean[d] - b.mean[d]));
            for (std::size_t d = 0; d < a.var.size(); ++d)
                worst_comp = std::max(worst_comp, std::abs(a.var[d] - b.var[d]));
        }
    }

    if (!out_dir.empty()) {
        auto csv = open_output(out_dir, "oracle_check.csv");
        csv << "mu_closed,var_closed,mu_oracle,var_oracle,rel_err\n";
        for (const auto& r : rows)
            csv << fmt_double(r.mu_closed) << ',' << fmt_double(r.var_closed) << ','
                << fmt_double(r.mu_oracle) << ',' << fmt_double(r.var_oracle) << ','
                << fmt_double(r.rel_err) << "\n";
    }

    const bool comp_ok = worst_comp <= params.composition_tolerance;
    log << "oracle-check: " << params.n_tuples << " tuples, max rel err = " << worst
        << " (tolerance " << params.tolerance << ")\n";
    log << "oracle-check: tilt composition max abs err = " << worst_comp << " (tolerance "
        << params.composition_tolerance << ")\n";
    if (failures > 0 || !comp_ok) {
        log << "oracle-check: FAIL\n";
        return 1;
    }
    log << "oracle-check: PASS\n";
    return 0;
}

int cmd_sample(const ExperimentConfig& config, const std::string& out_dir, int threads,
               std::ostream& log) {
    config.validate();
    const NoiseSchedule schedule = config.schedule.build();
    const ModelFamily ref = make_conditional_family({config.data_mixture}, {{1.0}});
    const double anchor = config.anchor_betas.front();
    const ModelFamily anchor_family = tilt_family(ref, config.reward, 1.0 / anchor);

    const SampleBatch batch =
        deradiff_sample(ref, anchor_family, config.sampler, schedule, std::nullopt, threads);

    auto ladder = open_output(out_dir, "schedule.csv");
    dump_csv(schedule, ladder);

    auto csv = open_output(out_dir, "samples.csv");
    write_config_comment(csv, config);
    for (int d = 0; d < batch.dim; ++d) csv << (d ? "," : "") << "x_" << d;
    csv << "\n";
    for (const auto& x : batch.samples) {
        for (std::size_t d = 0; d < x.size(); ++d) csv << (d ? "," : "") << fmt_double(x[d]);
        csv << "\n";
    }

    json jb;
    jb["config"] = config_to_json(config);
    jb["dim"] = batch.dim;
    jb["schedule_kind"] = to_string(batch.metadata.schedule_kind);
    jb["samples"] = batch.samples;
    auto js = open_output(out_dir, "samples.json");
    js << jb.dump(2) << "\n";

    if (batch.trajectory) {
        auto traj = open_output(out_dir, "trajectory.csv");
        write_config_comment(traj, config);
        traj << "sample,step";
        for (int d = 0; d < batch.dim; ++d) traj << ",x_" << d;
        traj << "\n";
        for (std::size_t i = 0; i < batch.trajectory->size(); ++i)
            for (std::size_t s = 0; s < (*batch.trajectory)[i].size(); ++s) {
                traj << i << ',' << s;
                for (double v : (*batch.trajectory)[i][s]) traj << ',' << fmt_double(v);
                traj << "\n";
            }
    }

    log << "sample: wrote " << batch.samples.size() << " samples to " << out_dir << "\n";
    return 0;
}

} // namespace dera
