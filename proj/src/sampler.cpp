#include "dera/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "dera/errors.hpp"
#include "dera/rng.hpp"

namespace dera {

namespace {

struct StepWorkspace {
    std::vector<double> eps_a; // unconditional / scratch
    std::vector<double> eps_b; // conditional / scratch
    detail::EpsWorkspace gmm_ws;
};

void cfg_eps_into(const GaussianMixture& cond, const GaussianMixture& uncond,
                  std::span<const double> x_t, double alpha_t, double sigma_t, double gamma,
                  std::span<double> out, StepWorkspace& ws) {
    if (gamma == 1.0) {
        detail::exact_eps_into(cond, x_t, alpha_t, sigma_t, out, ws.gmm_ws);
        return;
    }
    if (gamma == 0.0) {
        detail::exact_eps_into(uncond, x_t, alpha_t, sigma_t, out, ws.gmm_ws);
        return;
    }
    ws.eps_a.resize(x_t.size());
    ws.eps_b.resize(x_t.size());
    detail::exact_eps_into(uncond, x_t, alpha_t, sigma_t, ws.eps_a, ws.gmm_ws);
    detail::exact_eps_into(cond, x_t, alpha_t, sigma_t, ws.eps_b, ws.gmm_ws);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = ws.eps_a[i] + gamma * (ws.eps_b[i] - ws.eps_a[i]);
}

struct FamilyRef {
    const GaussianMixture* cond = nullptr;
    const GaussianMixture* uncond = nullptr;
};

FamilyRef resolve(const ModelFamily& family, std::optional<int> label) {
    return {&find_model(family, label), &find_model(family, std::nullopt)};
}

struct ChainModels {
    FamilyRef ref;
    std::vector<FamilyRef> aligned;   // empty for baseline runs
    std::vector<double> lambdas;      // one per aligned family
};

void check_finite(std::span<const double> x, int step_index) {
    for (double v : x)
        if (!std::isfinite(v)) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "sampler: non-finite latent at step index %d",
                          step_index);
            throw NumericFailure(buf);
        }
}

/// One full reverse trajectory for sample `index`; draws come from the
/// sample's own substream in fixed order (initial latent, then one z per
/// stochastic step), so endpoint runs are bitwise reproducible.
void run_one_sample(const ChainModels& models, const SamplerConfig& config,
                    const NoiseSchedule& schedule, const std::vector<StepPair>& steps,
                    int dim, std::uint64_t index, std::vector<double>& x,
                    std::vector<std::vector<double>>* trajectory, StepWorkspace& ws,
                    std::vector<double>& eps_buf, std::vector<double>& mu_ref,
                    std::vector<std::vector<double>>& mu_aligned,
                    std::vector<double>& var_buf) {
    RngStream rng(substream_seed(config.seed, index));
    x.resize(static_cast<std::size_t>(dim));
    for (auto& v : x) v = rng.normal();
    if (trajectory) trajectory->push_back(x);

    const std::size_t K = models.aligned.size();
    const double lambda_single = K == 1 ? models.lambdas[0] : 0.0;
    for (std::size_t si = 0; si < steps.size(); ++si) {
        const StepPair& step = steps[si];
        const double a_t = schedule.alpha(step.t);
        const double s_t = schedule.sigma(step.t);

        cfg_eps_into(*models.ref.cond, *models.ref.uncond, x, a_t, s_t,
                     config.guidance_scale, eps_buf, ws);
        const double var_ref = detail::posterior_into(x, eps_buf, step, schedule, mu_ref);

        double var_new = var_ref;
        if (K == 0) {
            x = mu_ref;
        } else if (K == 1) {
            cfg_eps_into(*models.aligned[0].cond, *models.aligned[0].uncond, x, a_t, s_t,
                         config.guidance_scale, eps_buf, ws);
            const double var_al =
                detail::posterior_into(x, eps_buf, step, schedule, mu_aligned[0]);
            const double l = lambda_single;
            if (l == 0.0) {
                x = mu_ref;
            } else if (l == 1.0) {
                x = mu_aligned[0];
                var_new = var_al;
            } else if (var_ref == 0.0 && var_al == 0.0) {
                // eta = 0: the equal-variance limit of the precision-weighted
                // mean is the plain convex combination
                for (std::size_t i = 0; i < x.size(); ++i)
                    x[i] = (1.0 - l) * mu_ref[i] + l * mu_aligned[0][i];
                var_new = 0.0;
            } else {
                const double prec = (1.0 - l) / var_ref + l / var_al;
                if (!(prec > 0.0)) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf),
                                  "sampler: non-positive precision at step index %d",
                                  static_cast<int>(si));
                    throw NonPositiveDefiniteError(buf);
                }
                var_new = 1.0 / prec;
                for (std::size_t i = 0; i < x.size(); ++i)
                    x[i] = var_new * ((1.0 - l) / var_ref * mu_ref[i] +
                                      l / var_al * mu_aligned[0][i]);
            }
        } else {
            double lambda_sum = 0.0;
            var_buf.resize(K);
            for (std::size_t k = 0; k < K; ++k) {
                cfg_eps_into(*models.aligned[k].cond, *models.aligned[k].uncond, x, a_t, s_t,
                             config.guidance_scale, eps_buf, ws);
                var_buf[k] =
                    detail::posterior_into(x, eps_buf, step, schedule, mu_aligned[k]);
                lambda_sum += models.lambdas[k];
            }
            const double lambda0 = 1.0 - lambda_sum;
            if (var_ref == 0.0) {
                for (std::size_t i = 0; i < x.size(); ++i) {
                    double acc = lambda0 * mu_ref[i];
                    for (std::size_t k = 0; k < K; ++k)
                        acc += models.lambdas[k] * mu_aligned[k][i];
                    x[i] = acc;
                }
                var_new = 0.0;
            } else {
                double prec = lambda0 / var_ref;
                for (std::size_t k = 0; k < K; ++k) prec += models.lambdas[k] / var_buf[k];
                if (!(prec > 0.0)) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf),
                                  "sampler: non-positive precision at step index %d",
                                  static_cast<int>(si));
                    throw NonPositiveDefiniteError(buf);
                }
                var_new = 1.0 / prec;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    double acc = lambda0 / var_ref * mu_ref[i];
                    for (std::size_t k = 0; k < K; ++k)
                        acc += models.lambdas[k] / var_buf[k] * mu_aligned[k][i];
                    x[i] = var_new * acc;
                }
            }
        }

        if (var_new > 0.0) {
            const double sd = std::sqrt(var_new);
            for (auto& v : x) v += sd * rng.normal();
        }
        check_finite(x, static_cast<int>(si));
        if (trajectory) trajectory->push_back(x);
    }
}

SampleBatch run_batch(const ChainModels& models, const SamplerConfig& config,
                      const NoiseSchedule& schedule, int threads) {
    if (config.batch_size < 1) throw ConfigError("sampler: batch_size must be >= 1");
    const int dim = models.ref.cond->dim;
    const auto steps = inference_steps(schedule, config.num_inference_steps, config.eta);

    SampleBatch batch;
    batch.dim = dim;
    batch.samples.resize(static_cast<std::size_t>(config.batch_size));
    batch.metadata.config = config;
    batch.metadata.schedule_kind = schedule.kind;
    if (config.record_trajectory)
        batch.trajectory.emplace(static_cast<std::size_t>(config.batch_size));

    auto worker = [&](int begin, int end) {
        StepWorkspace ws;
        std::vector<double> eps_buf(static_cast<std::size_t>(dim));
        std::vector<double> mu_ref(static_cast<std::size_t>(dim));
        std::vector<std::vector<double>> mu_aligned(
            models.aligned.size(), std::vector<double>(static_cast<std::size_t>(dim)));
        std::vector<double> var_buf(models.aligned.size());
        for (int i = begin; i < end; ++i) {
            auto* traj = batch.trajectory ? &(*batch.trajectory)[static_cast<std::size_t>(i)]
                                          : nullptr;
            run_one_sample(models, config, schedule, steps, dim,
                           static_cast<std::uint64_t>(i),
                           batch.samples[static_cast<std::size_t>(i)], traj, ws, eps_buf,
                           mu_ref, mu_aligned, var_buf);
        }
    };

    threads = std::max(1, std::min(threads, config.batch_size));
    if (threads == 1) {
        worker(0, config.batch_size);
    } else {
        // substreams are indexed by sample position, so chunking is free to vary
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        const int chunk = (config.batch_size + threads - 1) / threads;
        for (int tpos = 0; tpos < threads; ++tpos) {
            const int begin = tpos * chunk;
            const int end = std::min(config.batch_size, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&, begin, end] {
                try {
                    worker(begin, end);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }
    return batch;
}

} // namespace

std::vector<double> cfg_eps(const ModelFamily& family, std::span<const double> x_t, int t,
                            std::optional<int> label, double gamma,
                            const NoiseSchedule& schedule) {
    if (t < 1) throw IndexError("cfg_eps: need t >= 1");
    const auto fam = resolve(family, label);
    const auto [a, s] = forward_marginal(schedule, t);
    std::vector<double> out(x_t.size());
    StepWorkspace ws;
    cfg_eps_into(*fam.cond, *fam.uncond, x_t, a, s, gamma, out, ws);
    return out;
}

SampleBatch deradiff_sample(const ModelFamily& ref_family,
                            const std::vector<ModelFamily>& aligned_families,
                            const SamplerConfig& config, const NoiseSchedule& schedule,
                            std::optional<int> label, int threads) {
    if (aligned_families.empty())
        throw ConfigError("deradiff_sample: need at least one aligned family");
    if (config.lambda.lambdas.size() != aligned_families.size())
        throw ConfigError("deradiff_sample: one lambda per aligned family required");
    ChainModels models;
    models.ref = resolve(ref_family, label);
    for (const auto& fam : aligned_families) {
        models.aligned.push_back(resolve(fam, label));
        if (models.aligned.back().cond->dim != models.ref.cond->dim)
            throw ShapeError("deradiff_sample: families disagree on dimension");
    }
    models.lambdas = config.lambda.lambdas;
    auto batch = run_batch(models, config, schedule, threads);
    batch.metadata.ref_id = "reference";
    batch.metadata.aligned_id = "aligned";
    return batch;
}

SampleBatch deradiff_sample(const ModelFamily& ref_family, const ModelFamily& aligned_family,
                            const SamplerConfig& config, const NoiseSchedule& schedule,
                            std::optional<int> label, int threads) {
    return deradiff_sample(ref_family, std::vector<ModelFamily>{aligned_family}, config,
                           schedule, label, threads);
}

SampleBatch baseline_sample(const ModelFamily& family, const SamplerConfig& config,
                            const NoiseSchedule& schedule, std::optional<int> label,
                            int threads) {
    ChainModels models;
    models.ref = resolve(family, label);
    auto batch = run_batch(models, config, schedule, threads);
    batch.metadata.ref_id = "baseline";
    return batch;
}

} // namespace dera
