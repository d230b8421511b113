#include "dera/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dera/errors.hpp"

namespace dera {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void GaussianMixture::validate() const {
    if (dim < 1) throw ShapeError("mixture: dim must be >= 1");
    if (components.empty()) throw ShapeError("mixture: no components");
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != static_cast<std::size_t>(dim))
            throw ShapeError("mixture: component mean has wrong dimension");
        if (c.var.size() != 1 && c.var.size() != static_cast<std::size_t>(dim))
            throw ShapeError("mixture: component variance must be scalar or one per coordinate");
        for (double v : c.var)
            if (!(v > 0.0)) throw ConfigError("mixture: component variance must be positive");
        if (!(c.weight > 0.0)) throw ConfigError("mixture: component weight must be positive");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("mixture: weights must sum to 1 within 1e-12");
}

double GaussianMixture::log_density(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(dim))
        throw ShapeError("log_density: dimension mismatch");
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> lw(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        double l = std::log(c.weight);
        for (int i = 0; i < dim; ++i) {
            const double v = c.var_at(static_cast<std::size_t>(i));
            const double d = x[static_cast<std::size_t>(i)] - c.mean[static_cast<std::size_t>(i)];
            l -= 0.5 * (kLog2Pi + std::log(v) + d * d / v);
        }
        lw[k] = l;
        best = std::max(best, l);
    }
    double acc = 0.0;
    for (double l : lw) acc += std::exp(l - best);
    return best + std::log(acc);
}

std::vector<double> GaussianMixture::sample(RngStream& rng) const {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = components.size() - 1;
    for (std::size_t k = 0; k < components.size(); ++k) {
        cum += components[k].weight;
        if (u < cum) {
            pick = k;
            break;
        }
    }
    const auto& c = components[pick];
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
        x[static_cast<std::size_t>(i)] =
            c.mean[static_cast<std::size_t>(i)] +
            std::sqrt(c.var_at(static_cast<std::size_t>(i))) * rng.normal();
    return x;
}

void to_json(nlohmann::json& j, const GaussianMixture& g) {
    j = nlohmann::json{{"dim", g.dim}, {"components", nlohmann::json::array()}};
    for (const auto& c : g.components) {
        nlohmann::json jc{{"w", c.weight}, {"mean", c.mean}};
        if (c.var.size() == 1)
            jc["var"] = c.var[0];
        else
            jc["var"] = c.var;
        j["components"].push_back(std::move(jc));
    }
}

void from_json(const nlohmann::json& j, GaussianMixture& g) {
    g.dim = j.at("dim").get<int>();
    g.components.clear();
    for (const auto& jc : j.at("components")) {
        GaussianComponent c;
        c.weight = jc.at("w").get<double>();
        c.mean = jc.at("mean").get<std::vector<double>>();
        const auto& v = jc.at("var");
        if (v.is_array())
            c.var = v.get<std::vector<double>>();
        else
            c.var = {v.get<double>()};
        g.components.push_back(std::move(c));
    }
    g.validate();
}

double RewardSpec::evaluate(std::span<const double> x) const {
    return std::visit(
        [&](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, LinearReward>) {
                if (r.a.size() != x.size()) throw ShapeError("reward: dimension mismatch");
                double acc = r.b;
                for (std::size_t i = 0; i < x.size(); ++i) acc += r.a[i] * x[i];
                return acc;
            } else if constexpr (std::is_same_v<T, QuadraticReward>) {
                if (r.a.size() != x.size() || r.curvature.size() != x.size())
                    throw ShapeError("reward: dimension mismatch");
                double acc = r.b;
                for (std::size_t i = 0; i < x.size(); ++i)
                    acc += 0.5 * r.curvature[i] * x[i] * x[i] + r.a[i] * x[i];
                return acc;
            } else {
                return r.fn(x);
            }
        },
        reward);
}

GaussianMixture noised_marginal(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                                int t) {
    const auto [a, s] = forward_marginal(schedule, t);
    GaussianMixture out = gmm;
    for (auto& c : out.components) {
        for (auto& m : c.mean) m *= a;
        for (auto& v : c.var) v = a * a * v + s * s;
    }
    return out;
}

namespace detail {

void exact_eps_into(const GaussianMixture& gmm, std::span<const double> x_t, double alpha_t,
                    double sigma_t, std::span<double> out, EpsWorkspace& ws) {
    if (x_t.size() != static_cast<std::size_t>(gmm.dim) || out.size() != x_t.size())
        throw ShapeError("exact_eps: dimension mismatch");
    const std::size_t K = gmm.components.size();
    ws.logw.resize(K);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = gmm.components[k];
        double l = std::log(c.weight);
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double vt = alpha_t * alpha_t * c.var_at(i) + sigma_t * sigma_t;
            const double d = x_t[i] - alpha_t * c.mean[i];
            l -= 0.5 * (kLog2Pi + std::log(vt) + d * d / vt);
        }
        ws.logw[k] = l;
        best = std::max(best, l);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        ws.logw[k] = std::exp(ws.logw[k] - best);
        total += ws.logw[k];
    }
    // E[x0|x_t] accumulated from per-component posterior means
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = gmm.components[k];
        const double r = ws.logw[k] / total;
        for (std::size_t i = 0; i < x_t.size(); ++i) {
            const double vt = alpha_t * alpha_t * c.var_at(i) + sigma_t * sigma_t;
            const double gain = alpha_t * c.var_at(i) / vt;
            out[i] += r * (c.mean[i] + gain * (x_t[i] - alpha_t * c.mean[i]));
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (x_t[i] - alpha_t * out[i]) / sigma_t;
}

} // namespace detail

std::vector<double> exact_eps(const GaussianMixture& gmm, std::span<const double> x_t,
                              int t, const NoiseSchedule& schedule) {
    if (t < 1) throw IndexError("exact_eps: need t >= 1 (sigma_0 = 0)");
    const auto [a, s] = forward_marginal(schedule, t);
    std::vector<double> out(x_t.size());
    detail::EpsWorkspace ws;
    detail::exact_eps_into(gmm, x_t, a, s, out, ws);
    return out;
}

GaussianMixture tilt(const GaussianMixture& gmm, const RewardSpec& reward, double inv_beta) {
    if (reward.is_blackbox())
        throw ConfigError("tilt: black-box rewards have no closed form");
    if (inv_beta < 0.0) throw ConfigError("tilt: inv_beta must be >= 0");
    if (inv_beta == 0.0) return gmm;

    const std::size_t D = static_cast<std::size_t>(gmm.dim);
    const LinearReward* lin = std::get_if<LinearReward>(&reward.reward);
    const QuadraticReward* quad = std::get_if<QuadraticReward>(&reward.reward);
    const std::vector<double>& a = lin ? lin->a : quad->a;
    if (a.size() != D || (quad && quad->curvature.size() != D))
        throw ShapeError("tilt: reward dimension mismatch");

    GaussianMixture out;
    out.dim = gmm.dim;
    out.components.resize(gmm.components.size());
    std::vector<double> logw(gmm.components.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < gmm.components.size(); ++k) {
        const auto& c = gmm.components[k];
        auto& oc = out.components[k];
        oc.mean.resize(D);
        // quadratic curvature splits an isotropic component into a diagonal one
        oc.var.resize(quad ? D : c.var.size());
        double lw = std::log(c.weight);
        for (std::size_t i = 0; i < D; ++i) {
            const double s2 = c.var_at(i);
            const double curv = quad ? quad->curvature[i] : 0.0;
            const double prec = 1.0 / s2 - curv * inv_beta;
            if (!(prec > 0.0))
                throw NonNormalizableTiltError(
                    "tilt: quadratic curvature exceeds component precision (beta too small)");
            const double q = c.mean[i] / s2 + a[i] * inv_beta;
            const double new_var = 1.0 / prec;
            oc.mean[i] = new_var * q;
            if (quad)
                oc.var[i] = new_var;
            // per-coordinate log-normalizer: (1/2)log(1/(s2 prec)) + q^2/(2 prec) - m^2/(2 s2)
            lw += 0.5 * std::log(1.0 / (s2 * prec)) + 0.5 * q * q / prec -
                  0.5 * c.mean[i] * c.mean[i] / s2;
        }
        if (!quad) oc.var = c.var;
        logw[k] = lw;
        best = std::max(best, lw);
    }
    double total = 0.0;
    for (double& lw : logw) {
        lw = std::exp(lw - best);
        total += lw;
    }
    for (std::size_t k = 0; k < out.components.size(); ++k)
        out.components[k].weight = logw[k] / total;
    return out;
}

double reward_expectation(const GaussianMixture& gmm, const RewardSpec& reward) {
    if (reward.is_blackbox())
        throw ConfigError("reward_expectation: black-box rewards need Monte Carlo");
    const LinearReward* lin = std::get_if<LinearReward>(&reward.reward);
    const QuadraticReward* quad = std::get_if<QuadraticReward>(&reward.reward);
    const std::vector<double>& a = lin ? lin->a : quad->a;
    const double b = lin ? lin->b : quad->b;
    if (a.size() != static_cast<std::size_t>(gmm.dim))
        throw ShapeError("reward_expectation: dimension mismatch");
    double acc = 0.0;
    for (const auto& c : gmm.components) {
        double term = b;
        for (std::size_t i = 0; i < a.size(); ++i) {
            term += a[i] * c.mean[i];
            if (quad)
                term += 0.5 * quad->curvature[i] * (c.var_at(i) + c.mean[i] * c.mean[i]);
        }
        acc += c.weight * term;
    }
    return acc;
}

ModelFamily make_conditional_family(std::vector<GaussianMixture> class_models,
                                    std::span<const double> priors) {
    if (class_models.empty() || class_models.size() != priors.size())
        throw ConfigError("make_conditional_family: need one prior per class model");
    double total = 0.0;
    for (double p : priors) {
        if (!(p > 0.0)) throw ConfigError("make_conditional_family: priors must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("make_conditional_family: priors must sum to 1");
    const int dim = class_models.front().dim;
    for (const auto& m : class_models) {
        m.validate();
        if (m.dim != dim) throw ShapeError("make_conditional_family: mixed dimensions");
    }

    GaussianMixture uncond;
    uncond.dim = dim;
    for (std::size_t c = 0; c < class_models.size(); ++c)
        for (const auto& comp : class_models[c].components) {
            GaussianComponent scaled = comp;
            scaled.weight *= priors[c];
            uncond.components.push_back(std::move(scaled));
        }

    ModelFamily family;
    for (std::size_t c = 0; c < class_models.size(); ++c)
        family.push_back({static_cast<int>(c), std::move(class_models[c])});
    family.push_back({std::nullopt, std::move(uncond)});
    return family;
}

const GaussianMixture& find_model(const ModelFamily& family, std::optional<int> label) {
    for (const auto& entry : family)
        if (entry.label == label) return entry.model;
    throw ConfigError("model family: unknown label");
}

ModelFamily tilt_family(const ModelFamily& family, const RewardSpec& reward, double inv_beta) {
    ModelFamily out;
    out.reserve(family.size());
    for (const auto& entry : family)
        out.push_back({entry.label, tilt(entry.model, reward, inv_beta)});
    return out;
}

} // namespace dera
