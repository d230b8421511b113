#include "dera/realign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dera/errors.hpp"

namespace dera {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_dims(const PosteriorGaussian& a, const PosteriorGaussian& b) {
    if (a.dim() != b.dim())
        throw ShapeError("realign: posterior dimensions differ");
}

} // namespace

double RealignWeights::sum() const {
    double s = 0.0;
    for (double l : lambdas) s += l;
    return s;
}

PosteriorGaussian geometric_interpolate(const PosteriorGaussian& p_ref,
                                        const PosteriorGaussian& p_aligned, double lambda) {
    check_dims(p_ref, p_aligned);
    if (lambda == 0.0) return p_ref;
    if (lambda == 1.0) return p_aligned;
    p_ref.validate();
    p_aligned.validate();

    const bool iso = p_ref.isotropic() && p_aligned.isotropic();
    PosteriorGaussian out;
    out.mean.resize(p_ref.dim());
    out.var.resize(iso ? 1 : p_ref.dim());
    for (std::size_t i = 0; i < out.var.size(); ++i) {
        const double prec = (1.0 - lambda) / p_ref.var_at(i) + lambda / p_aligned.var_at(i);
        if (!(prec > 0.0))
            throw NonPositiveDefiniteError(
                "geometric_interpolate: non-positive precision at lambda beyond the convex regime");
        out.var[i] = 1.0 / prec;
    }
    for (std::size_t i = 0; i < out.mean.size(); ++i)
        out.mean[i] = out.var_at(i) * ((1.0 - lambda) / p_ref.var_at(i) * p_ref.mean[i] +
                                       lambda / p_aligned.var_at(i) * p_aligned.mean[i]);
    return out;
}

PosteriorGaussian multi_geometric_interpolate(
    const PosteriorGaussian& p_ref,
    std::span<const std::pair<PosteriorGaussian, double>> aligned) {
    double lambda_sum = 0.0;
    bool iso = p_ref.isotropic();
    for (const auto& [p, l] : aligned) {
        check_dims(p_ref, p);
        lambda_sum += l;
        iso = iso && p.isotropic();
    }
    if (std::all_of(aligned.begin(), aligned.end(),
                    [](const auto& pl) { return pl.second == 0.0; }))
        return p_ref;
    p_ref.validate();
    for (const auto& [p, l] : aligned) p.validate();

    const double lambda0 = 1.0 - lambda_sum;
    PosteriorGaussian out;
    out.mean.assign(p_ref.dim(), 0.0);
    out.var.resize(iso ? 1 : p_ref.dim());
    for (std::size_t i = 0; i < out.var.size(); ++i) {
        double prec = lambda0 / p_ref.var_at(i);
        for (const auto& [p, l] : aligned) prec += l / p.var_at(i);
        if (!(prec > 0.0))
            throw NonPositiveDefiniteError(
                "multi_geometric_interpolate: non-positive combined precision");
        out.var[i] = 1.0 / prec;
    }
    for (std::size_t i = 0; i < out.mean.size(); ++i) {
        double acc = lambda0 / p_ref.var_at(i) * p_ref.mean[i];
        for (const auto& [p, l] : aligned) acc += l / p.var_at(i) * p.mean[i];
        out.mean[i] = out.var_at(i) * acc;
    }
    return out;
}

double geometric_mixture_logdensity(std::span<const double> x, const PosteriorGaussian& p_ref,
                                    const PosteriorGaussian& p_aligned, double lambda) {
    check_dims(p_ref, p_aligned);
    if (x.size() != p_ref.dim())
        throw ShapeError("geometric_mixture_logdensity: point dimension mismatch");
    auto log_normal = [&](const PosteriorGaussian& p) {
        double l = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = p.var_at(i);
            const double d = x[i] - p.mean[i];
            l -= 0.5 * (kLog2Pi + std::log(v) + d * d / v);
        }
        return l;
    };
    return (1.0 - lambda) * log_normal(p_ref) + lambda * log_normal(p_aligned);
}

GridMoments grid_normalize_oracle(const PosteriorGaussian& p_ref,
                                  const PosteriorGaussian& p_aligned, double lambda,
                                  const GridSpec& grid) {
    if (p_ref.dim() != 1 || p_aligned.dim() != 1)
        throw ShapeError("grid_normalize_oracle: 1D posteriors only");
    if (grid.n_points < 3 || !(grid.hi > grid.lo))
        throw ConfigError("grid_normalize_oracle: bad grid");

    const int n = grid.n_points;
    const double h = (grid.hi - grid.lo) / (n - 1);
    std::vector<double> logd(static_cast<std::size_t>(n));
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double x = grid.lo + h * i;
        logd[static_cast<std::size_t>(i)] =
            geometric_mixture_logdensity(std::span<const double>(&x, 1), p_ref, p_aligned,
                                         lambda);
        best = std::max(best, logd[static_cast<std::size_t>(i)]);
    }

    // trapezoid weights: 1/2 at the extremes
    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = grid.lo + h * i;
        double w = std::exp(logd[static_cast<std::size_t>(i)] - best);
        if (i == 0 || i == n - 1) w *= 0.5;
        z += w;
        m1 += w * x;
        m2 += w * x * x;
    }
    const double edge_mass =
        (0.5 * std::exp(logd.front() - best) + 0.5 * std::exp(logd.back() - best)) / z;
    if (edge_mass > 1e-8)
        throw OracleCoverageError("grid_normalize_oracle: grid too narrow (edge mass > 1e-8)");

    GridMoments out;
    out.mean = m1 / z;
    out.var = m2 / z - out.mean * out.mean;
    out.log_norm = best + std::log(z * h);
    return out;
}

} // namespace dera
