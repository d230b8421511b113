#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dera/gaussian.hpp"

namespace dera {

/// Interpolation weights for one or more aligned posteriors; the reference
/// carries the implied weight 1 - sum(lambdas). Values with sum > 1 (or a
/// single lambda > 1) extrapolate and are admitted only while the combined
/// precision stays positive.
struct RealignWeights {
    std::vector<double> lambdas;

    double sum() const;
    double reference_weight() const { return 1.0 - sum(); }
};

/// Normalized geometric mixture p_ref^(1-lambda) p_aligned^lambda of two
/// Gaussians:
///   var_new = ((1-lambda)/var1 + lambda/var2)^-1
///   mu_new  = var_new ((1-lambda)/var1 mu1 + lambda/var2 mu2)
/// lambda = 0 and lambda = 1 return the corresponding argument unchanged.
PosteriorGaussian geometric_interpolate(const PosteriorGaussian& p_ref,
                                        const PosteriorGaussian& p_aligned, double lambda);

/// Multi-reward form: the reference enters as component 0 with weight
/// lambda_0 = 1 - sum(lambda_i), so K = 1 reduces exactly to
/// geometric_interpolate.
PosteriorGaussian multi_geometric_interpolate(
    const PosteriorGaussian& p_ref,
    std::span<const std::pair<PosteriorGaussian, double>> aligned);

/// Unnormalized log density (1-lambda) log N(x; mu1, var1) + lambda log N(x; mu2, var2).
double geometric_mixture_logdensity(std::span<const double> x, const PosteriorGaussian& p_ref,
                                    const PosteriorGaussian& p_aligned, double lambda);

struct GridSpec {
    double lo = -10.0;
    double hi = 10.0;
    int n_points = 200000;
};

struct GridMoments {
    double mean = 0.0;
    double var = 0.0;
    double log_norm = 0.0;
};

/// Independent 1D verification of the closed form: trapezoid-integrates the
/// unnormalized geometric mixture and returns its first two moments and log
/// normalizer. Throws OracleCoverageError when edge mass exceeds 1e-8.
GridMoments grid_normalize_oracle(const PosteriorGaussian& p_ref,
                                  const PosteriorGaussian& p_aligned, double lambda,
                                  const GridSpec& grid);

} // namespace dera
