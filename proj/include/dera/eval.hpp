#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dera/mixture.hpp"

namespace dera {

/// One (anchor, target) comparison cell. lambda must equal
/// anchor_beta / target_beta within 1e-9.
struct PairedRow {
    double anchor_beta = 0.0;
    double target_beta = 0.0;
    double lambda = 0.0;
    double actual = 0.0;       // from-scratch value
    double approximated = 0.0; // realigned value
};

struct PairedMetrics {
    std::vector<PairedRow> rows;
    void validate() const;
};

struct SummaryStats {
    double mae = 0.0;
    double rmse = 0.0;
    double median_abs = 0.0;
    double ba_mean_diff = 0.0; // mean of approximated - actual
    double ba_sd = 0.0;        // sample SD (n-1)
    double loa_lo = 0.0;       // ba_mean_diff - 1.96 ba_sd
    double loa_hi = 0.0;
    double mae_ci_lo = 0.0;    // filled by bootstrap_mae_ci
    double mae_ci_hi = 0.0;
    int n = 0;
};

/// MAE / RMSE / median absolute error and Bland-Altman bias, SD, limits of
/// agreement over approximated - actual differences. CI fields are left NaN.
SummaryStats summarize(const PairedMetrics& pairs);

struct BootstrapCI {
    double lo = 0.0;
    double hi = 0.0;
    double boot_mean = 0.0;
};

/// Percentile (2.5/97.5) bootstrap of the MAE; deterministic given seed.
BootstrapCI bootstrap_mae_ci(const PairedMetrics& pairs, int resamples, std::uint64_t seed);

/// Step points (x, F(x)) over sorted unique values; F(max) = 1.
std::vector<std::pair<double, double>> ecdf(std::span<const double> values);

/// Energy distance 2 E|A-B| - E|A-A'| - E|B-B'| as an all-pairs V-statistic
/// (zero iff equal samples, nonnegative). Sets larger than subsample_cap are
/// subsampled with the given seed. Symmetric bitwise under equal seeds.
double energy_distance(const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b,
                       std::size_t subsample_cap = 20000, std::uint64_t seed = 0x5eed);

/// Exact order-1 transport distance between 1D empirical distributions;
/// reduces to the mean absolute difference of sorted samples at equal sizes.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// Monte-Carlo reward mean and its standard error over a sample set.
std::pair<double, double> mc_reward_mean(const std::vector<std::vector<double>>& samples,
                                         const RewardSpec& reward);

} // namespace dera
