#include "dera/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dera/errors.hpp"
#include "dera/rng.hpp"

namespace dera {

void PairedMetrics::validate() const {
    for (const auto& r : rows) {
        if (!(r.target_beta > 0.0) || !(r.anchor_beta > 0.0))
            throw ConfigError("PairedMetrics: betas must be positive");
        if (std::abs(r.lambda - r.anchor_beta / r.target_beta) > 1e-9)
            throw ConfigError("PairedMetrics: lambda must equal anchor_beta/target_beta");
    }
}

SummaryStats summarize(const PairedMetrics& pairs) {
    const std::size_t n = pairs.rows.size();
    if (n < 2) throw InsufficientDataError("summarize: need at least 2 pairs");
    pairs.validate();

    std::vector<double> diffs(n), abs_diffs(n);
    for (std::size_t i = 0; i < n; ++i) {
        diffs[i] = pairs.rows[i].approximated - pairs.rows[i].actual;
        abs_diffs[i] = std::abs(diffs[i]);
    }

    SummaryStats s;
    s.n = static_cast<int>(n);
    s.mae = std::accumulate(abs_diffs.begin(), abs_diffs.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : diffs) ss += d * d;
    s.rmse = std::sqrt(ss / n);

    std::vector<double> sorted = abs_diffs;
    std::sort(sorted.begin(), sorted.end());
    s.median_abs = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    s.ba_mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
    double dev = 0.0;
    for (double d : diffs) dev += (d - s.ba_mean_diff) * (d - s.ba_mean_diff);
    s.ba_sd = std::sqrt(dev / (n - 1));
    s.loa_lo = s.ba_mean_diff - 1.96 * s.ba_sd;
    s.loa_hi = s.ba_mean_diff + 1.96 * s.ba_sd;
    s.mae_ci_lo = std::numeric_limits<double>::quiet_NaN();
    s.mae_ci_hi = std::numeric_limits<double>::quiet_NaN();
    return s;
}

namespace {

// type-7 (linear interpolation) quantile of a sorted vector
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

BootstrapCI bootstrap_mae_ci(const PairedMetrics& pairs, int resamples, std::uint64_t seed) {
    const std::size_t n = pairs.rows.size();
    if (n < 2) throw InsufficientDataError("bootstrap_mae_ci: need at least 2 pairs");
    if (resamples < 100) throw ConfigError("bootstrap_mae_ci: need >= 100 resamples");

    std::vector<double> abs_diffs(n);
    for (std::size_t i = 0; i < n; ++i)
        abs_diffs[i] = std::abs(pairs.rows[i].approximated - pairs.rows[i].actual);

    RngStream rng(seed);
    std::vector<double> maes(static_cast<std::size_t>(resamples));
    for (auto& m : maes) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
            acc += abs_diffs[std::min(pick, n - 1)];
        }
        m = acc / static_cast<double>(n);
    }
    std::vector<double> sorted = maes;
    std::sort(sorted.begin(), sorted.end());
    BootstrapCI ci;
    ci.lo = quantile_sorted(sorted, 0.025);
    ci.hi = quantile_sorted(sorted, 0.975);
    ci.boot_mean = std::accumulate(maes.begin(), maes.end(), 0.0) / maes.size();
    return ci;
}

std::vector<std::pair<double, double>> ecdf(std::span<const double> values) {
    if (values.empty()) throw InsufficientDataError("ecdf: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> points;
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
        points.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
    }
    return points;
}

namespace {

using Samples = std::vector<std::vector<double>>;

double norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

Samples subsample(const Samples& s, std::size_t cap, RngStream& rng) {
    if (s.size() <= cap) return s;
    // partial Fisher-Yates over an index vector, seed-pinned
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < cap; ++i) {
        const auto j =
            i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(idx.size() - i));
        std::swap(idx[i], idx[std::min(j, idx.size() - 1)]);
    }
    Samples out(cap);
    for (std::size_t i = 0; i < cap; ++i) out[i] = s[idx[i]];
    return out;
}

double mean_cross_norm(const Samples& a, const Samples& b) {
    double acc = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) acc += norm_diff(x, y);
    return acc / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

} // namespace

double energy_distance(const Samples& a, const Samples& b, std::size_t subsample_cap,
                       std::uint64_t seed) {
    if (a.empty() || b.empty()) throw InsufficientDataError("energy_distance: empty sample set");
    if (a.front().size() != b.front().size())
        throw ShapeError("energy_distance: dimension mismatch");

    // canonical argument order makes d(a,b) and d(b,a) bitwise identical
    const bool swap_args = std::lexicographical_compare(
        b.begin(), b.end(), a.begin(), a.end(),
        [](const std::vector<double>& x, const std::vector<double>& y) { return x < y; });
    const Samples& first = swap_args ? b : a;
    const Samples& second = swap_args ? a : b;

    RngStream rng_a(substream_seed(seed, 1));
    RngStream rng_b(substream_seed(seed, 2));
    const Samples sa = subsample(first, subsample_cap, rng_a);
    const Samples sb = subsample(second, subsample_cap, rng_b);

    const double cross = mean_cross_norm(sa, sb);
    const double within_a = mean_cross_norm(sa, sa);
    const double within_b = mean_cross_norm(sb, sb);
    return 2.0 * cross - within_a - within_b;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InsufficientDataError("wasserstein_1d: empty sample set");
    std::vector<double> xs(a.begin(), a.end());
    std::vector<double> ys(b.begin(), b.end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());

    if (xs.size() == ys.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) acc += std::abs(xs[i] - ys[i]);
        return acc / static_cast<double>(xs.size());
    }
    // unequal sizes: integrate |F_a^-1(u) - F_b^-1(u)| over the merged
    // quantile breakpoints of the two empirical measures
    const double na = static_cast<double>(xs.size());
    const double nb = static_cast<double>(ys.size());
    std::size_t i = 0, j = 0;
    double u_prev = 0.0, acc = 0.0;
    while (i < xs.size() && j < ys.size()) {
        const double ua = static_cast<double>(i + 1) / na;
        const double ub = static_cast<double>(j + 1) / nb;
        const double u = std::min(ua, ub);
        acc += (u - u_prev) * std::abs(xs[i] - ys[j]);
        u_prev = u;
        if (ua <= u) ++i;
        if (ub <= u) ++j;
    }
    return acc;
}

std::pair<double, double> mc_reward_mean(const std::vector<std::vector<double>>& samples,
                                         const RewardSpec& reward) {
    if (samples.empty()) throw InsufficientDataError("mc_reward_mean: empty sample set");
    const std::size_t n = samples.size();
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = reward.evaluate(samples[i]);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (n == 1) return {mean, 0.0};
    double dev = 0.0;
    for (double v : values) dev += (v - mean) * (v - mean);
    const double se = std::sqrt(dev / (n - 1)) / std::sqrt(static_cast<double>(n));
    return {mean, se};
}

} // namespace dera
