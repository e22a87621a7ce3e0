#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ggsm/errors.hpp"

namespace ggsm {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    /// Count the p-value was computed at: the original n for one-sample
    /// tests (even when the statistic was subsampled), the harmonic size
    /// na*nb/(na+nb) for two-sample tests.
    double n_effective = 0.0;
    bool subsampled = false;
};

/// P(D_n > d). Exact finite-n evaluation (matrix-power method) for
/// n <= 10^4; the limiting series above that, and also in the far tail
/// (sqrt(n) d > 3.2) where the branches agree beyond double noise and the
/// band matrix would be needlessly large.
double kolmogorov_sf(double d, std::uint64_t n);

/// The limiting survival 2 * sum_k (-1)^(k-1) exp(-2 k^2 x^2) with the
/// Smirnov finite-n argument shift x = sqrt(n) d + 1/(6 sqrt(n)), which
/// tracks the exact law to O(1/n) instead of O(1/sqrt(n)). Evaluated
/// through the theta-function dual below x = 1 where the alternating form
/// converges slowly. Accepts fractional n (two-sample harmonic sizes).
double kolmogorov_sf_asymptotic(double d, double n);

/// Root of kolmogorov_sf(., n) = alpha.
double ks_critical_value(double alpha, std::uint64_t n);

/// Selected order statistics plus their empirical step bounds. For
/// n <= cap every rank is kept; otherwise cap regularly spaced ranks
/// (always including 1 and n). lo[i] = (rank-1)/n, hi[i] = rank/n with the
/// original rank and n, so the subsampled statistic never exceeds the exact
/// one and undershoots by at most the widest skipped CDF increment.
struct SubsampleBounds {
    std::vector<double> x;
    std::vector<double> lo;
    std::vector<double> hi;
    bool subsampled = false;
};
SubsampleBounds make_subsample_bounds(std::span<const double> sorted_values,
                                      std::size_t subsample_cap);

/// One-sample KS test of `values` against a continuous CDF. Sorts a copy;
/// the p-value always uses the full sample size. Throws EmptySample.
KsResult ks_one_sample(std::span<const double> values,
                       const std::function<double(double)>& cdf,
                       std::size_t subsample_cap = 100000);

/// Two-sample KS test. Samples above the cap are reduced to regularly
/// spaced order statistics; the p-value uses the original harmonic size and
/// the limiting distribution. Throws EmptySample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b,
                       std::size_t subsample_cap = 100000);

}  // namespace ggsm
