#include "ggsm/skew.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ggsm/rng.hpp"

namespace ggsm {

namespace {

double skewness_of(std::span<const double> values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double c = v - mean;
        m2 += c * c;
        m3 += c * c * c;
    }
    m2 /= n;
    m3 /= n;
    if (m2 <= 0.0) return 0.0;
    return m3 / (m2 * std::sqrt(m2));
}

double interpolated_quantile(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

SkewTestResult skew_pretest(std::span<const double> values, std::uint64_t seed,
                            int n_boot, double alpha) {
    if (values.size() < 30) {
        throw TooFewSamples("skew_pretest needs at least 30 values");
    }
    if (n_boot < 2) throw std::invalid_argument("n_boot must be at least 2");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }

    SkewTestResult result;
    result.skewness = skewness_of(values);

    const std::size_t n = values.size();
    Rng rng(seed);
    std::vector<double> resample(n);
    std::vector<double> stats(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            resample[i] = values[rng.uniform_index(n)];
        }
        stats[static_cast<std::size_t>(b)] = skewness_of(resample);
    }
    std::sort(stats.begin(), stats.end());
    result.ci_lo = interpolated_quantile(stats, alpha / 2.0);
    result.ci_hi = interpolated_quantile(stats, 1.0 - alpha / 2.0);
    result.excluded = result.ci_lo > 0.0 || result.ci_hi < 0.0;
    return result;
}

}  // namespace ggsm
