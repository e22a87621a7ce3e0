#pragma once

#include <cstdint>
#include <span>

#include "ggsm/errors.hpp"

namespace ggsm {

struct SkewTestResult {
    double skewness = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    /// True when the bootstrap confidence interval excludes zero, i.e. the
    /// sample is too asymmetric for a symmetric-prior fit to make sense.
    bool excluded = false;
};

/// Sample skewness m3 / m2^(3/2) with a seeded percentile-bootstrap
/// confidence interval (level 1 - alpha, default 95%). Requires at least 30
/// values (TooFewSamples below that).
SkewTestResult skew_pretest(std::span<const double> values,
                            std::uint64_t seed, int n_boot = 200,
                            double alpha = 0.05);

}  // namespace ggsm
