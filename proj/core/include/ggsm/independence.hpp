#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ggsm/blocks.hpp"
#include "ggsm/errors.hpp"

namespace ggsm {

/// Dense symmetric matrix in row-major order, sized for group-level
/// covariance work (tens of groups, not thousands).
struct CovarianceMatrix {
    std::size_t size = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const {
        return values[i * size + j];
    }
    double& operator()(std::size_t i, std::size_t j) {
        return values[i * size + j];
    }
};

/// Per-group, per-image mean absolute coefficient: the aligned observation
/// rows behind the covariance bootstrap, one row per image. Blocks must
/// describe the same image ensemble and carry per-image summaries
/// (PlanMismatch otherwise).
std::vector<std::vector<double>> abs_mean_profiles(
    std::span<const CoefficientBlock> blocks);

/// Mean of sample covariance matrices over n_boot resamples of the shared
/// observation index set, one derived seed per replicate. Requires at least
/// two groups with at least 30 aligned observations each
/// (TooFewObservations) of equal length (invalid_argument). The result is
/// exactly symmetric and positive semidefinite up to roundoff.
CovarianceMatrix bootstrap_covariance(
    std::span<const std::vector<double>> group_samples, int n_boot,
    std::uint64_t seed);

/// Off-diagonal Frobenius mass relative to the total variance:
/// ||C - Diag(C)||_F / Trace(C). Throws ZeroTrace when the trace is not
/// positive.
double rel_frobenius(const CovarianceMatrix& c);

/// Cosine distance of every principal component to the nearest signed
/// coordinate axis, ordered by descending eigenvalue:
/// 1 - max_i |v_i| / ||v||. Zero means the component is a coordinate axis,
/// i.e. no mixing between groups. Throws EigenFailure when the symmetric
/// eigensolver does not converge.
std::vector<double> pca_cosine_distances(const CovarianceMatrix& c);

struct CosineQuantiles {
    double median = 0.0;
    double p90 = 0.0;
    double max = 0.0;
};

struct IndependenceReport {
    std::size_t n_groups = 0;
    double rel_frobenius = 0.0;
    /// Per component, descending eigenvalue order.
    std::vector<double> cosine_distances;
    CosineQuantiles quantiles;
};

/// Bundles the three diagnostics over one set of aligned group samples.
IndependenceReport independence_report(
    std::span<const std::vector<double>> group_samples, std::uint64_t seed,
    int n_boot = 200);

}  // namespace ggsm
