#include "ggsm/independence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "ggsm/parallel.hpp"
#include "ggsm/rng.hpp"

namespace ggsm {

namespace {

/// Largest relative asymmetry a matrix argument may carry before it is
/// rejected as not symmetric.
constexpr double kSymmetryTol = 1e-8;

double interpolated_quantile(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

void require_symmetric(const CovarianceMatrix& c) {
    if (c.size == 0 || c.values.size() != c.size * c.size) {
        throw std::invalid_argument("matrix is not square");
    }
    double scale = 0.0;
    for (double v : c.values) scale = std::max(scale, std::fabs(v));
    const double tol = kSymmetryTol * std::max(scale, 1.0);
    for (std::size_t i = 0; i < c.size; ++i) {
        for (std::size_t j = i + 1; j < c.size; ++j) {
            if (std::fabs(c(i, j) - c(j, i)) > tol) {
                throw std::invalid_argument("matrix is not symmetric");
            }
        }
    }
}

}  // namespace

std::vector<std::vector<double>> abs_mean_profiles(
    std::span<const CoefficientBlock> blocks) {
    if (blocks.empty()) throw PlanMismatch("no blocks to profile");
    const std::size_t n_images = blocks.front().meta.n_images;
    std::vector<std::vector<double>> profiles;
    profiles.reserve(blocks.size());
    for (const CoefficientBlock& block : blocks) {
        if (block.meta.n_images != n_images) {
            throw PlanMismatch("blocks describe different image ensembles");
        }
        if (block.meta.image_abs_means.size() != n_images) {
            throw PlanMismatch("block lacks per-image summaries");
        }
        profiles.push_back(block.meta.image_abs_means);
    }
    return profiles;
}

CovarianceMatrix bootstrap_covariance(
    std::span<const std::vector<double>> group_samples, int n_boot,
    std::uint64_t seed) {
    if (group_samples.size() < 2) {
        throw TooFewObservations("need at least two groups");
    }
    const std::size_t d = group_samples.size();
    const std::size_t n = group_samples.front().size();
    for (const std::vector<double>& group : group_samples) {
        if (group.size() != n) {
            throw std::invalid_argument("group sample lengths differ");
        }
    }
    if (n < 30) {
        throw TooFewObservations("need at least 30 aligned observations");
    }
    if (n_boot < 1) throw std::invalid_argument("n_boot must be positive");

    // Each replicate resamples one shared index set over observations and
    // stores its upper triangle in slot b; the reduction below is serial and
    // order-fixed so results are bit-identical however the work is split.
    const std::size_t replicates = static_cast<std::size_t>(n_boot);
    std::vector<std::vector<double>> upper(replicates);
    parallel_for(replicates, 0, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        std::vector<std::size_t> rows(n);
        for (std::size_t& row : rows) {
            row = static_cast<std::size_t>(rng.uniform_index(n));
        }

        std::vector<double> mean(d, 0.0);
        for (std::size_t g = 0; g < d; ++g) {
            for (std::size_t row : rows) mean[g] += group_samples[g][row];
            mean[g] /= static_cast<double>(n);
        }

        std::vector<double> sums(d * d, 0.0);
        std::vector<double> centered(d);
        for (std::size_t row : rows) {
            for (std::size_t g = 0; g < d; ++g) {
                centered[g] = group_samples[g][row] - mean[g];
            }
            for (std::size_t g = 0; g < d; ++g) {
                for (std::size_t h = g; h < d; ++h) {
                    sums[g * d + h] += centered[g] * centered[h];
                }
            }
        }
        const double denom = static_cast<double>(n - 1);
        for (double& v : sums) v /= denom;
        upper[b] = std::move(sums);
    });

    CovarianceMatrix c;
    c.size = d;
    c.values.assign(d * d, 0.0);
    for (const std::vector<double>& sums : upper) {
        for (std::size_t g = 0; g < d; ++g) {
            for (std::size_t h = g; h < d; ++h) {
                c.values[g * d + h] += sums[g * d + h];
            }
        }
    }
    for (std::size_t g = 0; g < d; ++g) {
        for (std::size_t h = g; h < d; ++h) {
            const double v = c.values[g * d + h] / static_cast<double>(n_boot);
            c(g, h) = v;
            c(h, g) = v;
        }
    }
    return c;
}

double rel_frobenius(const CovarianceMatrix& c) {
    require_symmetric(c);
    double trace = 0.0;
    double off = 0.0;
    for (std::size_t i = 0; i < c.size; ++i) {
        for (std::size_t j = 0; j < c.size; ++j) {
            if (i == j) {
                trace += c(i, j);
            } else {
                off += c(i, j) * c(i, j);
            }
        }
    }
    if (!(trace > 0.0)) throw ZeroTrace("matrix trace is not positive");
    return std::sqrt(off) / trace;
}

std::vector<double> pca_cosine_distances(const CovarianceMatrix& c) {
    require_symmetric(c);
    const std::size_t d = c.size;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d),
                      static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                0.5 * (c(i, j) + c(j, i));
        }
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) {
        throw EigenFailure("symmetric eigensolver did not converge");
    }

    // Eigen orders eigenvalues ascending; walk the columns backwards.
    std::vector<double> distances;
    distances.reserve(d);
    for (std::size_t k = d; k-- > 0;) {
        const auto v = solver.eigenvectors().col(static_cast<Eigen::Index>(k));
        const double norm = v.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw EigenFailure("degenerate eigenvector");
        }
        distances.push_back(1.0 - v.cwiseAbs().maxCoeff() / norm);
    }
    return distances;
}

IndependenceReport independence_report(
    std::span<const std::vector<double>> group_samples, std::uint64_t seed,
    int n_boot) {
    const CovarianceMatrix c = bootstrap_covariance(group_samples, n_boot, seed);
    IndependenceReport report;
    report.n_groups = c.size;
    report.rel_frobenius = rel_frobenius(c);
    report.cosine_distances = pca_cosine_distances(c);

    std::vector<double> sorted = report.cosine_distances;
    std::sort(sorted.begin(), sorted.end());
    report.quantiles.median = interpolated_quantile(sorted, 0.5);
    report.quantiles.p90 = interpolated_quantile(sorted, 0.9);
    report.quantiles.max = sorted.back();
    return report;
}

}  // namespace ggsm
