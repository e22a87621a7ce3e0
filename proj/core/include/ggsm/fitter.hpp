#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "ggsm/blocks.hpp"
#include "ggsm/prior.hpp"
#include "ggsm/skew.hpp"
#include "ggsm/tabulated_cdf.hpp"

namespace ggsm {

/// Shape-parameter search grid: a fine lattice of inner_step up to
/// inner_limit on each axis and outer_step beyond, plus the exact lower
/// bounds when they fall off the lattice (so the default r axis starts at
/// 0.01 and the eta axis at -1.49, just inside the admissible domain).
struct GridSpec {
    double r_min = 0.01;
    double r_max = 20.0;
    double eta_min = -1.49;
    double eta_max = 20.0;
    double inner_step = 0.1;
    double outer_step = 1.0;
    double inner_limit = 10.0;
    /// Refined spacing is the local coarse step over refine_divisor,
    /// or over fine_divisor in the sensitive strips r < fine_r_limit
    /// and eta < 0 (per axis).
    double refine_divisor = 5.0;
    double fine_divisor = 10.0;
    double fine_r_limit = 0.02;

    /// Axis lattices, ascending. Throw std::invalid_argument when a range
    /// is empty or reaches outside the admissible domain (r <= 0,
    /// eta <= -1.5).
    std::vector<double> r_points() const;
    std::vector<double> eta_points() const;
    double step_r_at(double r) const;
    double step_eta_at(double eta) const;
};

/// Trim counts searched during scale matching, and the offsets searched
/// around the coarse winner during refinement (t* = max(t0 + delta, 0)).
struct TrimSpec {
    std::vector<std::size_t> t_grid = {0,   25,  50,  75,  100, 150,
                                       200, 250, 300, 350, 500};
    std::vector<long> refine_deltas = {-100, -75, -50, -25, 0,
                                       25,   50,  75,  100};
};

/// Sample variance (n-1 denominator) after dropping the t smallest and t
/// largest order statistics. Throws OverTrimmed unless n > 2t + 1.
double trimmed_variance(std::span<const double> values, std::size_t t);

/// Scale that makes the model variance equal emp_var exactly:
/// emp_var / variance((r, eta, 1)). Throws MomentUndefined (via the moment
/// formula, including non-finite overflow at extreme shapes) and
/// std::invalid_argument when emp_var is not positive and finite.
double match_scale(double r, double eta, double emp_var);

/// Unit-variance CDF tables shared across fits, keyed by shape pair. A
/// failed tabulation is cached as a permanent skip marker so retries cost
/// nothing. Concurrent get() is safe; each key is built once.
class UnitCdfCache {
public:
    struct Entry {
        TabulatedCdf cdf;
        /// Marginal variance at scale 1, as a log (finite even where the
        /// plain ratio overflows).
        double log_unit_variance = 0.0;
        bool failed = false;
    };

    std::shared_ptr<const Entry> get(double r, double eta);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::pair<double, double>, std::shared_ptr<const Entry>>
        entries_;
};

/// One evaluated grid point: its best KS statistic over the trim set, the
/// trim that achieved it, and the local grid spacing (used for the lper
/// half-step rule).
struct ScoredPoint {
    double r = 0.0;
    double eta = 0.0;
    double ks = 0.0;
    std::size_t trim = 0;
    double step_r = 0.0;
    double step_eta = 0.0;
};

struct CoarseFit {
    /// Winning triple; scale is already variance-matched.
    GsmParams best;
    double ks = 0.0;
    std::size_t t0 = 0;
    /// Every admissible coarse point, r-major ascending.
    std::vector<ScoredPoint> scored;
};

/// Full coarse grid search: for every (r, eta) point the CDF is tabulated
/// once at unit variance and scored against the block at each usable trim
/// (variance matching reduces to a pure rescale of the abscissa, so trims
/// reuse the table). Ties broken by smaller t, then r, then eta. Throws
/// EmptySample and AllFitsDegenerate (every triple skipped or failed).
CoarseFit coarse_fit(const CoefficientBlock& block, const GridSpec& grid,
                     const TrimSpec& trims, UnitCdfCache& cache,
                     std::size_t subsample_cap = 100000);

enum class FitCategory {
    statistical_pass,
    practical_pass,
    borderline,
    interesting_failure,
    trivial_failure,
};
std::string_view to_string(FitCategory category);

enum class Baseline { gaussian, laplace, student_t };
std::string_view to_string(Baseline baseline);

struct BaselineFit {
    /// sigma for gaussian, b for laplace, the t scale otherwise.
    double scale = 0.0;
    /// Degrees of freedom; zero for the fixed-shape baselines.
    double dof = 0.0;
    double ks = 0.0;
    double p_value = 0.0;
};

/// Classical comparison fits scored by the same KS machinery: Gaussian and
/// Laplace matched to the sample variance, Student's t by a two-stage
/// search over the degrees of freedom (variance-matched above dof 2,
/// upper-quartile-matched at or below, where the variance diverges).
/// Throws EmptySample.
std::map<Baseline, BaselineFit> fit_baselines(
    const CoefficientBlock& block, std::size_t subsample_cap = 100000);

/// Automated symmetry and shape checks behind the trivial-failure split:
/// bootstrap skewness interval (skipped below 30 values), a smoothed-
/// histogram bimodality heuristic, and the fraction of values within
/// zero_tol of zero.
struct BlockFlags {
    SkewTestResult skew;
    bool bimodal = false;
    double zero_spike_fraction = 0.0;
};
BlockFlags block_flags(std::span<const double> values, std::uint64_t seed,
                       int n_boot = 200, double alpha = 0.05,
                       double zero_tol = 0.0);

struct CategoryThresholds {
    double alpha = 0.05;
    std::size_t min_samples = 100;
    double practical_ks = 0.01;
    double borderline_ks = 0.02;
    double zero_spike = 0.2;
};

struct FitResult {
    GsmParams best;
    double ks = 0.0;
    double p_value = 0.0;
    std::size_t t_star = 0;
    FitCategory category = FitCategory::interesting_failure;
    /// Coarse and refined points under max(critical value at 5%, 0.01),
    /// deduplicated, (r, eta) ascending. Contains best whenever nonempty.
    std::vector<ScoredPoint> region;
    bool region_intersects_lper = false;
    /// Range of p = 2r/(1+r) over region points on the eta = 0 line
    /// (within half a local grid step); meaningful only when intersecting.
    std::array<double, 2> lper_p_range = {0.0, 0.0};
    BlockFlags flags;
    std::map<Baseline, BaselineFit> baselines;
};

/// statistical_pass when p > alpha with more than min_samples values; then
/// practical_pass / borderline by KS thresholds; failures split into
/// trivial (any flag fires) and interesting. Monotone in ks.
FitCategory categorize(const FitResult& fit, std::size_t n,
                       const CategoryThresholds& thresholds = {});

/// Refinement around the coarse winner: a local grid one coarse cell wide
/// with spacing per GridSpec's divisors, trims t* = max(t0 + delta, 0),
/// then the final best triple, p-value, best-fit region over the union of
/// coarse and refined points, lper intersection, failure flags (seeded
/// bootstrap), baselines, and category.
FitResult refine_fit(const CoefficientBlock& block, const CoarseFit& coarse,
                     const GridSpec& grid, const TrimSpec& trims,
                     UnitCdfCache& cache, std::uint64_t seed,
                     std::size_t subsample_cap = 100000);

/// coarse_fit followed by refine_fit.
FitResult fit_block(const CoefficientBlock& block, const GridSpec& grid,
                    const TrimSpec& trims, UnitCdfCache& cache,
                    std::uint64_t seed, std::size_t subsample_cap = 100000);

}  // namespace ggsm
