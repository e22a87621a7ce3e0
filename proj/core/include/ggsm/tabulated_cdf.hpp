#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ggsm/prior.hpp"

namespace ggsm {

/// Marginal CDF of the scale-mixture prior, tabulated once by quadrature and
/// then evaluated through a shape-preserving (monotone) cubic interpolant.
///
/// The table spans [-x_max, x_max] with x_max = sqrt(variance / tail_eps)
/// (Chebyshev bound), is antisymmetric around F(0) = 1/2, and adjacent knots
/// differ by at most the refinement tolerance in CDF value. Evaluation is
/// clamped to [0, 1]; outside the tabulated span it returns the end values,
/// which are within tail_eps of 0 and 1.
class TabulatedCdf {
public:
    TabulatedCdf() = default;
    /// Validating constructor (used by load(); knots strictly increasing,
    /// values nondecreasing within [0, 1]). Throws FormatError.
    TabulatedCdf(const GsmParams& params, std::vector<double> knots,
                 std::vector<double> values);

    double operator()(double x) const;

    /// Evaluates F(x * x_scale) for an ascending sequence in one merge pass.
    void evaluate_sorted(std::span<const double> sorted_x, double x_scale,
                         std::span<double> out) const;

    /// Grid-search hot path: sup_i max(hi[i] - F(s*x[i]), F(s*x[i]) - lo[i])
    /// without materializing the evaluations.
    double sup_deviation(std::span<const double> sorted_x,
                         std::span<const double> lo,
                         std::span<const double> hi, double x_scale) const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    const GsmParams& params() const { return params_; }
    bool empty() const { return knots_.empty(); }

    /// Binary cache: magic "GSMC", little-endian, version, the parameter
    /// triple, then the (knot, value) pairs. Slopes are recomputed on load.
    void save(const std::filesystem::path& path) const;
    static TabulatedCdf load(const std::filesystem::path& path);

private:
    void build_slopes();

    GsmParams params_;
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

/// Tabulates the marginal CDF by adaptive quadrature of
///   F(T) = Int_{-inf}^0 phi(z) * P(v > (T/z)^2) dz        (T <= 0)
/// and reflection F(T) = 1 - F(-T) for the positive half. Knots start on a
/// uniform grid and are bisected until adjacent CDF gaps fall below
/// refine_tol (depth-capped; relevant when eta <= -1 concentrates mass at 0).
/// Throws MomentUndefined when the variance (support bound) does not exist
/// and QuadratureFailure when the integrator cannot reach tolerance.
TabulatedCdf tabulate_cdf(const GsmParams& params, double tail_eps = 1e-3,
                          double refine_tol = 0.02);

namespace detail {

/// Shape-only tabulation at unit marginal variance; the scale enters only
/// through its log, so extreme grid corners cannot overflow. The recorded
/// params carry scale = exp(log_scale) clamped into double range.
TabulatedCdf tabulate_unit_variance(double r, double eta,
                                    double tail_eps = 1e-3,
                                    double refine_tol = 0.02);

}  // namespace detail

}  // namespace ggsm
