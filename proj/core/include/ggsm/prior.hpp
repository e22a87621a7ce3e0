#pragma once

#include <cstdint>
#include <vector>

#include "ggsm/errors.hpp"

namespace ggsm {

/// Prior family: x | v ~ N(0, v) with the variance v drawn from a
/// generalized gamma law
///
///   p(v) = |r| / (Gamma(beta) * scale) * (v/scale)^(eta + 1/2)
///            * exp(-(v/scale)^r),        beta = (eta + 3/2) / r.
///
/// Admissible iff r != 0, scale > 0 and beta > 0 (negative r therefore
/// requires eta < -3/2 and gives power-law tails; r = 1, eta = -1/2 is the
/// exponential mixing that produces a Laplace marginal).
struct GsmParams {
    double r = 1.0;
    double eta = -0.5;
    double scale = 1.0;

    double beta() const { return (eta + 1.5) / r; }
};

/// Throws std::invalid_argument when the triple is inadmissible.
void validate(const GsmParams& params);

/// E[X^n] of the marginal. Odd n give exactly 0; even n give
/// (n-1)!! * scale^(n/2) * Gamma((eta + 1.5 + n/2)/r) / Gamma((eta + 1.5)/r).
/// Throws MomentUndefined when the Gamma-ratio argument is not positive
/// (possible only for r < 0) and on non-finite overflow.
double moment(const GsmParams& params, int n);

/// Convenience: moment(params, 2).
double variance(const GsmParams& params);

/// log of the marginal variance at unit scale, computed without forming the
/// Gamma ratio (safe at extreme shape corners where the ratio overflows).
double log_unit_variance(double r, double eta);

/// n iid marginal draws. Each draw is v = scale * g^(1/r) with
/// g ~ Gamma(beta, 1), then x ~ N(0, v). Deterministic for a given seed.
std::vector<double> draw_samples(const GsmParams& params, std::size_t n,
                                 std::uint64_t seed);

/// Marginal density by adaptive quadrature of the mixture integral,
/// relative tolerance rel_tol. Throws QuadratureFailure when the integral
/// diverges (x == 0 with eta <= -1) or the tolerance is unreachable.
double pdf(const GsmParams& params, double x, double rel_tol = 1e-8);

/// Generalized gamma mixing distribution: density, CDF and quantile of v.
/// The CDF is the regularized incomplete gamma in u = (v/scale)^r, with the
/// orientation flipped for r < 0.
double hyper_pdf(const GsmParams& params, double v);
double hyper_cdf(const GsmParams& params, double v);
double hyper_quantile(const GsmParams& params, double q);

}  // namespace ggsm
