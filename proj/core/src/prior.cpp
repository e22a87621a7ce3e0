#include "ggsm/prior.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "ggsm/rng.hpp"

namespace ggsm {

namespace {

/// Exponent magnitude beyond which exp() under/overflows double range.
const double kExpLimit = 700.0;

double double_factorial(int n) {
    double acc = 1.0;
    for (int k = n; k > 1; k -= 2) acc *= k;
    return acc;
}

/// (v/scale)^r evaluated through logs so extreme shape/scale combinations
/// saturate to 0 or +inf instead of producing NaN.
double power_term(double log_v_over_scale, double r) {
    const double e = r * log_v_over_scale;
    if (e > kExpLimit) return std::numeric_limits<double>::infinity();
    if (e < -kExpLimit) return 0.0;
    return std::exp(e);
}

}  // namespace

void validate(const GsmParams& params) {
    std::ostringstream msg;
    if (params.r == 0.0 || !std::isfinite(params.r)) {
        msg << "r must be nonzero and finite, got " << params.r;
        throw std::invalid_argument(msg.str());
    }
    if (!std::isfinite(params.eta)) {
        msg << "eta must be finite, got " << params.eta;
        throw std::invalid_argument(msg.str());
    }
    if (!(params.scale > 0.0) || !std::isfinite(params.scale)) {
        msg << "scale must be positive and finite, got " << params.scale;
        throw std::invalid_argument(msg.str());
    }
    if (!(params.beta() > 0.0)) {
        msg << "(eta + 3/2)/r must be positive, got " << params.beta()
            << " (r=" << params.r << ", eta=" << params.eta << ")";
        throw std::invalid_argument(msg.str());
    }
}

double moment(const GsmParams& params, int n) {
    validate(params);
    if (n < 0) throw std::invalid_argument("moment order must be nonnegative");
    if (n == 0) return 1.0;
    if (n % 2 == 1) return 0.0;

    const double base = (params.eta + 1.5) / params.r;
    const double shifted = (params.eta + 1.5 + n / 2.0) / params.r;
    if (!(shifted > 0.0) || !(base > 0.0)) {
        std::ostringstream msg;
        msg << "moment " << n << " undefined for r=" << params.r
            << ", eta=" << params.eta;
        throw MomentUndefined(msg.str());
    }

    const double log_ratio = std::lgamma(shifted) - std::lgamma(base);
    double scale_pow = 1.0;
    for (int k = 0; k < n / 2; ++k) scale_pow *= params.scale;
    const double value = double_factorial(n - 1) * scale_pow * std::exp(log_ratio);
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "moment " << n << " overflows for r=" << params.r
            << ", eta=" << params.eta << ", scale=" << params.scale;
        throw MomentUndefined(msg.str());
    }
    return value;
}

double variance(const GsmParams& params) { return moment(params, 2); }

double log_unit_variance(double r, double eta) {
    const double base = (eta + 1.5) / r;
    const double shifted = (eta + 2.5) / r;
    if (!(base > 0.0) || !(shifted > 0.0)) {
        std::ostringstream msg;
        msg << "variance undefined for r=" << r << ", eta=" << eta;
        throw MomentUndefined(msg.str());
    }
    return std::lgamma(shifted) - std::lgamma(base);
}

std::vector<double> draw_samples(const GsmParams& params, std::size_t n,
                                 std::uint64_t seed) {
    validate(params);
    const double beta = params.beta();
    const double inv_r = 1.0 / params.r;
    Rng rng(seed);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = rng.gamma(beta);
        const double v = params.scale * std::pow(g, inv_r);
        out[i] = std::sqrt(v) * rng.normal();
    }
    return out;
}

double pdf(const GsmParams& params, double x, double rel_tol) {
    validate(params);
    if (params.eta <= -1.0 && x == 0.0) {
        throw QuadratureFailure(
            "mixture density diverges at x = 0 for eta <= -1");
    }

    // In s = v/scale the integral is
    //   C * Int_0^inf s^eta * exp(-x^2/(2*scale*s) - s^r) ds,
    //   C = |r| / (Gamma(beta) * sqrt(2*pi*scale)).
    const double beta = params.beta();
    const double log_c = std::log(std::fabs(params.r)) - std::lgamma(beta) -
                         0.5 * std::log(2.0 * M_PI * params.scale);
    const double half_x2_over_scale = 0.5 * x * x / params.scale;
    const double r = params.r;
    const double eta = params.eta;

    auto integrand = [&](double s) -> double {
        if (s <= 0.0) return 0.0;
        const double log_s = std::log(s);
        double e = eta * log_s - half_x2_over_scale / s;
        const double pw = r * log_s;
        if (pw > kExpLimit) return 0.0;
        e -= std::exp(pw);
        if (e > kExpLimit) return std::numeric_limits<double>::infinity();
        if (e < -kExpLimit) return 0.0;
        return std::exp(e);
    };

    boost::math::quadrature::exp_sinh<double> integrator;
    double error = 0.0;
    double l1 = 0.0;
    double integral;
    try {
        integral = integrator.integrate(integrand, rel_tol, &error, &l1);
    } catch (const std::exception& e) {
        throw QuadratureFailure(std::string("mixture density quadrature: ") +
                                e.what());
    }
    if (!std::isfinite(integral) || (l1 > 0.0 && error > 1e-4 * l1)) {
        std::ostringstream msg;
        msg << "mixture density quadrature did not converge at x=" << x
            << " (error " << error << ", L1 " << l1 << ")";
        throw QuadratureFailure(msg.str());
    }
    return std::exp(log_c) * integral;
}

double hyper_pdf(const GsmParams& params, double v) {
    validate(params);
    if (!(v > 0.0)) return 0.0;
    const double log_v_over_scale = std::log(v / params.scale);
    const double u = power_term(log_v_over_scale, params.r);
    const double log_density = std::log(std::fabs(params.r)) -
                               std::lgamma(params.beta()) -
                               std::log(params.scale) +
                               (params.eta + 0.5) * log_v_over_scale - u;
    return log_density < -kExpLimit ? 0.0 : std::exp(log_density);
}

double hyper_cdf(const GsmParams& params, double v) {
    validate(params);
    if (!(v > 0.0)) return 0.0;
    const double beta = params.beta();
    const double e = params.r * (std::log(v) - std::log(params.scale));
    if (e < -kExpLimit) {
        // exp(e) underflows, but P(g <= exp(e)) = exp(beta e)/Gamma(beta+1)
        // (1 + O(exp(e))) stays of order one when beta is tiny.
        const double log_p = beta * e - std::lgamma(beta + 1.0);
        const double p = log_p < -kExpLimit ? 0.0 : std::exp(log_p);
        return params.r > 0.0 ? p : 1.0 - p;
    }
    const double u = power_term(std::log(v / params.scale), params.r);
    if (params.r > 0.0) {
        return boost::math::gamma_p(beta, u);
    }
    // v increasing means u decreasing; the upper tail of the gamma law.
    return boost::math::gamma_q(beta, u);
}

double hyper_quantile(const GsmParams& params, double q) {
    validate(params);
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("quantile level outside [0, 1]");
    }
    const double beta = params.beta();
    const double u = params.r > 0.0 ? boost::math::gamma_p_inv(beta, q)
                                    : boost::math::gamma_q_inv(beta, q);
    return params.scale * std::pow(u, 1.0 / params.r);
}

}  // namespace ggsm
