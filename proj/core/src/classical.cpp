#include "ggsm/classical.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>

namespace ggsm {

double gaussian_cdf(double x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0)));
}

double laplace_cdf(double x, double b) {
    if (!(b > 0.0)) throw std::invalid_argument("b must be positive");
    if (x < 0.0) return 0.5 * std::exp(x / b);
    return 1.0 - 0.5 * std::exp(-x / b);
}

double student_t_cdf(double x, double dof, double scale) {
    if (!(dof > 0.0) || !(scale > 0.0)) {
        throw std::invalid_argument("dof and scale must be positive");
    }
    boost::math::students_t dist(dof);
    return boost::math::cdf(dist, x / scale);
}

double student_t_quartile(double dof) {
    if (!(dof > 0.0)) throw std::invalid_argument("dof must be positive");
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, 0.75);
}

}  // namespace ggsm
