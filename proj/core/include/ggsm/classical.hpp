#pragma once

namespace ggsm {

/// Zero-mean classical CDFs used as comparison baselines.
double gaussian_cdf(double x, double sigma);
double laplace_cdf(double x, double b);
/// Location-zero Student-t with `dof` degrees of freedom, scaled by `scale`.
double student_t_cdf(double x, double dof, double scale);
/// Upper quartile of the unit-scale Student-t (used for quantile matching
/// when the variance does not exist).
double student_t_quartile(double dof);

}  // namespace ggsm
