#pragma once

namespace explanova {

// ln Gamma(x) for x > 0 (Lanczos approximation).
double ln_gamma(double x);

// Regularized incomplete gamma P(a, x) and Q(a, x) = 1 - P(a, x), a > 0, x >= 0.
// Series expansion for x < a + 1, continued fraction otherwise.
double regularized_lower_gamma(double a, double x);
double regularized_upper_gamma(double a, double x);

// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

// Upper-tail p-value of the F distribution with (d1, d2) degrees of freedom.
double f_distribution_upper_tail(double f, double d1, double d2);

// Upper-tail p-value of the chi-squared distribution with dof degrees of freedom.
double chi_squared_upper_tail(double x, double dof);

}  // namespace explanova
