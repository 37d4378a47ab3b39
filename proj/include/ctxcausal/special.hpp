#pragma once

namespace ctxcausal {

// Inverse standard-normal CDF, accurate to ~1e-15 after one Halley step.
double norm_quantile(double p);

double norm_cdf(double x);

double digamma(double x);

// Regularized incomplete gamma P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double stat, double df);

}  // namespace ctxcausal
