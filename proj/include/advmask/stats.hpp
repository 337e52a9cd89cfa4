#pragma once

#include <cstddef>

namespace advmask::stats {

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Survival function of the chi-square distribution with df degrees of
// freedom: Pr[X >= x].
double chi_square_sf(double x, double df);

}  // namespace advmask::stats
