#pragma once

#include <cmath>
#include <optional>

namespace bentcable {

// One region's bent-cable: incoming slope alpha1, outgoing slope
// alpha1 + alpha2, quadratic bend of half-width gamma centred at tau.
struct BendParams {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double tau = 0.0;
  double gamma = 1.0;
};

struct TransitionWindow {
  double start = 0.0;
  double mid = 0.0;
  double end = 0.0;
};

// Unchecked kernel for the samplers' inner loops. Requires gamma > 0.
inline double bend_kernel_unchecked(double t, double tau, double gamma) noexcept {
  const double d = t - tau;
  if (d > gamma) return d;
  if (d < -gamma) return 0.0;
  const double s = d + gamma;
  return s * s / (4.0 * gamma);
}

// q(t) = (t - tau + gamma)^2 / (4 gamma) on |t - tau| <= gamma,
//        t - tau                      for t > tau + gamma,
//        0                            otherwise.
// Throws DomainError on non-finite input or gamma <= 0.
double bend_kernel(double t, double tau, double gamma);

// alpha1 * t + alpha2 * q(t).
double bend_mean(double t, const BendParams& p);

TransitionWindow transition_window(const BendParams& p);

// y = log(-log(defor_area / forest_extent)), natural logs.
// With `zero_floor` set, the ratio is raised to at least that value before
// transforming; otherwise a zero ratio throws ZeroDeforestationError.
double transform_response(double defor_area, double forest_extent,
                          std::optional<double> zero_floor = std::nullopt);

// Inverse of the double-log transform: the ratio r with transform(r) == y.
inline double inverse_transform_response(double y) { return std::exp(-std::exp(y)); }

// L = log10((freehold + 0.01) / (leasehold + 0.01)), shares as fractions.
double tenure_covariate(double frac_freehold, double frac_leasehold);

}  // namespace bentcable
