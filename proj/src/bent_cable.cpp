#include "bentcable/bent_cable.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bentcable/errors.hpp"

namespace bentcable {

double bend_kernel(double t, double tau, double gamma) {
  if (!std::isfinite(t) || !std::isfinite(tau) || !std::isfinite(gamma)) {
    throw DomainError("bend_kernel: non-finite argument");
  }
  if (gamma <= 0.0) {
    throw DomainError("bend_kernel: gamma must be positive, got " + std::to_string(gamma));
  }
  return bend_kernel_unchecked(t, tau, gamma);
}

double bend_mean(double t, const BendParams& p) {
  if (!std::isfinite(p.alpha1) || !std::isfinite(p.alpha2)) {
    throw DomainError("bend_mean: non-finite slope");
  }
  return p.alpha1 * t + p.alpha2 * bend_kernel(t, p.tau, p.gamma);
}

TransitionWindow transition_window(const BendParams& p) {
  return {p.tau - p.gamma, p.tau, p.tau + p.gamma};
}

double transform_response(double defor_area, double forest_extent,
                          std::optional<double> zero_floor) {
  if (!std::isfinite(defor_area) || !std::isfinite(forest_extent)) {
    throw DomainError("transform_response: non-finite area");
  }
  if (forest_extent <= 0.0) {
    throw DomainError("transform_response: forest extent must be positive");
  }
  if (defor_area < 0.0) {
    throw DomainError("transform_response: negative deforestation area");
  }
  double r = defor_area / forest_extent;
  if (r >= 1.0) {
    throw DomainError("transform_response: deforestation exceeds forest extent");
  }
  if (zero_floor) {
    if (!(*zero_floor > 0.0 && *zero_floor < 1.0)) {
      throw DomainError("transform_response: zero floor must lie in (0, 1)");
    }
    r = std::max(r, *zero_floor);
  }
  if (r <= 0.0) {
    throw ZeroDeforestationError("transform_response: zero-deforestation cell");
  }
  return std::log(-std::log(r));
}

double tenure_covariate(double frac_freehold, double frac_leasehold) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(frac_freehold) || !in_unit(frac_leasehold)) {
    throw DomainError("tenure_covariate: tenure shares must be fractions in [0, 1]");
  }
  // log10(a) - log10(b) rather than log10(a / b) so swapping the arguments
  // flips the sign exactly.
  return std::log10(frac_freehold + 0.01) - std::log10(frac_leasehold + 0.01);
}

}  // namespace bentcable
