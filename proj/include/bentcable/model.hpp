#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bentcable/bent_cable.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/spatial.hpp"

namespace bentcable {

enum class GammaMode { common, per_region };

const char* to_string(GammaMode m);
GammaMode gamma_mode_from_string(const std::string& s);

// Prior hyperparameters and model-variant switches. Variances, not sds.
struct HyperConfig {
  double m1_intercept = 16.0;
  double u_intercept = 100.0;
  double m1_slope = 0.0;
  double u_slope = 10.0;
  double m2_bend = 2000.0;
  double var_bend_mean = 100.0;
  double lgamma_mean = std::log(5.5);
  double lgamma_var = std::log(10.0) * std::log(10.0);
  double precision_shape = 1.0;  // Gamma(shape, rate) on every precision
  double precision_rate = 0.01;
  GammaMode mode_gamma = GammaMode::common;
  WeightMode mode_spatial = WeightMode::unweighted;

  // Throws ConfigError when a variance or Gamma hyperparameter is not positive.
  void validate() const;
};

// Full parameter state of the hierarchical model. tau and tbar are calendar
// years; the incoming-slope term uses time centred at PanelData::time_origin.
struct ParamState {
  double b0 = 0.0;
  Eigen::VectorXd b_spatial;
  Eigen::VectorXd b_temporal;
  Eigen::VectorXd b_climate;
  double a1 = 0.0;
  double a2 = 0.0;
  double tbar = 2000.0;
  double lgamma = 0.0;
  Eigen::VectorXd alpha1;
  Eigen::VectorXd alpha2;
  Eigen::VectorXd tau;
  Eigen::VectorXd log_gamma;  // equals lgamma everywhere in common mode
  Eigen::VectorXd beta10;     // CAR effects, sum to zero
  Eigen::VectorXd beta20;     // iid year effects
  double v = 1.0;
  double sigma_tau = 1.0;
  double sigma_gamma = 1.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double sigma10 = 1.0;
  double sigma20 = 1.0;

  // Zero-initialised state conforming to the panel.
  static ParamState zeros(const PanelData& data);
};

// Throws ConfigError if the state's vector sizes do not match the panel.
void check_dimensions(const PanelData& data, const ParamState& s);

// Non-cable part of the mean: intercepts, covariate terms and year effect.
inline double fixed_mean(const PanelData& d, const ParamState& s, int i, int t) {
  double m = s.b0 + s.beta10[i] + s.beta20[t];
  for (int k = 0; k < d.n_spatial(); ++k) m += s.b_spatial[k] * d.spatial(i, k);
  for (int k = 0; k < d.n_temporal(); ++k) m += s.b_temporal[k] * d.temporal(t, k);
  for (int k = 0; k < d.n_climate(); ++k) m += s.b_climate[k] * d.climate[k](i, t);
  return m;
}

// Region i's bent cable at year index t (incoming slope on centred time).
inline double cable_mean(const PanelData& d, const ParamState& s, int i, int t) {
  return s.alpha1[i] * d.centered_time(t) +
         s.alpha2[i] * bend_kernel_unchecked(d.years[t], s.tau[i], std::exp(s.log_gamma[i]));
}

// Cable with explicit parameters on a calendar-year argument, using the same
// time centring as cable_mean.
inline double cable_at(double year, double time_origin, double alpha1, double alpha2, double tau,
                       double gamma) {
  return alpha1 * (year - time_origin) + alpha2 * bend_kernel_unchecked(year, tau, gamma);
}

// Gaussian log-likelihood over observed cells. Throws ConfigError on a
// dimension mismatch and NumericalError naming the first non-finite cell.
double log_likelihood(const PanelData& data, const ParamState& s);

struct PriorTerm {
  std::string name;
  double value;
};

// Per-layer prior contributions; their sum is log_prior. Precisions carry a
// Gamma(shape, rate) density on the precision scale.
std::vector<PriorTerm> log_prior_terms(const ParamState& s, const HyperConfig& h, const SpatialWeights& w);

// -infinity for any non-positive or non-finite sd.
double log_prior(const ParamState& s, const HyperConfig& h, const SpatialWeights& w);

double log_posterior(const PanelData& data, const ParamState& s, const HyperConfig& h,
                     const SpatialWeights& w);

double normal_log_density(double x, double mean, double var);
double gamma_log_density(double x, double shape, double rate);

// Flat, named view of ParamState used for traces and sample files.
class ParamLayout {
 public:
  ParamLayout() = default;
  ParamLayout(const PanelData& data, GammaMode mode);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  // -1 when absent.
  int index_of(const std::string& name) const;
  // Population-level parameters (no region or year subscript).
  bool is_population(std::size_t k) const { return k < n_population_; }
  std::size_t n_population() const noexcept { return n_population_; }
  GammaMode mode() const noexcept { return mode_; }
  int n_regions() const noexcept { return nr_; }
  int n_years() const noexcept { return nt_; }
  int n_spatial() const noexcept { return ks_; }
  int n_temporal() const noexcept { return ke_; }
  int n_climate() const noexcept { return kc_; }

  std::vector<double> flatten(const ParamState& s) const;
  void flatten_into(const ParamState& s, double* out) const;
  ParamState unflatten(const double* values) const;

  // Offsets of each block.
  // sigma_gamma is -1 in common mode, where it is not a model parameter.
  int b0 = -1, b_spatial = -1, b_temporal = -1, b_climate = -1, a1 = -1, a2 = -1, tbar = -1,
      lgamma = -1, v = -1, sigma_tau = -1, sigma_gamma = -1, sigma1 = -1, sigma2 = -1,
      sigma10 = -1, sigma20 = -1, alpha1 = -1, alpha2 = -1, tau = -1, log_gamma = -1,
      beta10 = -1, beta20 = -1;

  // Rebuilds a layout from a stored name list (e.g. a sample file header).
  // Throws ConfigError when the names are not a layout this class produces.
  static ParamLayout from_names(const std::vector<std::string>& names);

  const std::vector<std::string>& region_ids() const noexcept { return regions_; }
  const std::vector<int>& years() const noexcept { return years_; }

 private:
  void build(const std::vector<std::string>& spatial, const std::vector<std::string>& temporal,
             const std::vector<std::string>& climate, const std::vector<std::string>& regions,
             const std::vector<int>& years, GammaMode mode);
  std::vector<std::string> names_;
  std::vector<std::string> regions_;
  std::vector<int> years_;
  std::size_t n_population_ = 0;
  GammaMode mode_ = GammaMode::common;
  int nr_ = 0, nt_ = 0, ks_ = 0, ke_ = 0, kc_ = 0;
};

}  // namespace bentcable
