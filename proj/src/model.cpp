#include "bentcable/model.hpp"

#include <charconv>
#include <limits>
#include <numbers>

#include "bentcable/errors.hpp"
#include "bentcable/kernels.hpp"

namespace bentcable {

const char* to_string(GammaMode m) { return m == GammaMode::common ? "common" : "per_region"; }

GammaMode gamma_mode_from_string(const std::string& s) {
  if (s == "common") return GammaMode::common;
  if (s == "per_region") return GammaMode::per_region;
  throw ConfigError("unknown gamma mode '" + s + "'");
}

void HyperConfig::validate() const {
  auto pos = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(name) + " must be positive");
  };
  auto fin = [](double x, const char* name) {
    if (!std::isfinite(x)) throw ConfigError(std::string(name) + " must be finite");
  };
  fin(m1_intercept, "m1_intercept");
  fin(m1_slope, "m1_slope");
  fin(m2_bend, "m2_bend");
  fin(lgamma_mean, "lgamma_mean");
  pos(u_intercept, "u_intercept");
  pos(u_slope, "u_slope");
  pos(var_bend_mean, "var_bend_mean");
  pos(lgamma_var, "lgamma_var");
  pos(precision_shape, "precision_shape");
  pos(precision_rate, "precision_rate");
}

ParamState ParamState::zeros(const PanelData& d) {
  ParamState s;
  s.b_spatial = Eigen::VectorXd::Zero(d.n_spatial());
  s.b_temporal = Eigen::VectorXd::Zero(d.n_temporal());
  s.b_climate = Eigen::VectorXd::Zero(d.n_climate());
  const int nr = d.n_regions();
  s.alpha1 = Eigen::VectorXd::Zero(nr);
  s.alpha2 = Eigen::VectorXd::Zero(nr);
  s.tau = Eigen::VectorXd::Constant(nr, d.time_origin);
  s.log_gamma = Eigen::VectorXd::Zero(nr);
  s.beta10 = Eigen::VectorXd::Zero(nr);
  s.beta20 = Eigen::VectorXd::Zero(d.n_years());
  s.tbar = d.time_origin;
  return s;
}

void check_dimensions(const PanelData& d, const ParamState& s) {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("parameter state: ") + what + " does not match the panel");
  };
  const Eigen::Index nr = d.n_regions();
  req(s.b_spatial.size() == d.n_spatial(), "b_spatial");
  req(s.b_temporal.size() == d.n_temporal(), "b_temporal");
  req(s.b_climate.size() == d.n_climate(), "b_climate");
  req(s.alpha1.size() == nr, "alpha1");
  req(s.alpha2.size() == nr, "alpha2");
  req(s.tau.size() == nr, "tau");
  req(s.log_gamma.size() == nr, "log_gamma");
  req(s.beta10.size() == nr, "beta10");
  req(s.beta20.size() == d.n_years(), "beta20");
}

double log_likelihood(const PanelData& data, const ParamState& s) {
  check_dimensions(data, s);
  kernels::RegionResiduals res;
  kernels::omp::region_residuals(data, s, res);
  const double ss = res.total_ss();
  const int n = res.total_count();
  if (!std::isfinite(ss)) {
    for (int i = 0; i < data.n_regions(); ++i) {
      for (int t = 0; t < data.n_years(); ++t) {
        if (!data.observed(i, t)) continue;
        double r = data.y(i, t) - fixed_mean(data, s, i, t) - cable_mean(data, s, i, t);
        if (!std::isfinite(r)) {
          throw NumericalError("non-finite residual at region " + data.region_ids[i] + ", year " +
                               std::to_string(data.years[t]));
        }
      }
    }
    throw NumericalError("non-finite residual sum of squares");
  }
  const double v2 = s.v * s.v;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * v2) - ss / (2.0 * v2);
}

double normal_log_density(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

double gamma_log_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

namespace {

bool valid_sd(double s) { return s > 0.0 && std::isfinite(s); }

}  // namespace

std::vector<PriorTerm> log_prior_terms(const ParamState& s, const HyperConfig& h, const SpatialWeights& w) {
  std::vector<PriorTerm> terms;
  const bool per_region = h.mode_gamma == GammaMode::per_region;

  double fixed = normal_log_density(s.b0, h.m1_intercept, h.u_intercept);
  for (auto* v : {&s.b_spatial, &s.b_temporal, &s.b_climate}) {
    for (Eigen::Index k = 0; k < v->size(); ++k) fixed += normal_log_density((*v)[k], h.m1_slope, h.u_slope);
  }
  terms.push_back({"fixed_effects", fixed});
  terms.push_back({"a1", normal_log_density(s.a1, h.m1_slope, h.u_slope)});
  terms.push_back({"a2", normal_log_density(s.a2, h.m1_slope, h.u_slope)});
  terms.push_back({"tbar", normal_log_density(s.tbar, h.m2_bend, h.var_bend_mean)});
  terms.push_back({"lgamma", normal_log_density(s.lgamma, h.lgamma_mean, h.lgamma_var)});

  const double ninf = -std::numeric_limits<double>::infinity();
  auto layer = [&](const char* name, const Eigen::VectorXd& x, double mean, double sd) {
    if (!valid_sd(sd)) {
      terms.push_back({name, ninf});
      return;
    }
    double acc = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) acc += normal_log_density(x[k], mean, sd * sd);
    terms.push_back({name, acc});
  };
  layer("alpha1", s.alpha1, s.a1, s.sigma1);
  layer("alpha2", s.alpha2, s.a2, s.sigma2);
  layer("tau", s.tau, s.tbar, s.sigma_tau);
  if (per_region) layer("log_gamma", s.log_gamma, s.lgamma, s.sigma_gamma);
  layer("beta20", s.beta20, 0.0, s.sigma20);
  terms.push_back({"beta10", valid_sd(s.sigma10) ? car_log_density(s.beta10, w, s.sigma10) : ninf});

  auto precision = [&](const char* name, double sd) {
    terms.push_back({name, valid_sd(sd) ? gamma_log_density(1.0 / (sd * sd), h.precision_shape, h.precision_rate)
                                        : ninf});
  };
  precision("precision_v", s.v);
  precision("precision_tau", s.sigma_tau);
  if (per_region) precision("precision_gamma", s.sigma_gamma);
  precision("precision_1", s.sigma1);
  precision("precision_2", s.sigma2);
  precision("precision_10", s.sigma10);
  precision("precision_20", s.sigma20);
  return terms;
}

double log_prior(const ParamState& s, const HyperConfig& h, const SpatialWeights& w) {
  double total = 0.0;
  for (const auto& t : log_prior_terms(s, h, w)) total += t.value;
  return total;
}

double log_posterior(const PanelData& data, const ParamState& s, const HyperConfig& h,
                     const SpatialWeights& w) {
  const double lp = log_prior(s, h, w);
  if (!std::isfinite(lp)) return lp;
  return log_likelihood(data, s) + lp;
}

// ---- layout ----

ParamLayout::ParamLayout(const PanelData& data, GammaMode mode) {
  build(data.spatial_names, data.temporal_names, data.climate_names, data.region_ids, data.years, mode);
}

void ParamLayout::build(const std::vector<std::string>& spatial, const std::vector<std::string>& temporal,
                        const std::vector<std::string>& climate, const std::vector<std::string>& regions,
                        const std::vector<int>& years, GammaMode mode) {
  mode_ = mode;
  regions_ = regions;
  years_ = years;
  nr_ = static_cast<int>(regions.size());
  nt_ = static_cast<int>(years.size());
  ks_ = static_cast<int>(spatial.size());
  ke_ = static_cast<int>(temporal.size());
  kc_ = static_cast<int>(climate.size());
  names_.clear();
  auto add = [&](const std::string& n) {
    names_.push_back(n);
    return static_cast<int>(names_.size()) - 1;
  };
  b0 = add("b0");
  b_spatial = static_cast<int>(names_.size());
  for (const auto& n : spatial) add("b_spatial[" + n + "]");
  b_temporal = static_cast<int>(names_.size());
  for (const auto& n : temporal) add("b_temporal[" + n + "]");
  b_climate = static_cast<int>(names_.size());
  for (const auto& n : climate) add("b_climate[" + n + "]");
  a1 = add("a1");
  a2 = add("a2");
  tbar = add("tbar");
  lgamma = add("lgamma");
  v = add("v");
  sigma_tau = add("sigma_tau");
  sigma_gamma = mode == GammaMode::per_region ? add("sigma_gamma") : -1;
  sigma1 = add("sigma1");
  sigma2 = add("sigma2");
  sigma10 = add("sigma10");
  sigma20 = add("sigma20");
  n_population_ = names_.size();
  alpha1 = static_cast<int>(names_.size());
  for (const auto& r : regions) add("alpha1[" + r + "]");
  alpha2 = static_cast<int>(names_.size());
  for (const auto& r : regions) add("alpha2[" + r + "]");
  tau = static_cast<int>(names_.size());
  for (const auto& r : regions) add("tau[" + r + "]");
  log_gamma = static_cast<int>(names_.size());
  for (const auto& r : regions) add("log_gamma[" + r + "]");
  beta10 = static_cast<int>(names_.size());
  for (const auto& r : regions) add("beta10[" + r + "]");
  beta20 = static_cast<int>(names_.size());
  for (int y : years) add("beta20[" + std::to_string(y) + "]");
}

int ParamLayout::index_of(const std::string& name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return static_cast<int>(k);
  }
  return -1;
}

void ParamLayout::flatten_into(const ParamState& s, double* out) const {
  out[b0] = s.b0;
  for (int k = 0; k < ks_; ++k) out[b_spatial + k] = s.b_spatial[k];
  for (int k = 0; k < ke_; ++k) out[b_temporal + k] = s.b_temporal[k];
  for (int k = 0; k < kc_; ++k) out[b_climate + k] = s.b_climate[k];
  out[a1] = s.a1;
  out[a2] = s.a2;
  out[tbar] = s.tbar;
  out[lgamma] = s.lgamma;
  out[v] = s.v;
  out[sigma_tau] = s.sigma_tau;
  if (sigma_gamma >= 0) out[sigma_gamma] = s.sigma_gamma;
  out[sigma1] = s.sigma1;
  out[sigma2] = s.sigma2;
  out[sigma10] = s.sigma10;
  out[sigma20] = s.sigma20;
  for (int i = 0; i < nr_; ++i) {
    out[alpha1 + i] = s.alpha1[i];
    out[alpha2 + i] = s.alpha2[i];
    out[tau + i] = s.tau[i];
    out[log_gamma + i] = s.log_gamma[i];
    out[beta10 + i] = s.beta10[i];
  }
  for (int t = 0; t < nt_; ++t) out[beta20 + t] = s.beta20[t];
}

std::vector<double> ParamLayout::flatten(const ParamState& s) const {
  std::vector<double> out(size());
  flatten_into(s, out.data());
  return out;
}

ParamState ParamLayout::unflatten(const double* x) const {
  ParamState s;
  s.b0 = x[b0];
  s.b_spatial = Eigen::Map<const Eigen::VectorXd>(x + b_spatial, ks_);
  s.b_temporal = Eigen::Map<const Eigen::VectorXd>(x + b_temporal, ke_);
  s.b_climate = Eigen::Map<const Eigen::VectorXd>(x + b_climate, kc_);
  s.a1 = x[a1];
  s.a2 = x[a2];
  s.tbar = x[tbar];
  s.lgamma = x[lgamma];
  s.v = x[v];
  s.sigma_tau = x[sigma_tau];
  s.sigma_gamma = sigma_gamma >= 0 ? x[sigma_gamma] : 1.0;
  s.sigma1 = x[sigma1];
  s.sigma2 = x[sigma2];
  s.sigma10 = x[sigma10];
  s.sigma20 = x[sigma20];
  s.alpha1 = Eigen::Map<const Eigen::VectorXd>(x + alpha1, nr_);
  s.alpha2 = Eigen::Map<const Eigen::VectorXd>(x + alpha2, nr_);
  s.tau = Eigen::Map<const Eigen::VectorXd>(x + tau, nr_);
  s.log_gamma = Eigen::Map<const Eigen::VectorXd>(x + log_gamma, nr_);
  s.beta10 = Eigen::Map<const Eigen::VectorXd>(x + beta10, nr_);
  s.beta20 = Eigen::Map<const Eigen::VectorXd>(x + beta20, nt_);
  return s;
}

ParamLayout ParamLayout::from_names(const std::vector<std::string>& names) {
  auto inner = [](const std::string& n, const std::string& prefix) -> std::optional<std::string> {
    if (n.size() > prefix.size() + 2 && n.compare(0, prefix.size(), prefix) == 0 && n[prefix.size()] == '[' &&
        n.back() == ']') {
      return n.substr(prefix.size() + 1, n.size() - prefix.size() - 2);
    }
    return std::nullopt;
  };
  std::vector<std::string> spatial, temporal, climate, regions;
  std::vector<int> years;
  bool per_region = false;
  for (const auto& n : names) {
    if (n == "sigma_gamma") per_region = true;
    if (auto x = inner(n, "b_spatial")) spatial.push_back(*x);
    if (auto x = inner(n, "b_temporal")) temporal.push_back(*x);
    if (auto x = inner(n, "b_climate")) climate.push_back(*x);
    if (auto x = inner(n, "alpha1")) regions.push_back(*x);
    if (auto x = inner(n, "beta20")) {
      int y = 0;
      auto [p, ec] = std::from_chars(x->data(), x->data() + x->size(), y);
      if (ec != std::errc() || p != x->data() + x->size()) throw ConfigError("bad year in column " + n);
      years.push_back(y);
    }
  }
  ParamLayout l;
  l.build(spatial, temporal, climate, regions, years, per_region ? GammaMode::per_region : GammaMode::common);
  if (l.names_ != names) throw ConfigError("parameter names do not form a valid layout");
  return l;
}

}  // namespace bentcable
