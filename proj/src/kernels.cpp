#include "bentcable/kernels.hpp"

#include <cmath>
#include <limits>

namespace bentcable::kernels {

double RegionResiduals::total_ss() const {
  double s = 0.0;
  for (double x : ss) s += x;
  return s;
}

int RegionResiduals::total_count() const {
  int n = 0;
  for (int c : count) n += c;
  return n;
}

namespace {

void prepare(const PanelData& data, RegionResiduals& out) {
  out.ss.assign(data.n_regions(), 0.0);
  out.count.assign(data.n_regions(), 0);
}

inline void residuals_for_region(const PanelData& data, const ParamState& s, int i, RegionResiduals& out) {
  double ss = 0.0;
  int n = 0;
  for (int t = 0; t < data.n_years(); ++t) {
    if (!data.observed(i, t)) continue;
    double r = data.y(i, t) - fixed_mean(data, s, i, t) - cable_mean(data, s, i, t);
    ss += r * r;
    ++n;
  }
  out.ss[i] = ss;
  out.count[i] = n;
}

// Observed cells of one region with the non-cable mean removed.
struct RegionCells {
  std::vector<double> r, year, ctime;

  void fill(const PanelData& data, const ParamState& s, int i) {
    r.clear();
    year.clear();
    ctime.clear();
    for (int t = 0; t < data.n_years(); ++t) {
      if (!data.observed(i, t)) continue;
      r.push_back(data.y(i, t) - fixed_mean(data, s, i, t));
      year.push_back(data.years[t]);
      ctime.push_back(data.centered_time(t));
    }
  }
};

// Gaussian full conditional of (alpha1_i, alpha2_i) in information form.
struct SlopePosterior {
  double p11, p12, p22, b1, b2;

  SlopePosterior(const RegionCells& c, const ParamState& s, double tau, double gamma) {
    double scc = 0.0, scq = 0.0, sqq = 0.0, scr = 0.0, sqr = 0.0;
    for (std::size_t k = 0; k < c.r.size(); ++k) {
      const double q = bend_kernel_unchecked(c.year[k], tau, gamma);
      scc += c.ctime[k] * c.ctime[k];
      scq += c.ctime[k] * q;
      sqq += q * q;
      scr += c.ctime[k] * c.r[k];
      sqr += q * c.r[k];
    }
    const double iv2 = 1.0 / (s.v * s.v);
    const double i1 = 1.0 / (s.sigma1 * s.sigma1);
    const double i2 = 1.0 / (s.sigma2 * s.sigma2);
    p11 = scc * iv2 + i1;
    p12 = scq * iv2;
    p22 = sqq * iv2 + i2;
    b1 = scr * iv2 + s.a1 * i1;
    b2 = sqr * iv2 + s.a2 * i2;
  }

  double det() const { return p11 * p22 - p12 * p12; }

  // log of the integral over the slopes, up to (tau, gamma)-free terms.
  double log_marginal() const {
    const double d = det();
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    return 0.5 * (p22 * b1 * b1 - 2.0 * p12 * b1 * b2 + p11 * b2 * b2) / d - 0.5 * std::log(d);
  }

  void draw(double& a1, double& a2, Rng& rng) const {
    const double d = det();
    const double m1 = (p22 * b1 - p12 * b2) / d;
    const double m2 = (p11 * b2 - p12 * b1) / d;
    // Cholesky P = L L'; a = m + L'^{-1} z.
    const double l11 = std::sqrt(p11);
    const double l21 = p12 / l11;
    const double l22 = std::sqrt(p22 - l21 * l21);
    const double z1 = std_normal(rng);
    const double z2 = std_normal(rng);
    const double x2 = z2 / l22;
    const double x1 = (z1 - l21 * x2) / l11;
    a1 = m1 + x1;
    a2 = m2 + x2;
  }
};

// Metropolis updates of tau_i and (per-region mode) log gamma_i.
void update_region_bend(const PanelData& data, ParamState& s, int i, Rng& rng, RegionBendTuning& tun,
                        const BendSweepConfig& cfg, RegionCells& cells) {
  const bool do_tau = cfg.tau_free[i] != 0;
  const bool do_lg = !cfg.log_gamma_free.empty() && cfg.log_gamma_free[i] != 0;
  if (!do_tau && !do_lg) return;
  const bool collapse = cfg.use_likelihood && !cfg.collapse.empty() && cfg.collapse[i] != 0;

  if (cfg.use_likelihood) cells.fill(data, s, i);
  const double a2 = s.alpha2[i];
  const double inv2v2 = 1.0 / (2.0 * s.v * s.v);
  auto loglik = [&](double tau, double gamma) {
    if (!cfg.use_likelihood) return 0.0;
    if (collapse) return SlopePosterior(cells, s, tau, gamma).log_marginal();
    double ss = 0.0;
    for (std::size_t k = 0; k < cells.r.size(); ++k) {
      double r = cells.r[k] - s.alpha1[i] * cells.ctime[k] - a2 * bend_kernel_unchecked(cells.year[k], tau, gamma);
      ss += r * r;
    }
    return -ss * inv2v2;
  };

  double cur_ll = loglik(s.tau[i], std::exp(s.log_gamma[i]));

  if (do_tau) {
    const double prec = 1.0 / (s.sigma_tau * s.sigma_tau);
    const double cur = s.tau[i];
    const double prop = cur + tun.tau_step * std_normal(rng);
    const double prop_ll = loglik(prop, std::exp(s.log_gamma[i]));
    double log_ratio = prop_ll - cur_ll;
    if (cfg.use_prior) {
      log_ratio += -0.5 * prec * ((prop - s.tbar) * (prop - s.tbar) - (cur - s.tbar) * (cur - s.tbar));
    }
    const bool accept = std::isfinite(prop_ll) && std::log(uniform01(rng)) < log_ratio;
    ++tun.tau_proposed;
    if (accept) {
      s.tau[i] = prop;
      cur_ll = prop_ll;
      ++tun.tau_accepted;
    }
    if (cfg.adapting) adapt_step(tun.tau_step, tun.tau_adapt_count, accept, cfg.target_acceptance);
  }

  if (do_lg) {
    const double prec = 1.0 / (s.sigma_gamma * s.sigma_gamma);
    const double cur = s.log_gamma[i];
    const double prop = cur + tun.log_gamma_step * std_normal(rng);
    const double prop_ll = loglik(s.tau[i], std::exp(prop));
    double log_ratio = prop_ll - cur_ll;
    if (cfg.use_prior) {
      log_ratio += -0.5 * prec * ((prop - s.lgamma) * (prop - s.lgamma) - (cur - s.lgamma) * (cur - s.lgamma));
    }
    const bool accept = std::isfinite(prop_ll) && std::log(uniform01(rng)) < log_ratio;
    ++tun.log_gamma_proposed;
    if (accept) {
      s.log_gamma[i] = prop;
      ++tun.log_gamma_accepted;
    }
    if (cfg.adapting) {
      adapt_step(tun.log_gamma_step, tun.log_gamma_adapt_count, accept, cfg.target_acceptance);
    }
  }

  if (collapse) {
    SlopePosterior(cells, s, s.tau[i], std::exp(s.log_gamma[i])).draw(s.alpha1[i], s.alpha2[i], rng);
  }
}

}  // namespace

double collapsed_loglik(const PanelData& data, const ParamState& s, int i, double tau, double gamma) {
  RegionCells cells;
  cells.fill(data, s, i);
  return SlopePosterior(cells, s, tau, gamma).log_marginal();
}

namespace serial {

void region_residuals(const PanelData& data, const ParamState& s, RegionResiduals& out) {
  prepare(data, out);
  for (int i = 0; i < data.n_regions(); ++i) residuals_for_region(data, s, i, out);
}

void bend_sweep(const PanelData& data, ParamState& s, std::span<Rng> region_rngs,
                std::span<RegionBendTuning> tuning, const BendSweepConfig& cfg) {
  RegionCells cells;
  for (int i = 0; i < data.n_regions(); ++i) update_region_bend(data, s, i, region_rngs[i], tuning[i], cfg, cells);
}

}  // namespace serial

namespace omp {

void region_residuals(const PanelData& data, const ParamState& s, RegionResiduals& out) {
  prepare(data, out);
  const int nr = data.n_regions();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nr; ++i) residuals_for_region(data, s, i, out);
}

// Each region touches only its own tau, log_gamma, slopes, engine and
// tuning slot, so regions update independently.
void bend_sweep(const PanelData& data, ParamState& s, std::span<Rng> region_rngs,
                std::span<RegionBendTuning> tuning, const BendSweepConfig& cfg) {
  const int nr = data.n_regions();
#pragma omp parallel
  {
    RegionCells cells;
#pragma omp for schedule(static)
    for (int i = 0; i < nr; ++i) update_region_bend(data, s, i, region_rngs[i], tuning[i], cfg, cells);
  }
}

}  // namespace omp

void region_residuals(Backend b, const PanelData& data, const ParamState& s, RegionResiduals& out) {
  if (b == Backend::openmp) {
    omp::region_residuals(data, s, out);
  } else {
    serial::region_residuals(data, s, out);
  }
}

void bend_sweep(Backend b, const PanelData& data, ParamState& s, std::span<Rng> region_rngs,
                std::span<RegionBendTuning> tuning, const BendSweepConfig& cfg) {
  if (b == Backend::openmp) {
    omp::bend_sweep(data, s, region_rngs, tuning, cfg);
  } else {
    serial::bend_sweep(data, s, region_rngs, tuning, cfg);
  }
}

}  // namespace bentcable::kernels
