#include "bentcable/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include <omp.h>

#include "bentcable/errors.hpp"

namespace bentcable {

ChainSampler::ChainSampler(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
                           ParamState init, std::uint64_t seed, int chain_index, SamplerOptions options)
    : data_(data),
      hyper_(hyper),
      weights_(weights),
      options_(std::move(options)),
      layout_(data, hyper.mode_gamma),
      state_(std::move(init)),
      rng_(make_rng({seed, static_cast<std::uint64_t>(chain_index), 0})) {
  check_dimensions(data_, state_);
  if (weights_.n_regions() != data_.n_regions()) throw ConfigError("spatial weights do not match the panel");
  if (!options_.free.empty() && options_.free.size() != layout_.size()) {
    throw ConfigError("free mask has the wrong length");
  }
  const int nr = data_.n_regions();
  region_rngs_.reserve(nr);
  for (int i = 0; i < nr; ++i) {
    region_rngs_.push_back(
        make_rng({seed, static_cast<std::uint64_t>(chain_index), 1, static_cast<std::uint64_t>(i)}));
  }
  kernels::RegionBendTuning tun;
  tun.tau_step = options_.initial_tau_step;
  tun.log_gamma_step = options_.initial_log_gamma_step;
  tuning_.assign(nr, tun);

  const bool per_region = hyper_.mode_gamma == GammaMode::per_region;
  tau_free_.resize(nr);
  log_gamma_free_.assign(nr, 0);
  for (int i = 0; i < nr; ++i) {
    tau_free_[i] = is_free(layout_.tau + i);
    if (per_region) log_gamma_free_[i] = is_free(layout_.log_gamma + i);
  }
  if (!per_region) state_.log_gamma.setConstant(state_.lgamma);
  collapse_.assign(nr, 0);
  for (int i = 0; i < nr; ++i) {
    collapse_[i] = options_.collapse_slopes && is_free(layout_.alpha1 + i) && is_free(layout_.alpha2 + i);
  }
  tau_shift_.step = options_.initial_tau_step;
  lg_shift_.step = options_.initial_log_gamma_step;

  const int ks = data_.n_spatial(), ke = data_.n_temporal(), kc = data_.n_climate();
  lin_bs_ = 1;
  lin_be_ = lin_bs_ + ks;
  lin_bc_ = lin_be_ + ke;
  lin_a1_ = lin_bc_ + kc;
  lin_a2_ = lin_a1_ + nr;
  lin_b10_ = lin_a2_ + nr;
  lin_b20_ = lin_b10_ + nr;
  lin_dim_ = lin_b20_ + data_.n_years();
  lin_layout_.resize(lin_dim_);
  lin_layout_[0] = layout_.b0;
  for (int k = 0; k < ks; ++k) lin_layout_[lin_bs_ + k] = layout_.b_spatial + k;
  for (int k = 0; k < ke; ++k) lin_layout_[lin_be_ + k] = layout_.b_temporal + k;
  for (int k = 0; k < kc; ++k) lin_layout_[lin_bc_ + k] = layout_.b_climate + k;
  for (int i = 0; i < nr; ++i) {
    lin_layout_[lin_a1_ + i] = layout_.alpha1 + i;
    lin_layout_[lin_a2_ + i] = layout_.alpha2 + i;
    lin_layout_[lin_b10_ + i] = layout_.beta10 + i;
  }
  for (int t = 0; t < data_.n_years(); ++t) lin_layout_[lin_b20_ + t] = layout_.beta20 + t;

  bool all_linear = is_free(layout_.a1) && is_free(layout_.a2) && options_.center_beta10;
  for (int j : lin_layout_) all_linear = all_linear && is_free(j);
  if (options_.shift_moves && options_.bend_use_likelihood && all_linear) marginal_.emplace(data_, hyper_, weights_);
  ShiftWalk rw;
  rw.step = options_.initial_tau_step;
  region_tau_walk_.assign(nr, rw);
  rw.step = options_.initial_log_gamma_step;
  region_lg_walk_.assign(nr, rw);
  for (auto& w : sd_walk_) w.step = 0.1;
}

bool ChainSampler::is_free(int layout_index) const {
  if (layout_index < 0) return false;
  return options_.free.empty() || options_.free[layout_index] != 0;
}

void ChainSampler::gibbs_linear_block() {
  ParamState& s = state_;
  const int nr = data_.n_regions();
  const int nt = data_.n_years();
  const int ks = data_.n_spatial(), ke = data_.n_temporal(), kc = data_.n_climate();

  // Current coefficient values.
  Eigen::VectorXd theta(lin_dim_);
  theta[0] = s.b0;
  theta.segment(lin_bs_, ks) = s.b_spatial;
  theta.segment(lin_be_, ke) = s.b_temporal;
  theta.segment(lin_bc_, kc) = s.b_climate;
  theta.segment(lin_a1_, nr) = s.alpha1;
  theta.segment(lin_a2_, nr) = s.alpha2;
  theta.segment(lin_b10_, nr) = s.beta10;
  theta.segment(lin_b20_, nt) = s.beta20;

  std::vector<int> pos(lin_dim_, -1);
  std::vector<int> free_idx;
  for (int j = 0; j < lin_dim_; ++j) {
    // A single region's CAR effect is pinned at zero by the sum constraint.
    if (nr == 1 && j == lin_b10_) continue;
    if (is_free(lin_layout_[j])) {
      pos[j] = static_cast<int>(free_idx.size());
      free_idx.push_back(j);
    }
  }
  const int nf = static_cast<int>(free_idx.size());
  if (nf > 0) {
    Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(nf, nf);
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(nf);
    const double inv_v2 = 1.0 / (s.v * s.v);

    // Likelihood: each observed cell contributes x x' / v^2 and x r / v^2,
    // where r removes the frozen part of the mean.
    std::vector<int> idx;
    std::vector<double> x;
    std::vector<int> fpos;
    std::vector<double> fx;
    for (int i = 0; i < nr; ++i) {
      const double gamma_i = std::exp(s.log_gamma[i]);
      for (int t = 0; t < nt; ++t) {
        if (!data_.observed(i, t)) continue;
        idx.clear();
        x.clear();
        idx.push_back(0);
        x.push_back(1.0);
        for (int k = 0; k < ks; ++k) {
          idx.push_back(lin_bs_ + k);
          x.push_back(data_.spatial(i, k));
        }
        for (int k = 0; k < ke; ++k) {
          idx.push_back(lin_be_ + k);
          x.push_back(data_.temporal(t, k));
        }
        for (int k = 0; k < kc; ++k) {
          idx.push_back(lin_bc_ + k);
          x.push_back(data_.climate[k](i, t));
        }
        idx.push_back(lin_a1_ + i);
        x.push_back(data_.centered_time(t));
        idx.push_back(lin_a2_ + i);
        x.push_back(bend_kernel_unchecked(data_.years[t], s.tau[i], gamma_i));
        idx.push_back(lin_b10_ + i);
        x.push_back(1.0);
        idx.push_back(lin_b20_ + t);
        x.push_back(1.0);

        double r = data_.y(i, t);
        fpos.clear();
        fx.clear();
        for (std::size_t e = 0; e < idx.size(); ++e) {
          if (pos[idx[e]] >= 0) {
            fpos.push_back(pos[idx[e]]);
            fx.push_back(x[e]);
          } else {
            r -= x[e] * theta[idx[e]];
          }
        }
        for (std::size_t a = 0; a < fpos.size(); ++a) {
          lin[fpos[a]] += fx[a] * r * inv_v2;
          for (std::size_t b = 0; b < fpos.size(); ++b) prec(fpos[a], fpos[b]) += fx[a] * fx[b] * inv_v2;
        }
      }
    }

    // Priors.
    auto diag_prior = [&](int j, double mean, double var) {
      if (pos[j] < 0) return;
      prec(pos[j], pos[j]) += 1.0 / var;
      lin[pos[j]] += mean / var;
    };
    diag_prior(0, hyper_.m1_intercept, hyper_.u_intercept);
    for (int k = 0; k < ks + ke + kc; ++k) diag_prior(lin_bs_ + k, hyper_.m1_slope, hyper_.u_slope);
    for (int i = 0; i < nr; ++i) {
      diag_prior(lin_a1_ + i, s.a1, s.sigma1 * s.sigma1);
      diag_prior(lin_a2_ + i, s.a2, s.sigma2 * s.sigma2);
    }
    for (int t = 0; t < nt; ++t) diag_prior(lin_b20_ + t, 0.0, s.sigma20 * s.sigma20);
    const double inv_s10 = 1.0 / (s.sigma10 * s.sigma10);
    for (int i = 0; i < nr; ++i) {
      const int pi = pos[lin_b10_ + i];
      if (pi < 0) continue;
      prec(pi, pi) += weights_.total_weight(i) * inv_s10;
      for (const auto& nb : weights_.neighbors(i)) {
        const int pj = pos[lin_b10_ + nb.region];
        if (pj >= 0) {
          prec(pi, pj) -= nb.weight * inv_s10;
        } else {
          lin[pi] += nb.weight * s.beta10[nb.region] * inv_s10;
        }
      }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) {
      std::string what = nf == 1 ? layout_.names()[lin_layout_[free_idx[0]]] : "linear coefficient block";
      throw NumericalError("singular conditional precision for " + what);
    }
    Eigen::VectorXd mean = llt.solve(lin);
    Eigen::VectorXd z(nf);
    for (int k = 0; k < nf; ++k) z[k] = std_normal(rng_);
    Eigen::VectorXd draw = mean + llt.matrixU().solve(z);

    bool all_b10_free = nr > 1;
    for (int i = 0; i < nr && all_b10_free; ++i) all_b10_free = pos[lin_b10_ + i] >= 0;
    if (all_b10_free && options_.center_beta10) {
      // Condition the joint draw on sum(beta10) = 0.
      Eigen::VectorXd a = Eigen::VectorXd::Zero(nf);
      for (int i = 0; i < nr; ++i) a[pos[lin_b10_ + i]] = 1.0;
      Eigen::VectorXd pa = llt.solve(a);
      draw -= pa * (a.dot(draw) / a.dot(pa));
    }
    for (int k = 0; k < nf; ++k) theta[free_idx[k]] = draw[k];

    s.b0 = theta[0];
    s.b_spatial = theta.segment(lin_bs_, ks);
    s.b_temporal = theta.segment(lin_be_, ke);
    s.b_climate = theta.segment(lin_bc_, kc);
    s.alpha1 = theta.segment(lin_a1_, nr);
    s.alpha2 = theta.segment(lin_a2_, nr);
    s.beta10 = theta.segment(lin_b10_, nr);
    s.beta20 = theta.segment(lin_b20_, nt);
    if (all_b10_free && options_.center_beta10) s.beta10.array() -= s.beta10.mean();
    if (nr == 1) s.beta10.setZero();
  }

  // Conjugate updates of the population means.
  auto normal_mean = [&](const Eigen::VectorXd& x, double sd, double prior_mean, double prior_var) {
    const double p = x.size() / (sd * sd) + 1.0 / prior_var;
    const double m = (x.sum() / (sd * sd) + prior_mean / prior_var) / p;
    return m + std_normal(rng_) / std::sqrt(p);
  };
  if (is_free(layout_.a1)) s.a1 = normal_mean(s.alpha1, s.sigma1, hyper_.m1_slope, hyper_.u_slope);
  if (is_free(layout_.a2)) s.a2 = normal_mean(s.alpha2, s.sigma2, hyper_.m1_slope, hyper_.u_slope);
  if (is_free(layout_.tbar)) s.tbar = normal_mean(s.tau, s.sigma_tau, hyper_.m2_bend, hyper_.var_bend_mean);
  if (hyper_.mode_gamma == GammaMode::per_region && is_free(layout_.lgamma)) {
    s.lgamma = normal_mean(s.log_gamma, s.sigma_gamma, hyper_.lgamma_mean, hyper_.lgamma_var);
  }
}

double ChainSampler::draw_precision(double n, double ss) {
  if (ss < 0.0) throw NumericalError("negative sum of squares in variance block");
  return gamma_shape_rate(rng_, hyper_.precision_shape + 0.5 * n, hyper_.precision_rate + 0.5 * ss);
}

void ChainSampler::gibbs_variance_block() {
  ParamState& s = state_;
  const double nr = data_.n_regions();
  auto to_sd = [](double precision) { return 1.0 / std::sqrt(precision); };
  if (is_free(layout_.v)) {
    kernels::RegionResiduals res;
    kernels::region_residuals(options_.backend, data_, s, res);
    s.v = to_sd(draw_precision(res.total_count(), res.total_ss()));
  }
  if (is_free(layout_.sigma1)) s.sigma1 = to_sd(draw_precision(nr, (s.alpha1.array() - s.a1).square().sum()));
  if (is_free(layout_.sigma2)) s.sigma2 = to_sd(draw_precision(nr, (s.alpha2.array() - s.a2).square().sum()));
  if (is_free(layout_.sigma_tau)) {
    s.sigma_tau = to_sd(draw_precision(nr, (s.tau.array() - s.tbar).square().sum()));
  }
  if (hyper_.mode_gamma == GammaMode::per_region && is_free(layout_.sigma_gamma)) {
    s.sigma_gamma = to_sd(draw_precision(nr, (s.log_gamma.array() - s.lgamma).square().sum()));
  }
  if (is_free(layout_.sigma10)) {
    s.sigma10 = to_sd(draw_precision(nr - 1.0, car_quadratic_form(s.beta10, weights_)));
  }
  if (is_free(layout_.sigma20)) {
    s.sigma20 = to_sd(draw_precision(static_cast<double>(s.beta20.size()), s.beta20.squaredNorm()));
  }
}

namespace {

bool metropolis(double log_ratio, Rng& rng) { return std::isfinite(log_ratio) && std::log(uniform01(rng)) < log_ratio; }

}  // namespace

bool ChainSampler::collapsed_region_move(LinearMarginal::Factor& current, int i, bool move_tau, bool adapting) {
  ParamState& s = state_;
  ShiftWalk& walk = move_tau ? region_tau_walk_[i] : region_lg_walk_[i];
  double& x = move_tau ? s.tau[i] : s.log_gamma[i];
  const double centre = move_tau ? s.tbar : s.lgamma;
  const double sd = move_tau ? s.sigma_tau : s.sigma_gamma;
  const double cur = x;
  const double prop = cur + walk.step * std_normal(rng_);
  x = prop;
  auto next = marginal_->factor(s);
  double log_ratio = next.ok ? next.log_marginal - current.log_marginal : -std::numeric_limits<double>::infinity();
  if (options_.bend_use_prior) {
    log_ratio += normal_log_density(prop, centre, sd * sd) - normal_log_density(cur, centre, sd * sd);
  }
  const bool accept = metropolis(log_ratio, rng_);
  ++walk.proposed;
  if (accept) {
    ++walk.accepted;
    current = std::move(next);
  } else {
    x = cur;
  }
  if (adapting) kernels::adapt_step(walk.step, walk.adapt_count, accept, options_.target_acceptance);
  return accept;
}

// Random walk on log sd against the marginal; the Gamma prior sits on the
// precision, so the log-scale Jacobian adds one power of it.
bool ChainSampler::collapsed_sd_move(LinearMarginal::Factor& current, ShiftWalk& walk, double& sd, bool adapting) {
  const double cur = sd;
  const double prop = cur * std::exp(walk.step * std_normal(rng_));
  sd = prop;
  auto next = marginal_->factor(state_);
  double log_ratio = next.ok ? next.log_marginal - current.log_marginal : -std::numeric_limits<double>::infinity();
  const double lc = 1.0 / (cur * cur), lp = 1.0 / (prop * prop);
  log_ratio += hyper_.precision_shape * std::log(lp / lc) - hyper_.precision_rate * (lp - lc);
  const bool accept = metropolis(log_ratio, rng_);
  ++walk.proposed;
  if (accept) {
    ++walk.accepted;
    current = std::move(next);
  } else {
    sd = cur;
  }
  if (adapting) kernels::adapt_step(walk.step, walk.adapt_count, accept, options_.target_acceptance);
  return accept;
}

bool ChainSampler::collapsed_offset_move(LinearMarginal::Factor& current, ShiftWalk& walk, bool shift_tau,
                                         bool adapting) {
  ParamState& s = state_;
  const double delta = walk.step * std_normal(rng_);
  auto next = marginal_->factor(s, shift_tau ? delta : 0.0, shift_tau ? 0.0 : delta);
  double log_ratio = next.ok ? next.log_marginal - current.log_marginal : -std::numeric_limits<double>::infinity();
  // Region layers depend on differences only, so just the top-level prior moves.
  if (options_.bend_use_prior) {
    if (shift_tau) {
      log_ratio += normal_log_density(s.tbar + delta, hyper_.m2_bend, hyper_.var_bend_mean) -
                   normal_log_density(s.tbar, hyper_.m2_bend, hyper_.var_bend_mean);
    } else {
      log_ratio += normal_log_density(s.lgamma + delta, hyper_.lgamma_mean, hyper_.lgamma_var) -
                   normal_log_density(s.lgamma, hyper_.lgamma_mean, hyper_.lgamma_var);
    }
  }
  const bool accept = metropolis(log_ratio, rng_);
  ++walk.proposed;
  if (accept) {
    ++walk.accepted;
    if (shift_tau) {
      s.tbar += delta;
      s.tau.array() += delta;
    } else {
      s.lgamma += delta;
      s.log_gamma.array() += delta;
    }
    current = std::move(next);
  }
  if (adapting) kernels::adapt_step(walk.step, walk.adapt_count, accept, options_.target_acceptance);
  return accept;
}

void ChainSampler::collapsed_bend_pass(bool adapting) {
  ParamState& s = state_;
  auto current = marginal_->factor(s);
  if (!current.ok) throw NumericalError("singular conditional precision for linear coefficient block");
  const bool per_region = hyper_.mode_gamma == GammaMode::per_region;
  const int nr = data_.n_regions();
  for (int i = 0; i < nr; ++i) {
    if (tau_free_[i]) collapsed_region_move(current, i, true, adapting);
    if (per_region && log_gamma_free_[i]) collapsed_region_move(current, i, false, adapting);
  }
  auto all = [](const std::vector<char>& v) {
    return std::all_of(v.begin(), v.end(), [](char c) { return c != 0; });
  };
  if (is_free(layout_.tbar) && all(tau_free_)) collapsed_offset_move(current, tau_shift_, true, adapting);
  if (is_free(layout_.lgamma) && (!per_region || all(log_gamma_free_))) {
    collapsed_offset_move(current, lg_shift_, false, adapting);
  }
  const int sd_index[] = {layout_.v, layout_.sigma1, layout_.sigma2, layout_.sigma10, layout_.sigma20};
  double* sds[] = {&s.v, &s.sigma1, &s.sigma2, &s.sigma10, &s.sigma20};
  for (int k = 0; k < 5; ++k) {
    if (k == 3 && nr < 2) continue;
    if (is_free(sd_index[k])) collapsed_sd_move(current, sd_walk_[k], *sds[k], adapting);
  }
  // Complete the collapsed moves with an exact draw of what was integrated out.
  marginal_->draw(current, s, rng_);
}

void ChainSampler::mh_bend_block(bool adapting) {
  ParamState& s = state_;
  kernels::BendSweepConfig cfg;
  cfg.tau_free = tau_free_;
  cfg.log_gamma_free = log_gamma_free_;
  cfg.collapse = collapse_;
  cfg.use_likelihood = options_.bend_use_likelihood;
  cfg.use_prior = options_.bend_use_prior;
  cfg.adapting = adapting;
  cfg.target_acceptance = options_.target_acceptance;
  kernels::bend_sweep(options_.backend, data_, s, region_rngs_, tuning_, cfg);

  if (marginal_) {
    collapsed_bend_pass(adapting);
    if (hyper_.mode_gamma == GammaMode::common) s.log_gamma.setConstant(s.lgamma);
    return;
  }
  if (hyper_.mode_gamma == GammaMode::per_region || !is_free(layout_.lgamma)) return;

  // Shared half-width with the slopes held fixed.
  const double cur = s.lgamma;
  const double prop = cur + lg_shift_.step * std_normal(rng_);
  double log_ratio = 0.0;
  if (options_.bend_use_likelihood) {
    kernels::RegionResiduals now, next;
    kernels::region_residuals(options_.backend, data_, s, now);
    ParamState trial = s;
    trial.lgamma = prop;
    trial.log_gamma.setConstant(prop);
    kernels::region_residuals(options_.backend, data_, trial, next);
    log_ratio += -(next.total_ss() - now.total_ss()) / (2.0 * s.v * s.v);
  }
  if (options_.bend_use_prior) {
    log_ratio += normal_log_density(prop, hyper_.lgamma_mean, hyper_.lgamma_var) -
                 normal_log_density(cur, hyper_.lgamma_mean, hyper_.lgamma_var);
  }
  const bool accept = metropolis(log_ratio, rng_);
  ++lg_shift_.proposed;
  if (accept) {
    s.lgamma = prop;
    ++lg_shift_.accepted;
  }
  s.log_gamma.setConstant(s.lgamma);
  if (adapting) kernels::adapt_step(lg_shift_.step, lg_shift_.adapt_count, accept, options_.target_acceptance);
}

double ChainSampler::tau_shift_acceptance() const noexcept {
  return tau_shift_.proposed > 0 ? static_cast<double>(tau_shift_.accepted) / tau_shift_.proposed : 0.0;
}

void ChainSampler::sweep(bool adapting) {
  gibbs_linear_block();
  mh_bend_block(adapting);
  gibbs_variance_block();
}

AcceptanceSummary ChainSampler::acceptance() const {
  AcceptanceSummary a;
  auto rate = [](long acc, long prop) { return prop > 0 ? static_cast<double>(acc) / prop : 0.0; };
  for (const auto& t : tuning_) a.tau.push_back(rate(t.tau_accepted, t.tau_proposed));
  if (hyper_.mode_gamma == GammaMode::per_region) {
    for (const auto& t : tuning_) a.log_gamma.push_back(rate(t.log_gamma_accepted, t.log_gamma_proposed));
  } else {
    a.lgamma = rate(lg_shift_.accepted, lg_shift_.proposed);
  }
  return a;
}

void ChainSampler::reset_acceptance() {
  for (auto& t : tuning_) {
    t.tau_accepted = t.tau_proposed = 0;
    t.log_gamma_accepted = t.log_gamma_proposed = 0;
  }
  tau_shift_.accepted = tau_shift_.proposed = 0;
  lg_shift_.accepted = lg_shift_.proposed = 0;
  for (auto* walks : {&region_tau_walk_, &region_lg_walk_}) {
    for (auto& w : *walks) w.accepted = w.proposed = 0;
  }
  for (auto& w : sd_walk_) w.accepted = w.proposed = 0;
}

ParamState overdispersed_init(const PanelData& data, const HyperConfig& h, const SpatialWeights& weights,
                              Rng& rng) {
  ParamState s = ParamState::zeros(data);
  auto normal = [&](double mean, double var) { return mean + std::sqrt(var) * std_normal(rng); };
  constexpr double inflate = 4.0;

  double sum = 0.0, sum2 = 0.0;
  int n = 0;
  for (int i = 0; i < data.n_regions(); ++i) {
    for (int t = 0; t < data.n_years(); ++t) {
      if (!data.observed(i, t)) continue;
      sum += data.y(i, t);
      sum2 += data.y(i, t) * data.y(i, t);
      ++n;
    }
  }
  double y_sd = n > 1 ? std::sqrt(std::max(0.0, (sum2 - sum * sum / n) / (n - 1))) : 1.0;
  if (!(y_sd > 1e-8)) y_sd = 1.0;
  const double span = std::max(1.0, static_cast<double>(data.years.back() - data.years.front()));

  // Dispersions start wide (0.5x to 2x a data-scale reference) so that the
  // first sweeps are data-dominated.
  auto wide = [&](double ref) { return ref * std::exp(std::log(2.0) * (2.0 * uniform01(rng) - 1.0)); };
  s.v = wide(y_sd);
  s.sigma1 = wide(y_sd);
  s.sigma2 = wide(y_sd);
  s.sigma10 = wide(y_sd);
  s.sigma20 = wide(y_sd);
  s.sigma_tau = wide(span / 4.0);
  s.sigma_gamma = wide(1.0);

  s.b0 = normal(h.m1_intercept, inflate * h.u_intercept);
  for (auto* v : {&s.b_spatial, &s.b_temporal, &s.b_climate}) {
    for (Eigen::Index k = 0; k < v->size(); ++k) (*v)[k] = normal(h.m1_slope, inflate * h.u_slope);
  }
  s.a1 = normal(h.m1_slope, inflate * h.u_slope);
  s.a2 = normal(h.m1_slope, inflate * h.u_slope);
  s.tbar = normal(h.m2_bend, inflate * h.var_bend_mean);
  s.lgamma = std::clamp(normal(h.lgamma_mean, inflate * h.lgamma_var), std::log(0.5), std::log(span));

  const int nr = data.n_regions();
  const double y0 = data.years.front(), y1 = data.years.back();
  for (int i = 0; i < nr; ++i) {
    s.alpha1[i] = normal(s.a1, s.sigma1 * s.sigma1);
    s.alpha2[i] = normal(s.a2, s.sigma2 * s.sigma2);
    s.tau[i] = y0 + (y1 - y0) * uniform01(rng);
    s.log_gamma[i] = h.mode_gamma == GammaMode::common
                         ? s.lgamma
                         : std::clamp(normal(s.lgamma, s.sigma_gamma * s.sigma_gamma), std::log(0.5), std::log(span));
  }
  if (nr > 1) s.beta10 = sample_car(weights, s.sigma10, rng);
  for (int t = 0; t < data.n_years(); ++t) s.beta20[t] = normal(0.0, s.sigma20 * s.sigma20);
  return s;
}

namespace {

std::string dump_state(const ParamLayout& layout, const ParamState& s) {
  std::ostringstream os;
  auto flat = layout.flatten(s);
  for (std::size_t k = 0; k < layout.n_population(); ++k) {
    os << (k ? ", " : "") << layout.names()[k] << "=" << flat[k];
  }
  return os.str();
}

}  // namespace

ChainTrace run_chain(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
                     const std::optional<ParamState>& init, const ChainSettings& cs,
                     const SamplerOptions& options) {
  if (cs.thin < 1) throw ConfigError("thin must be >= 1");
  if (cs.burn_in < 0) throw ConfigError("burn-in must be >= 0");
  if (cs.n_iter <= cs.burn_in) throw ConfigError("n_iter must exceed burn-in");
  hyper.validate();

  ParamState start;
  if (init) {
    start = *init;
  } else {
    Rng init_rng = make_rng({cs.seed, static_cast<std::uint64_t>(cs.chain_index), 2});
    start = overdispersed_init(data, hyper, weights, init_rng);
  }
  if (hyper.mode_gamma == GammaMode::common) start.log_gamma.setConstant(start.lgamma);

  ChainSampler sampler(data, hyper, weights, std::move(start), cs.seed, cs.chain_index, options);
  {
    double lp = -std::numeric_limits<double>::infinity();
    try {
      lp = log_posterior(data, sampler.state(), hyper, weights);
    } catch (const std::exception& e) {
      throw InitializationError(std::string("initial state rejected: ") + e.what() + " [" +
                                dump_state(sampler.layout(), sampler.state()) + "]");
    }
    if (!std::isfinite(lp)) {
      throw InitializationError("non-finite log posterior at initial state [" +
                                dump_state(sampler.layout(), sampler.state()) + "]");
    }
  }

  const ParamLayout& layout = sampler.layout();
  const long n_keep = (cs.n_iter - cs.burn_in) / cs.thin;
  ChainTrace trace;
  trace.draws.resize(n_keep, static_cast<Eigen::Index>(layout.size()));
  trace.deviance.reserve(n_keep);
  std::vector<double> row(layout.size());
  long kept = 0;
  for (long it = 1; it <= cs.n_iter; ++it) {
    const bool adapting = it <= cs.burn_in;
    sampler.sweep(adapting);
    if (it == cs.burn_in) sampler.reset_acceptance();
    if (it > cs.burn_in && (it - cs.burn_in) % cs.thin == 0) {
      layout.flatten_into(sampler.state(), row.data());
      trace.draws.row(kept) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), row.size());
      trace.deviance.push_back(-2.0 * log_likelihood(data, sampler.state()));
      ++kept;
    }
  }
  trace.acceptance = sampler.acceptance();
  return trace;
}

std::vector<double> PosteriorSamples::pooled(std::size_t k) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) out.push_back(c.draws(r, static_cast<Eigen::Index>(k)));
  }
  return out;
}

std::vector<double> PosteriorSamples::pooled_deviance() const {
  std::vector<double> out;
  for (const auto& c : chains) out.insert(out.end(), c.deviance.begin(), c.deviance.end());
  return out;
}

void PosteriorSamples::validate() const {
  if (chains.empty()) throw ConfigError("posterior samples contain no chains");
  const auto rows = chains[0].draws.rows();
  for (const auto& c : chains) {
    if (c.draws.rows() != rows) throw ConfigError("chains differ in length");
    if (c.draws.cols() != static_cast<Eigen::Index>(layout.size())) throw ConfigError("chain width mismatch");
    if (static_cast<Eigen::Index>(c.deviance.size()) != rows) throw ConfigError("deviance trace misaligned");
  }
}

PosteriorSamples run_chains(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
                            const RunSettings& rs, const std::optional<ParamState>& init,
                            const SamplerOptions& options) {
  if (rs.n_chains < 1) throw ConfigError("need at least one chain");
  PosteriorSamples out;
  out.layout = ParamLayout(data, hyper.mode_gamma);
  out.chains.resize(rs.n_chains);
  out.meta.seed = rs.seed;
  out.meta.n_iter = rs.n_iter;
  out.meta.burn_in = rs.burn_in;
  out.meta.thin = rs.thin;
  out.meta.hyper = hyper;
  out.meta.time_origin = data.time_origin;
  out.meta.spatial_scaling = data.spatial_scaling;
  out.meta.temporal_scaling = data.temporal_scaling;
  out.meta.climate_scaling = data.climate_scaling;

  std::vector<std::exception_ptr> errors(rs.n_chains);
  const int threads = rs.threads > 0 ? rs.threads : rs.n_chains;
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (int c = 0; c < rs.n_chains; ++c) {
    try {
      ChainSettings cs{rs.n_iter, rs.burn_in, rs.thin, rs.seed, c};
      out.chains[c] = run_chain(data, hyper, weights, init, cs, options);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double rhat(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw DomainError("rhat: need at least two chains");
  const std::size_t n = chains[0].size();
  if (n < 10) throw DomainError("rhat: chains must have at least 10 draws");
  for (const auto& c : chains) {
    if (c.size() != n) throw DomainError("rhat: chains differ in length");
  }
  std::vector<double> means(m);
  double within = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (double x : chains[j]) s += x;
    means[j] = s / n;
    double ss = 0.0;
    for (double x : chains[j]) ss += (x - means[j]) * (x - means[j]);
    within += ss / (n - 1);
  }
  within /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= static_cast<double>(n) / (m - 1);
  if (within <= 0.0) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * within + between / n;
  // The estimator can dip below 1 by up to 1 - sqrt((n-1)/n) when the chains
  // agree; report 1 there.
  return std::max(1.0, std::sqrt(var_plus / within));
}

}  // namespace bentcable
