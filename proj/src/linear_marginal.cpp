#include "bentcable/linear_marginal.hpp"

#include <cmath>
#include <vector>

#include "bentcable/bent_cable.hpp"

namespace bentcable {

LinearMarginal::LinearMarginal(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights)
    : data_(data), hyper_(hyper) {
  nr_ = data.n_regions();
  nt_ = data.n_years();
  ks_ = data.n_spatial();
  ke_ = data.n_temporal();
  kc_ = data.n_climate();
  o_cov_ = 1;
  o_a_ = o_cov_ + ks_ + ke_ + kc_;
  o_al1_ = o_a_ + 2;
  o_al2_ = o_al1_ + nr_;
  o_z_ = o_al2_ + nr_;
  o_b20_ = o_z_ + std::max(nr_ - 1, 0);
  dim_ = o_b20_ + nt_;

  // Normalised Helmert contrasts.
  const int nz = std::max(nr_ - 1, 0);
  basis_ = Eigen::MatrixXd::Zero(nr_, nz);
  for (int k = 1; k <= nz; ++k) {
    const double c = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) basis_(i, k - 1) = c;
    basis_(k, k - 1) = -k * c;
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(nr_, nr_);
  for (int i = 0; i < nr_; ++i) {
    q(i, i) = weights.total_weight(i);
    for (const auto& nb : weights.neighbors(i)) q(i, nb.region) -= nb.weight;
  }
  car_zz_ = basis_.transpose() * q * basis_;
}

LinearMarginal::Factor LinearMarginal::factor(const ParamState& s, double dtau, double dlg) const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim_);
  const double iv2 = 1.0 / (s.v * s.v);
  const int nz = o_b20_ - o_z_;

  std::vector<int> idx;
  std::vector<double> x;
  Eigen::VectorXd colsum(dim_);
  double yy = 0.0, n_obs = 0.0;
  for (int i = 0; i < nr_; ++i) {
    const double tau = s.tau[i] + dtau;
    const double gamma = std::exp(s.log_gamma[i] + dlg);
    colsum.setZero();
    double n_i = 0.0, ysum = 0.0;
    for (int t = 0; t < nt_; ++t) {
      if (!data_.observed(i, t)) continue;
      idx.clear();
      x.clear();
      idx.push_back(0);
      x.push_back(1.0);
      for (int k = 0; k < ks_; ++k) {
        idx.push_back(o_cov_ + k);
        x.push_back(data_.spatial(i, k));
      }
      for (int k = 0; k < ke_; ++k) {
        idx.push_back(o_cov_ + ks_ + k);
        x.push_back(data_.temporal(t, k));
      }
      for (int k = 0; k < kc_; ++k) {
        idx.push_back(o_cov_ + ks_ + ke_ + k);
        x.push_back(data_.climate[k](i, t));
      }
      idx.push_back(o_al1_ + i);
      x.push_back(data_.centered_time(t));
      idx.push_back(o_al2_ + i);
      x.push_back(bend_kernel_unchecked(data_.years[t], tau, gamma));
      idx.push_back(o_b20_ + t);
      x.push_back(1.0);

      const double y = data_.y(i, t);
      for (std::size_t a = 0; a < idx.size(); ++a) {
        b[idx[a]] += x[a] * y * iv2;
        colsum[idx[a]] += x[a];
        for (std::size_t c = 0; c < idx.size(); ++c) p(idx[a], idx[c]) += x[a] * x[c] * iv2;
      }
      n_i += 1.0;
      ysum += y;
      yy += y * y;
    }
    n_obs += n_i;
    // The region's CAR effect is basis.row(i) . z on every one of its cells.
    if (nz > 0 && n_i > 0.0) {
      const Eigen::VectorXd bi = basis_.row(i).transpose();
      p.block(o_z_, o_z_, nz, nz).noalias() += (n_i * iv2) * bi * bi.transpose();
      const Eigen::MatrixXd cross = iv2 * bi * colsum.transpose();
      p.middleRows(o_z_, nz) += cross;
      p.middleCols(o_z_, nz) += cross.transpose();
      b.segment(o_z_, nz) += (ysum * iv2) * bi;
    }
  }

  p(0, 0) += 1.0 / hyper_.u_intercept;
  b[0] += hyper_.m1_intercept / hyper_.u_intercept;
  for (int k = 0; k < ks_ + ke_ + kc_; ++k) {
    p(o_cov_ + k, o_cov_ + k) += 1.0 / hyper_.u_slope;
    b[o_cov_ + k] += hyper_.m1_slope / hyper_.u_slope;
  }
  auto hierarchy = [&](int pop, int first, double sd) {
    const double w = 1.0 / (sd * sd);
    p(pop, pop) += 1.0 / hyper_.u_slope + nr_ * w;
    b[pop] += hyper_.m1_slope / hyper_.u_slope;
    for (int i = 0; i < nr_; ++i) {
      p(first + i, first + i) += w;
      p(pop, first + i) -= w;
      p(first + i, pop) -= w;
    }
  };
  hierarchy(o_a_, o_al1_, s.sigma1);
  hierarchy(o_a_ + 1, o_al2_, s.sigma2);
  if (nz > 0) p.block(o_z_, o_z_, nz, nz) += car_zz_ / (s.sigma10 * s.sigma10);
  for (int t = 0; t < nt_; ++t) p(o_b20_ + t, o_b20_ + t) += 1.0 / (s.sigma20 * s.sigma20);

  Factor f;
  f.llt.compute(p);
  if (f.llt.info() != Eigen::Success) return f;
  f.mean = f.llt.solve(b);
  const auto& l = f.llt.matrixLLT();
  double log_det_half = 0.0;
  for (int k = 0; k < dim_; ++k) log_det_half += std::log(l(k, k));
  // Prior determinant: the (a, alpha) blocks contribute sigma^-2n each, the
  // CAR block sigma10^-2(n-1) and the year effects sigma20^-2nt.
  const double log_det_prior_half = -nr_ * (std::log(s.sigma1) + std::log(s.sigma2)) -
                                    nz * std::log(s.sigma10) - nt_ * std::log(s.sigma20);
  f.log_marginal = 0.5 * b.dot(f.mean) - log_det_half + log_det_prior_half - n_obs * std::log(s.v) -
                   0.5 * yy * iv2;
  f.ok = std::isfinite(f.log_marginal);
  return f;
}

void LinearMarginal::draw(const Factor& f, ParamState& s, Rng& rng) const {
  Eigen::VectorXd z(dim_);
  for (int k = 0; k < dim_; ++k) z[k] = std_normal(rng);
  const Eigen::VectorXd theta = f.mean + f.llt.matrixU().solve(z);
  s.b0 = theta[0];
  s.b_spatial = theta.segment(o_cov_, ks_);
  s.b_temporal = theta.segment(o_cov_ + ks_, ke_);
  s.b_climate = theta.segment(o_cov_ + ks_ + ke_, kc_);
  s.a1 = theta[o_a_];
  s.a2 = theta[o_a_ + 1];
  s.alpha1 = theta.segment(o_al1_, nr_);
  s.alpha2 = theta.segment(o_al2_, nr_);
  const int nz = o_b20_ - o_z_;
  if (nz > 0) {
    s.beta10 = basis_ * theta.segment(o_z_, nz);
    s.beta10.array() -= s.beta10.mean();
  } else {
    s.beta10.setZero(nr_);
  }
  s.beta20 = theta.segment(o_b20_, nt_);
}

}  // namespace bentcable
