#pragma once

// Every coefficient that enters the mean linearly (b0, covariate slopes, a1,
// a2, the region slopes, beta10 and beta20) is jointly Gaussian given the
// bends and the variances. This integrates them out, which lets the sampler
// move the bend location without dragging the year effects along one step at
// a time, and then redraws them in one piece.
//
// beta10 lives on an orthonormal basis of the sum-to-zero subspace, so the
// intrinsic CAR prior is proper there and the marginal is exact.

#include <Eigen/Dense>

#include "bentcable/model.hpp"
#include "bentcable/random.hpp"
#include "bentcable/spatial.hpp"

namespace bentcable {

class LinearMarginal {
 public:
  LinearMarginal(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights);

  struct Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd mean;
    // log p(y | bends, variances) up to constants.
    double log_marginal = 0.0;
    bool ok = false;
  };

  // Conditional on s with every tau shifted by dtau and every log gamma by dlg.
  Factor factor(const ParamState& s, double dtau = 0.0, double dlg = 0.0) const;

  // Writes a joint draw of the linear coefficients into s. s must hold the
  // bends the factor was built at.
  void draw(const Factor& f, ParamState& s, Rng& rng) const;

  int dim() const noexcept { return dim_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }

 private:
  const PanelData& data_;
  const HyperConfig& hyper_;
  int nr_, nt_, ks_, ke_, kc_;
  // Offsets into the coefficient vector.
  int o_cov_, o_a_, o_al1_, o_al2_, o_z_, o_b20_, dim_;
  Eigen::MatrixXd basis_;    // nr x (nr - 1), columns orthonormal and orthogonal to 1
  Eigen::MatrixXd car_zz_;   // basis' Q basis with unit sigma10
};

}  // namespace bentcable
