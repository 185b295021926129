#pragma once

// Data-parallel inner loops of the sampler. Every kernel has a serial
// reference in `serial::` and an OpenMP version in `omp::`. Both write
// per-region partial results into caller-owned arrays and reduce them in
// region order, so the two backends agree bit for bit at any thread count.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bentcable/model.hpp"
#include "bentcable/random.hpp"

namespace bentcable::kernels {

enum class Backend { serial, openmp };

// Sum of squared residuals and observed-cell count for each region.
struct RegionResiduals {
  std::vector<double> ss;
  std::vector<int> count;
  double total_ss() const;
  int total_count() const;
};

// Random-walk state of one region's bend walkers.
struct RegionBendTuning {
  double tau_step = 1.0;
  double log_gamma_step = 0.3;
  long tau_accepted = 0;
  long tau_proposed = 0;
  long log_gamma_accepted = 0;
  long log_gamma_proposed = 0;
  long tau_adapt_count = 0;
  long log_gamma_adapt_count = 0;
};

struct BendSweepConfig {
  std::span<const char> tau_free;        // per region
  std::span<const char> log_gamma_free;  // per region; all zero in common mode
  // Per region: integrate (alpha1_i, alpha2_i) out of the bend target and
  // redraw them exactly afterwards. Only valid when both slopes are free.
  std::span<const char> collapse;
  bool use_likelihood = true;
  bool use_prior = true;
  bool adapting = false;
  double target_acceptance = 0.44;
};

// One Robbins-Monro step on a log step size toward the target acceptance.
inline void adapt_step(double& step, long& count, bool accepted, double target) {
  ++count;
  const double gain = 1.0 / std::pow(static_cast<double>(count), 0.6);
  step *= std::exp(((accepted ? 1.0 : 0.0) - target) * gain);
  step = std::clamp(step, 1e-8, 1e8);
}

// Region i's log-likelihood with its two cable slopes integrated against
// their N(a_k, sigma_k^2) priors, evaluated at (tau, gamma). Terms that do
// not depend on (tau, gamma) are dropped, so only differences are meaningful.
double collapsed_loglik(const PanelData& data, const ParamState& s, int i, double tau, double gamma);

namespace serial {
void region_residuals(const PanelData& data, const ParamState& s, RegionResiduals& out);
void bend_sweep(const PanelData& data, ParamState& s, std::span<Rng> region_rngs,
                std::span<RegionBendTuning> tuning, const BendSweepConfig& cfg);
}  // namespace serial

namespace omp {
void region_residuals(const PanelData& data, const ParamState& s, RegionResiduals& out);
void bend_sweep(const PanelData& data, ParamState& s, std::span<Rng> region_rngs,
                std::span<RegionBendTuning> tuning, const BendSweepConfig& cfg);
}  // namespace omp

void region_residuals(Backend b, const PanelData& data, const ParamState& s, RegionResiduals& out);
void bend_sweep(Backend b, const PanelData& data, ParamState& s, std::span<Rng> region_rngs,
                std::span<RegionBendTuning> tuning, const BendSweepConfig& cfg);

}  // namespace bentcable::kernels
