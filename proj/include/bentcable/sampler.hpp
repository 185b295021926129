#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bentcable/kernels.hpp"
#include "bentcable/linear_marginal.hpp"
#include "bentcable/model.hpp"
#include "bentcable/random.hpp"
#include "bentcable/spatial.hpp"

namespace bentcable {

struct SamplerOptions {
  kernels::Backend backend = kernels::Backend::openmp;
  // Per ParamLayout index; empty means every parameter is updated. Frozen
  // parameters keep their current value. In common-gamma mode the shared
  // half-width is controlled by the "lgamma" entry.
  std::vector<char> free;
  // Re-impose sum-to-zero on beta10 when the whole vector is updated.
  bool center_beta10 = true;
  // Switches for the bend walkers' target (testing hooks).
  bool bend_use_likelihood = true;
  bool bend_use_prior = true;
  // Bend moves integrate each region's (alpha1, alpha2) out and redraw them
  // exactly, whenever both slopes are free.
  bool collapse_slopes = true;
  // Joint moves shifting tbar with every tau_i (and lgamma with every
  // log gamma_i in per-region mode) by one common offset.
  bool shift_moves = true;
  double target_acceptance = 0.44;
  double initial_tau_step = 1.0;
  double initial_log_gamma_step = 0.3;
};

struct AcceptanceSummary {
  std::vector<double> tau;        // per region
  std::vector<double> log_gamma;  // per region, per-region mode only
  double lgamma = 0.0;            // common mode only
};

// Metropolis-within-Gibbs sampler for one chain. Sweep order is fixed:
// linear block, bend block, variance block.
class ChainSampler {
 public:
  ChainSampler(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
               ParamState init, std::uint64_t seed, int chain_index, SamplerOptions options = {});

  // Joint Gaussian draw of every free linear coefficient (b0, covariate
  // coefficients, alpha1, alpha2, beta10, beta20) from its full conditional,
  // then conjugate draws of a1, a2, tbar and (per-region mode) lgamma.
  void gibbs_linear_block();
  // Conjugate Gamma(shape + n/2, rate + SS/2) draws of every free precision.
  void gibbs_variance_block();
  // Random-walk Metropolis on each tau_i, per-region log gamma_i or the common
  // lgamma. Step sizes adapt only when `adapting` is set.
  void mh_bend_block(bool adapting);
  void sweep(bool adapting);

  const ParamState& state() const noexcept { return state_; }
  ParamState& state() noexcept { return state_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  Rng& rng() noexcept { return rng_; }

  AcceptanceSummary acceptance() const;
  void reset_acceptance();
  const std::vector<kernels::RegionBendTuning>& tuning() const noexcept { return tuning_; }
  double lgamma_step() const noexcept { return lg_shift_.step; }
  // Acceptance rate of the tbar/tau shift move since the last reset.
  double tau_shift_acceptance() const noexcept;

 private:
  bool is_free(int layout_index) const;
  double draw_precision(double n, double ss);

  const PanelData& data_;
  const HyperConfig& hyper_;
  const SpatialWeights& weights_;
  SamplerOptions options_;
  ParamLayout layout_;
  ParamState state_;
  Rng rng_;
  std::vector<Rng> region_rngs_;
  std::vector<kernels::RegionBendTuning> tuning_;
  std::vector<char> tau_free_, log_gamma_free_, collapse_;
  // Present when every linear coefficient is free and shift moves are on.
  std::optional<LinearMarginal> marginal_;
  // Common-offset moves: step, accepted, proposed, adaptation count.
  struct ShiftWalk {
    double step = 1.0;
    long accepted = 0, proposed = 0, adapt_count = 0;
  };
  ShiftWalk tau_shift_, lg_shift_;
  // MH on a common offset (dtau or dlg) using the collapsed likelihood.
  std::vector<ShiftWalk> region_tau_walk_, region_lg_walk_;
  std::array<ShiftWalk, 5> sd_walk_;  // v, sigma1, sigma2, sigma10, sigma20
  // Moves against the marginal of the bends with every linear coefficient
  // integrated out; `current` is kept in step with the state.
  void collapsed_bend_pass(bool adapting);
  bool collapsed_region_move(LinearMarginal::Factor& current, int i, bool move_tau, bool adapting);
  bool collapsed_sd_move(LinearMarginal::Factor& current, ShiftWalk& walk, double& sd, bool adapting);
  bool collapsed_offset_move(LinearMarginal::Factor& current, ShiftWalk& walk, bool shift_tau, bool adapting);

  // Linear coefficient vector: [b0, b_spatial, b_temporal, b_climate,
  // alpha1, alpha2, beta10, beta20].
  int lin_bs_, lin_be_, lin_bc_, lin_a1_, lin_a2_, lin_b10_, lin_b20_, lin_dim_;
  std::vector<int> lin_layout_;  // linear index -> layout index
};

// Starting state: location parameters from their priors with variances
// inflated four-fold, tau_i uniform over the year span, dispersion
// parameters wide relative to the response scale.
ParamState overdispersed_init(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
                              Rng& rng);

struct ChainSettings {
  long n_iter = 20000;
  long burn_in = 10000;
  long thin = 10;
  std::uint64_t seed = 1;
  int chain_index = 0;
};

struct ChainTrace {
  Eigen::MatrixXd draws;        // kept iterations x layout size
  std::vector<double> deviance; // aligned with draws rows
  AcceptanceSummary acceptance; // post-burn-in rates
};

struct SampleMeta {
  std::uint64_t seed = 0;
  long n_iter = 0;
  long burn_in = 0;
  long thin = 1;
  HyperConfig hyper;
  double time_origin = 0.0;
  std::vector<CovariateScaling> spatial_scaling, temporal_scaling, climate_scaling;
  std::map<std::string, std::string> config;  // run configuration snapshot
};

struct PosteriorSamples {
  ParamLayout layout;
  std::vector<ChainTrace> chains;
  SampleMeta meta;

  std::size_t n_kept() const { return chains.empty() ? 0 : static_cast<std::size_t>(chains[0].draws.rows()); }
  // All chains concatenated for one parameter.
  std::vector<double> pooled(std::size_t k) const;
  std::vector<double> pooled_deviance() const;
  // Throws ConfigError when chains differ in length or width.
  void validate() const;
};

ChainTrace run_chain(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
                     const std::optional<ParamState>& init, const ChainSettings& settings,
                     const SamplerOptions& options = {});

struct RunSettings {
  int n_chains = 3;
  long n_iter = 20000;
  long burn_in = 10000;
  long thin = 10;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: one per chain
};

// Independent chains, run concurrently. Chain c uses stream (seed, c).
PosteriorSamples run_chains(const PanelData& data, const HyperConfig& hyper, const SpatialWeights& weights,
                            const RunSettings& settings, const std::optional<ParamState>& init = std::nullopt,
                            const SamplerOptions& options = {});

// Gelman-Rubin potential scale reduction for >= 2 equal-length chains.
double rhat(const std::vector<std::vector<double>>& chains);

}  // namespace bentcable
