#pragma once

// Small in-memory panels and states for unit tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "bentcable/model.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/random.hpp"
#include "bentcable/sampler.hpp"
#include "bentcable/spatial.hpp"

namespace bentcable::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("bentcable_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// nr regions x nt years starting in 2000, with ks spatial and ke temporal
// covariates drawn N(0,1) and responses N(1, 0.5^2). Every cell observed.
inline PanelData tiny_panel(int nr, int nt, int ks, int ke, std::uint64_t seed) {
  Rng rng = make_rng({seed, 77});
  PanelData d;
  for (int i = 0; i < nr; ++i) d.region_ids.push_back("G" + std::to_string(i));
  for (int t = 0; t < nt; ++t) d.years.push_back(2000 + t);
  d.time_origin = 2000 + 0.5 * (nt - 1);
  d.y.resize(nr, nt);
  d.observed = BoolMatrix::Constant(nr, nt, true);
  d.defor_area = Eigen::MatrixXd::Constant(nr, nt, std::nan(""));
  d.forest_extent = Eigen::MatrixXd::Constant(nr, nt, std::nan(""));
  for (int i = 0; i < nr; ++i) {
    for (int t = 0; t < nt; ++t) d.y(i, t) = 1.0 + 0.5 * std_normal(rng);
  }
  d.spatial.resize(nr, ks);
  for (int k = 0; k < ks; ++k) {
    d.spatial_names.push_back("s" + std::to_string(k));
    d.spatial_scaling.push_back({d.spatial_names.back(), 0.0, 1.0});
    for (int i = 0; i < nr; ++i) d.spatial(i, k) = std_normal(rng);
  }
  d.temporal.resize(nt, ke);
  for (int k = 0; k < ke; ++k) {
    d.temporal_names.push_back("e" + std::to_string(k));
    d.temporal_scaling.push_back({d.temporal_names.back(), 0.0, 1.0});
    for (int t = 0; t < nt; ++t) d.temporal(t, k) = std_normal(rng);
  }
  return d;
}

inline AdjacencyGraph path_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return AdjacencyGraph(n, e);
}

// A valid state with moderate values, common gamma.
inline ParamState plain_state(const PanelData& d, std::uint64_t seed) {
  Rng rng = make_rng({seed, 78});
  ParamState s = ParamState::zeros(d);
  s.b0 = 1.0;
  for (Eigen::Index k = 0; k < s.b_spatial.size(); ++k) s.b_spatial[k] = 0.1 * std_normal(rng);
  for (Eigen::Index k = 0; k < s.b_temporal.size(); ++k) s.b_temporal[k] = 0.1 * std_normal(rng);
  s.a1 = 0.02;
  s.a2 = -0.05;
  s.tbar = d.years.front() + 0.5 * (d.years.back() - d.years.front());
  s.lgamma = std::log(1.5);
  s.v = 0.3;
  s.sigma_tau = 0.8;
  s.sigma_gamma = 0.4;
  s.sigma1 = 0.05;
  s.sigma2 = 0.07;
  s.sigma10 = 0.3;
  s.sigma20 = 0.2;
  for (int i = 0; i < d.n_regions(); ++i) {
    s.alpha1[i] = s.a1 + s.sigma1 * std_normal(rng);
    s.alpha2[i] = s.a2 + s.sigma2 * std_normal(rng);
    s.tau[i] = s.tbar + s.sigma_tau * std_normal(rng);
    s.log_gamma[i] = s.lgamma;
    s.beta10[i] = 0.2 * std_normal(rng);
  }
  if (d.n_regions() > 0) s.beta10.array() -= s.beta10.mean();
  for (int t = 0; t < d.n_years(); ++t) s.beta20[t] = 0.1 * std_normal(rng);
  return s;
}

// Samples whose chains hold the given states, with deviances at `data`.
inline PosteriorSamples samples_from_states(const PanelData& data, GammaMode mode,
                                            const std::vector<std::vector<ParamState>>& chains) {
  PosteriorSamples s;
  s.layout = ParamLayout(data, mode);
  s.meta.time_origin = data.time_origin;
  s.meta.hyper.mode_gamma = mode;
  s.meta.spatial_scaling = data.spatial_scaling;
  s.meta.temporal_scaling = data.temporal_scaling;
  s.meta.climate_scaling = data.climate_scaling;
  for (const auto& states : chains) {
    ChainTrace c;
    c.draws.resize(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(s.layout.size()));
    for (std::size_t k = 0; k < states.size(); ++k) {
      const auto flat = s.layout.flatten(states[k]);
      c.draws.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(flat.data(), c.draws.cols());
      c.deviance.push_back(-2.0 * log_likelihood(data, states[k]));
    }
    s.chains.push_back(std::move(c));
  }
  return s;
}

}  // namespace bentcable::testing
