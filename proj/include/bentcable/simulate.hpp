#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bentcable/model.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/sampler.hpp"
#include "bentcable/spatial.hpp"

namespace bentcable {

// Generative scenario. Population values are the truth; Level 2 effects are
// drawn from them. Any sd may be zero (degenerate layer). b0 and b_temporal
// act on the raw covariate scale.
struct SimScenario {
  int n_regions = 10;
  int year_min = 1988;
  int year_max = 2014;
  int knn = 2;  // graph: k nearest neighbours plus a spanning tree
  std::string temporal_name = "gdp_growth_pct";
  double temporal_mean = 3.0;
  double temporal_sd = 1.5;

  double b0 = 2.0;
  double b_temporal = -0.03;
  double a1 = 0.02;
  double a2 = -0.05;
  double tbar = 2003.0;
  double gamma = 2.0;
  double v = 0.3;
  // Level 2 sds within the bulk of the Gamma(1, 0.01) precision prior (median
  // sd 0.12); sigma1 is smaller so 27 years of slope spread stay within the
  // representable range of the log(-log ratio) response.
  double sigma1 = 0.05;
  double sigma2 = 0.1;
  double sigma_tau = 0.1;
  double sigma_gamma = 0.2;  // per-region mode only
  double sigma10 = 0.3;
  double sigma20 = 0.1;
  GammaMode mode_gamma = GammaMode::common;
  WeightMode mode_spatial = WeightMode::unweighted;
  double forest_extent = 1.0e6;  // ha, every region
};

// Ground truth: the full state plus what is needed to line it up with a fit.
// Coefficients b0 and b_temporal are on the raw covariate scale.
struct TrueParams {
  ParamState state;
  GammaMode mode_gamma = GammaMode::common;
  WeightMode mode_spatial = WeightMode::unweighted;
  double time_origin = 0.0;
  std::vector<std::string> region_ids;
  std::vector<int> years;
  std::vector<std::string> temporal_names;
  std::vector<std::pair<std::string, std::string>> edges;
};

struct SimDataset {
  std::vector<RegionObservation> observations;
  CovariateTables tables;
  AdjacencyGraph graph;
  PanelData panel;  // as build_panel sees the emitted files
  TrueParams truth;
};

// Random points in the unit square joined to their k nearest neighbours and
// by a Euclidean minimum spanning tree, so the graph is always connected.
AdjacencyGraph random_planar_graph(int n, int k, Rng& rng);

SimDataset simulate_dataset(const SimScenario& scenario, std::uint64_t seed);

// Files in the formats the ingestion code reads: response.csv, temporal.csv,
// static.csv, adjacency.csv and truth.json.
void write_dataset(const SimDataset& ds, const std::string& dir);

void write_truth_json(const TrueParams& truth, const std::string& path);
TrueParams read_truth_json(const std::string& path);

struct RecoveryRow {
  std::string name;
  double truth = 0.0;
  double median = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  bool covered = false;
  bool population = false;
};

struct RecoveryReport {
  std::vector<RecoveryRow> rows;
  double coverage = 0.0;             // all rows
  double population_coverage = 0.0;  // population rows only

  const RecoveryRow* find(const std::string& name) const;
};

// Truth vs pooled posterior. b0 and covariate coefficients are compared on
// the raw scale. Throws ConfigError when regions, years or covariates differ.
RecoveryReport recovery_report(const TrueParams& truth, const PosteriorSamples& samples);
void write_recovery_csv(const RecoveryReport& report, const std::string& path);

}  // namespace bentcable
