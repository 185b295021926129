#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bentcable/spatial.hpp"

namespace bentcable {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct RegionObservation {
  std::string region_id;
  int year = 0;
  double defor_area = 0.0;
  double forest_extent = 0.0;
  std::map<std::string, double> covariates;
};

// A multi-year aggregate: defor_total spread over [start, start + span).
struct EpochRecord {
  std::string region_id;
  int epoch_start_year = 0;
  int epoch_span_years = 1;
  double defor_total = 0.0;
  double forest_extent = 0.0;
};

// Linear map applied to a covariate before fitting: x_model = (x_raw - center) / scale.
struct CovariateScaling {
  std::string name;
  double center = 0.0;
  double scale = 1.0;
};

// Region x year panel. Matrices indexed (region, year-index).
struct PanelData {
  std::vector<std::string> region_ids;
  std::vector<int> years;
  double time_origin = 0.0;

  Eigen::MatrixXd y;      // transformed response, NaN when missing
  BoolMatrix observed;    // cell enters the likelihood
  Eigen::MatrixXd defor_area;     // raw inputs, NaN when absent
  Eigen::MatrixXd forest_extent;

  std::vector<std::string> spatial_names;
  Eigen::MatrixXd spatial;                 // regions x Ks, model scale
  std::vector<std::string> temporal_names;
  Eigen::MatrixXd temporal;                // years x Ke, model scale
  std::vector<std::string> climate_names;
  std::vector<Eigen::MatrixXd> climate;    // Kc matrices, regions x years, model scale

  std::vector<CovariateScaling> spatial_scaling;
  std::vector<CovariateScaling> temporal_scaling;
  std::vector<CovariateScaling> climate_scaling;

  Eigen::VectorXd tenure;  // raw L_i per region; empty when no tenure data

  int n_regions() const { return static_cast<int>(region_ids.size()); }
  int n_years() const { return static_cast<int>(years.size()); }
  int n_spatial() const { return static_cast<int>(spatial_names.size()); }
  int n_temporal() const { return static_cast<int>(temporal_names.size()); }
  int n_climate() const { return static_cast<int>(climate_names.size()); }
  int n_observed() const { return static_cast<int>(observed.count()); }
  double centered_time(int t) const { return years[t] - time_origin; }
  int region_index(const std::string& id) const;  // -1 when absent
  int year_index(int year) const;                 // -1 when absent

  // Throws ConfigError if matrices do not conform to the grid or an observed
  // cell has a non-finite response or covariate.
  void validate() const;
};

// Splits every epoch into `span` annual records of defor_total / span with the
// forest extent copied. Throws IngestionError on overlapping epochs or span < 1.
std::vector<RegionObservation> annualize_epochs(const std::vector<EpochRecord>& records);

std::vector<RegionObservation> read_response_csv(const std::string& path);
std::vector<EpochRecord> read_epoch_csv(const std::string& path);

// Covariate tables keyed by region, year, or (region, year).
struct CovariateTables {
  std::vector<std::string> static_columns;
  std::map<std::string, std::map<std::string, double>> static_by_region;
  std::vector<std::string> temporal_columns;
  std::map<int, std::map<std::string, double>> temporal_by_year;
  std::vector<std::string> climate_columns;
  std::map<std::pair<std::string, int>, std::map<std::string, double>> climate_by_cell;
};

void read_static_csv(const std::string& path, CovariateTables& tables);
void read_temporal_csv(const std::string& path, CovariateTables& tables);
void read_spatiotemporal_csv(const std::string& path, CovariateTables& tables);

// Column name that selects the derived tenure covariate from the
// frac_freehold / frac_leasehold static columns.
inline constexpr const char* kTenureCovariate = "tenure";

struct PanelConfig {
  int year_min = 1988;
  int year_max = 2014;
  std::vector<std::string> regions;  // explicit inclusion list; empty = all
  std::vector<std::string> spatial_covariates;
  std::vector<std::string> temporal_covariates;
  std::vector<std::string> climate_covariates;
  bool standardize = true;
  std::optional<double> zero_floor;   // nullopt: zero cells are missing
  std::optional<double> time_origin;  // nullopt: midpoint of the window
};

PanelData build_panel(const std::vector<RegionObservation>& obs, const CovariateTables& tables,
                      const PanelConfig& config);

// Long-format response CSV of the retained raw cells.
void export_response_csv(const PanelData& panel, const std::string& path);

// Reads "region_a,region_b" lines (no header; '#' comments allowed) and maps
// ids onto panel indices. Edges touching ids in `excluded` are dropped.
AdjacencyGraph read_adjacency(const std::string& path, const std::vector<std::string>& region_ids,
                              const std::vector<std::string>& excluded = {});

double log10p1(double x);

struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd r;  // NaN where undefined (zero-variance column)
};

// Pearson correlations with pairwise-complete filtering of NaN rows.
CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const Eigen::MatrixXd& columns);

}  // namespace bentcable
