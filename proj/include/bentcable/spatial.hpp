#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bentcable/random.hpp"

namespace bentcable {

// Undirected region adjacency. Edges are stored once as (lo, hi), sorted.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  // Throws ConfigError on self-loops or out-of-range ids. Duplicate edges,
  // in either orientation, collapse to one.
  AdjacencyGraph(int n_regions, std::vector<std::pair<int, int>> edges);

  int n_regions() const noexcept { return n_regions_; }
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  bool has_edge(int i, int j) const;
  std::vector<int> neighbors(int i) const;
  bool is_connected() const;
  // Throws ConfigError naming the components when the graph is disconnected.
  void require_connected() const;

 private:
  int n_regions_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adj_;
};

enum class WeightMode { unweighted, tenure_weighted };

const char* to_string(WeightMode m);
WeightMode weight_mode_from_string(const std::string& s);

// Offset added to the tenure gap in weighted mode.
inline constexpr double kTenureGapOffset = 0.00001;

struct Neighbor {
  int region;
  double weight;
};

// Immutable CAR weights over a connected graph.
class SpatialWeights {
 public:
  const AdjacencyGraph& graph() const noexcept { return graph_; }
  WeightMode mode() const noexcept { return mode_; }
  int n_regions() const noexcept { return graph_.n_regions(); }
  // Weight of the k-th edge of graph().edges().
  double edge_weight(std::size_t k) const { return edge_w_[k]; }
  double weight(int i, int j) const;
  const std::vector<Neighbor>& neighbors(int i) const { return nbrs_[i]; }
  double total_weight(int i) const { return total_[i]; }
  // log of the product of the non-zero eigenvalues of the weighted Laplacian.
  double log_pseudo_determinant() const noexcept { return log_pdet_; }
  Eigen::MatrixXd laplacian() const;

 private:
  friend SpatialWeights build_weights(const AdjacencyGraph&, std::span<const double>, WeightMode);
  AdjacencyGraph graph_;
  WeightMode mode_ = WeightMode::unweighted;
  std::vector<double> edge_w_;
  std::vector<std::vector<Neighbor>> nbrs_;
  std::vector<double> total_;
  double log_pdet_ = 0.0;
};

// Unweighted: w_ij = 1 on edges. Tenure-weighted: w_ij = 1 / (|L_i - L_j| + 1e-5).
// `tenure` is ignored in unweighted mode. Rejects disconnected graphs.
SpatialWeights build_weights(const AdjacencyGraph& graph, std::span<const double> tenure,
                             WeightMode mode);

struct CarConditional {
  double mean;
  double variance;
};

// beta_i | beta_-i ~ N(sum_j w_ij beta_j / w_i+, sigma10^2 / w_i+).
CarConditional car_conditional(int i, const Eigen::VectorXd& beta, const SpatialWeights& w,
                               double sigma10);

// sum over edges of w_ij (beta_i - beta_j)^2.
double car_quadratic_form(const Eigen::VectorXd& beta, const SpatialWeights& w);

// Intrinsic CAR log density on the sum-to-zero subspace:
//   -(n-1)/2 log(2 pi sigma10^2) + 1/2 log pdet(Q_w) - QF / (2 sigma10^2).
double car_log_density(const Eigen::VectorXd& beta, const SpatialWeights& w, double sigma10);

// Draws from the intrinsic CAR restricted to sum-to-zero, via the
// eigendecomposition of the weighted Laplacian (covariance sigma10^2 * L^+).
class CarSampler {
 public:
  explicit CarSampler(const SpatialWeights& w);
  Eigen::VectorXd draw(double sigma10, Rng& rng) const;
  // L^+ (Moore-Penrose pseudo-inverse of the weighted Laplacian).
  const Eigen::MatrixXd& laplacian_pinv() const noexcept { return pinv_; }

 private:
  Eigen::MatrixXd factor_;  // columns u_k / sqrt(lambda_k), non-null eigenpairs only
  Eigen::MatrixXd pinv_;
};

Eigen::VectorXd sample_car(const SpatialWeights& w, double sigma10, Rng& rng);

}  // namespace bentcable
