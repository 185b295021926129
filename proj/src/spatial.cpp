#include "bentcable/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bentcable/errors.hpp"

namespace bentcable {

AdjacencyGraph::AdjacencyGraph(int n_regions, std::vector<std::pair<int, int>> edges)
    : n_regions_(n_regions) {
  if (n_regions <= 0) throw ConfigError("adjacency: number of regions must be positive");
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_regions || b >= n_regions) {
      throw ConfigError("adjacency: region index out of range in edge (" + std::to_string(a) +
                        "," + std::to_string(b) + ")");
    }
    if (a == b) throw ConfigError("adjacency: self-loop on region " + std::to_string(a));
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);
  adj_.assign(n_regions_, {});
  for (const auto& [a, b] : edges_) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  for (auto& l : adj_) std::sort(l.begin(), l.end());
}

bool AdjacencyGraph::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(i, j));
}

std::vector<int> AdjacencyGraph::neighbors(int i) const { return adj_.at(i); }

namespace {

std::vector<int> component_labels(const std::vector<std::vector<int>>& adj) {
  std::vector<int> label(adj.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < adj.size(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u]) {
        if (label[v] < 0) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

bool AdjacencyGraph::is_connected() const {
  auto label = component_labels(adj_);
  return std::all_of(label.begin(), label.end(), [](int l) { return l == 0; });
}

void AdjacencyGraph::require_connected() const {
  auto label = component_labels(adj_);
  int n_comp = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
  if (n_comp <= 1) return;
  std::ostringstream os;
  os << "adjacency graph is disconnected (" << n_comp
     << " components); island regions are not supported. Regions outside component 0:";
  int shown = 0;
  for (std::size_t i = 0; i < label.size() && shown < 20; ++i) {
    if (label[i] != 0) {
      os << ' ' << i;
      ++shown;
    }
  }
  throw ConfigError(os.str());
}

const char* to_string(WeightMode m) {
  return m == WeightMode::unweighted ? "unweighted" : "tenure_weighted";
}

WeightMode weight_mode_from_string(const std::string& s) {
  if (s == "unweighted") return WeightMode::unweighted;
  if (s == "tenure_weighted" || s == "weighted") return WeightMode::tenure_weighted;
  throw ConfigError("unknown spatial weighting mode '" + s + "'");
}

double SpatialWeights::weight(int i, int j) const {
  for (const auto& nb : nbrs_.at(i)) {
    if (nb.region == j) return nb.weight;
  }
  return 0.0;
}

Eigen::MatrixXd SpatialWeights::laplacian() const {
  const int n = n_regions();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  const auto& e = graph_.edges();
  for (std::size_t k = 0; k < e.size(); ++k) {
    auto [a, b] = e[k];
    double w = edge_w_[k];
    q(a, a) += w;
    q(b, b) += w;
    q(a, b) -= w;
    q(b, a) -= w;
  }
  return q;
}

SpatialWeights build_weights(const AdjacencyGraph& graph, std::span<const double> tenure,
                             WeightMode mode) {
  const int n = graph.n_regions();
  if (mode == WeightMode::tenure_weighted && tenure.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("build_weights: tenure vector has " + std::to_string(tenure.size()) +
                      " entries, expected " + std::to_string(n));
  }
  graph.require_connected();

  SpatialWeights w;
  w.graph_ = graph;
  w.mode_ = mode;
  w.nbrs_.assign(n, {});
  w.total_.assign(n, 0.0);
  for (const auto& [a, b] : graph.edges()) {
    double wij = 1.0;
    if (mode == WeightMode::tenure_weighted) {
      wij = 1.0 / (std::abs(tenure[a] - tenure[b]) + kTenureGapOffset);
    }
    w.edge_w_.push_back(wij);
    w.nbrs_[a].push_back({b, wij});
    w.nbrs_[b].push_back({a, wij});
    w.total_[a] += wij;
    w.total_[b] += wij;
  }
  for (auto& l : w.nbrs_) {
    std::sort(l.begin(), l.end(), [](const Neighbor& x, const Neighbor& y) { return x.region < y.region; });
  }

  if (n > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w.laplacian(), Eigen::EigenvaluesOnly);
    // Connected: exactly one null eigenvalue, the smallest.
    const auto& ev = es.eigenvalues();
    double s = 0.0;
    for (int k = 1; k < n; ++k) s += std::log(ev[k]);
    w.log_pdet_ = s;
  }
  return w;
}

CarConditional car_conditional(int i, const Eigen::VectorXd& beta, const SpatialWeights& w,
                               double sigma10) {
  if (i < 0 || i >= w.n_regions()) throw DomainError("car_conditional: region out of range");
  if (!(sigma10 > 0.0)) throw DomainError("car_conditional: sigma10 must be positive");
  const double tot = w.total_weight(i);
  if (!(tot > 0.0)) {
    throw DomainError("car_conditional: region " + std::to_string(i) +
                      " has no neighbours; island regions are rejected at load time");
  }
  double acc = 0.0;
  for (const auto& nb : w.neighbors(i)) acc += nb.weight * beta[nb.region];
  return {acc / tot, sigma10 * sigma10 / tot};
}

double car_quadratic_form(const Eigen::VectorXd& beta, const SpatialWeights& w) {
  const auto& e = w.graph().edges();
  double qf = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    double d = beta[e[k].first] - beta[e[k].second];
    qf += w.edge_weight(k) * d * d;
  }
  return qf;
}

double car_log_density(const Eigen::VectorXd& beta, const SpatialWeights& w, double sigma10) {
  if (!(sigma10 > 0.0)) throw DomainError("car_log_density: sigma10 must be positive");
  const int n = w.n_regions();
  if (beta.size() != n) throw DomainError("car_log_density: dimension mismatch");
  const double scale = std::max(1.0, beta.cwiseAbs().maxCoeff());
  if (std::abs(beta.sum()) > 1e-8 * scale * n) {
    throw DomainError("car_log_density: effects do not sum to zero");
  }
  const double s2 = sigma10 * sigma10;
  return -0.5 * (n - 1) * std::log(2.0 * std::numbers::pi * s2) + 0.5 * w.log_pseudo_determinant() -
         car_quadratic_form(beta, w) / (2.0 * s2);
}

CarSampler::CarSampler(const SpatialWeights& w) {
  const int n = w.n_regions();
  w.graph().require_connected();
  factor_ = Eigen::MatrixXd::Zero(n, std::max(0, n - 1));
  pinv_ = Eigen::MatrixXd::Zero(n, n);
  if (n == 1) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w.laplacian());
  const auto& ev = es.eigenvalues();
  const auto& u = es.eigenvectors();
  for (int k = 1; k < n; ++k) {
    factor_.col(k - 1) = u.col(k) / std::sqrt(ev[k]);
    pinv_ += u.col(k) * u.col(k).transpose() / ev[k];
  }
}

Eigen::VectorXd CarSampler::draw(double sigma10, Rng& rng) const {
  if (!(sigma10 > 0.0)) throw DomainError("sample_car: sigma10 must be positive");
  Eigen::VectorXd z(factor_.cols());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = std_normal(rng);
  Eigen::VectorXd x = sigma10 * (factor_ * z);
  // Eigenvectors are orthogonal to 1 only up to rounding.
  if (x.size() > 0) x.array() -= x.mean();
  return x;
}

Eigen::VectorXd sample_car(const SpatialWeights& w, double sigma10, Rng& rng) {
  return CarSampler(w).draw(sigma10, rng);
}

}  // namespace bentcable
