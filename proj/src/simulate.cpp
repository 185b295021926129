#include "bentcable/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "bentcable/assess.hpp"
#include "bentcable/bent_cable.hpp"
#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"

namespace bentcable {

AdjacencyGraph random_planar_graph(int n, int k, Rng& rng) {
  if (n < 1) throw ConfigError("graph needs at least one region");
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = uniform01(rng);
    y[i] = uniform01(rng);
  }
  auto dist = [&](int a, int b) { return std::hypot(x[a] - x[b], y[a] - y[b]); };
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    std::vector<int> order;
    for (int j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) { return dist(i, a) < dist(i, b); });
    for (int m = 0; m < std::min<int>(k, static_cast<int>(order.size())); ++m) edges.emplace_back(i, order[m]);
  }
  // Prim's tree guarantees connectivity whatever k is.
  std::vector<char> in_tree(n, 0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  best[0] = 0.0;
  for (int step = 0; step < n; ++step) {
    int u = -1;
    for (int i = 0; i < n; ++i) {
      if (!in_tree[i] && (u < 0 || best[i] < best[u])) u = i;
    }
    in_tree[u] = 1;
    if (parent[u] >= 0) edges.emplace_back(parent[u], u);
    for (int w = 0; w < n; ++w) {
      if (!in_tree[w] && dist(u, w) < best[w]) {
        best[w] = dist(u, w);
        parent[w] = u;
      }
    }
  }
  return AdjacencyGraph(n, std::move(edges));
}

SimDataset simulate_dataset(const SimScenario& sc, std::uint64_t seed) {
  if (sc.year_max < sc.year_min) throw ConfigError("simulation year range is empty");
  const double sds[] = {sc.v, sc.sigma1, sc.sigma2, sc.sigma_tau, sc.sigma_gamma, sc.sigma10, sc.sigma20};
  for (double s : sds) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("simulation sds must be finite and >= 0");
  }
  if (!(sc.gamma > 0.0)) throw ConfigError("simulation gamma must be positive");
  if (!(sc.forest_extent > 0.0)) throw ConfigError("forest extent must be positive");

  Rng rng = make_rng({seed, 0x5157});
  auto normal = [&](double mean, double sd) { return sd > 0.0 ? mean + sd * std_normal(rng) : mean; };
  const int nr = sc.n_regions;
  const int nt = sc.year_max - sc.year_min + 1;

  SimDataset ds;
  ds.graph = random_planar_graph(nr, sc.knn, rng);
  TrueParams& tr = ds.truth;
  tr.mode_gamma = sc.mode_gamma;
  tr.mode_spatial = sc.mode_spatial;
  tr.time_origin = 0.5 * (sc.year_min + sc.year_max);
  tr.temporal_names = {sc.temporal_name};
  for (int i = 0; i < nr; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "R%02d", i + 1);
    tr.region_ids.emplace_back(buf);
  }
  for (int t = 0; t < nt; ++t) tr.years.push_back(sc.year_min + t);
  for (const auto& [a, b] : ds.graph.edges()) tr.edges.emplace_back(tr.region_ids[a], tr.region_ids[b]);

  // Static covariates: land tenure shares and elevation.
  std::vector<double> ff(nr), fl(nr), tenure(nr);
  for (int i = 0; i < nr; ++i) {
    ff[i] = 0.02 + 0.96 * uniform01(rng);
    fl[i] = (1.0 - ff[i]) * uniform01(rng);
    tenure[i] = tenure_covariate(ff[i], fl[i]);
  }
  std::vector<double> gdp(nt);
  for (int t = 0; t < nt; ++t) gdp[t] = normal(sc.temporal_mean, sc.temporal_sd);

  ParamState& s = tr.state;
  s.b0 = sc.b0;
  s.b_spatial = Eigen::VectorXd(0);
  s.b_temporal = Eigen::VectorXd::Constant(1, sc.b_temporal);
  s.b_climate = Eigen::VectorXd(0);
  s.a1 = sc.a1;
  s.a2 = sc.a2;
  s.tbar = sc.tbar;
  s.lgamma = std::log(sc.gamma);
  s.v = sc.v;
  s.sigma1 = sc.sigma1;
  s.sigma2 = sc.sigma2;
  s.sigma_tau = sc.sigma_tau;
  s.sigma_gamma = sc.sigma_gamma;
  s.sigma10 = sc.sigma10;
  s.sigma20 = sc.sigma20;
  s.alpha1.resize(nr);
  s.alpha2.resize(nr);
  s.tau.resize(nr);
  s.log_gamma.resize(nr);
  for (int i = 0; i < nr; ++i) {
    s.alpha1[i] = normal(sc.a1, sc.sigma1);
    s.alpha2[i] = normal(sc.a2, sc.sigma2);
    s.tau[i] = normal(sc.tbar, sc.sigma_tau);
    s.log_gamma[i] = sc.mode_gamma == GammaMode::common ? s.lgamma : normal(s.lgamma, sc.sigma_gamma);
  }
  const SpatialWeights w = build_weights(ds.graph, tenure, sc.mode_spatial);
  s.beta10 = Eigen::VectorXd::Zero(nr);
  if (nr > 1 && sc.sigma10 > 0.0) s.beta10 = sample_car(w, sc.sigma10, rng);
  s.beta20.resize(nt);
  for (int t = 0; t < nt; ++t) s.beta20[t] = normal(0.0, sc.sigma20);

  // Level 1.
  for (int i = 0; i < nr; ++i) {
    for (int t = 0; t < nt; ++t) {
      const double year = tr.years[t];
      const double mean = s.b0 + s.beta10[i] + s.beta20[t] + s.b_temporal[0] * gdp[t] +
                          cable_at(year, tr.time_origin, s.alpha1[i], s.alpha2[i], s.tau[i],
                                   std::exp(s.log_gamma[i]));
      const double y = normal(mean, sc.v);
      RegionObservation o;
      o.region_id = tr.region_ids[i];
      o.year = tr.years[t];
      o.forest_extent = sc.forest_extent;
      o.defor_area = inverse_transform_response(y) * sc.forest_extent;
      if (!(o.defor_area > 0.0) || !(o.defor_area < sc.forest_extent)) {
        throw NumericalError("simulated response " + std::to_string(y) + " has no representable ratio");
      }
      ds.observations.push_back(std::move(o));
    }
  }

  CovariateTables& tab = ds.tables;
  tab.static_columns = {"frac_freehold", "frac_leasehold"};
  for (int i = 0; i < nr; ++i) {
    tab.static_by_region[tr.region_ids[i]] = {{"frac_freehold", ff[i]}, {"frac_leasehold", fl[i]}};
  }
  tab.temporal_columns = {sc.temporal_name};
  for (int t = 0; t < nt; ++t) tab.temporal_by_year[tr.years[t]] = {{sc.temporal_name, gdp[t]}};

  PanelConfig pc;
  pc.year_min = sc.year_min;
  pc.year_max = sc.year_max;
  pc.temporal_covariates = {sc.temporal_name};
  ds.panel = build_panel(ds.observations, tab, pc);
  return ds;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_json_vec(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_dataset(const SimDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  {
    auto out = open_out((base / "response.csv").string());
    out << "region_id,year,defor_area_ha,forest_extent_ha\n";
    for (const auto& o : ds.observations) {
      out << o.region_id << ',' << o.year << ',' << format_double(o.defor_area) << ','
          << format_double(o.forest_extent) << '\n';
    }
  }
  {
    auto out = open_out((base / "temporal.csv").string());
    out << "year";
    for (const auto& c : ds.tables.temporal_columns) out << ',' << c;
    out << '\n';
    for (const auto& [year, row] : ds.tables.temporal_by_year) {
      out << year;
      for (const auto& c : ds.tables.temporal_columns) out << ',' << format_double(row.at(c));
      out << '\n';
    }
  }
  {
    auto out = open_out((base / "static.csv").string());
    out << "region_id";
    for (const auto& c : ds.tables.static_columns) out << ',' << c;
    out << '\n';
    for (const auto& id : ds.truth.region_ids) {
      out << id;
      for (const auto& c : ds.tables.static_columns) out << ',' << format_double(ds.tables.static_by_region.at(id).at(c));
      out << '\n';
    }
  }
  {
    auto out = open_out((base / "adjacency.csv").string());
    out << "# region_a,region_b\n";
    for (const auto& [a, b] : ds.truth.edges) out << a << ',' << b << '\n';
  }
  write_truth_json(ds.truth, (base / "truth.json").string());
}

void write_truth_json(const TrueParams& tr, const std::string& path) {
  const ParamState& s = tr.state;
  nlohmann::ordered_json j;
  j["mode_gamma"] = to_string(tr.mode_gamma);
  j["mode_spatial"] = to_string(tr.mode_spatial);
  j["time_origin"] = tr.time_origin;
  j["region_ids"] = tr.region_ids;
  j["years"] = tr.years;
  j["temporal_names"] = tr.temporal_names;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [a, b] : tr.edges) edges.push_back({a, b});
  j["edges"] = edges;
  j["b0"] = s.b0;
  j["b_temporal"] = to_vec(s.b_temporal);
  j["a1"] = s.a1;
  j["a2"] = s.a2;
  j["tbar"] = s.tbar;
  j["lgamma"] = s.lgamma;
  j["v"] = s.v;
  j["sigma_tau"] = s.sigma_tau;
  j["sigma_gamma"] = s.sigma_gamma;
  j["sigma1"] = s.sigma1;
  j["sigma2"] = s.sigma2;
  j["sigma10"] = s.sigma10;
  j["sigma20"] = s.sigma20;
  j["alpha1"] = to_vec(s.alpha1);
  j["alpha2"] = to_vec(s.alpha2);
  j["tau"] = to_vec(s.tau);
  j["log_gamma"] = to_vec(s.log_gamma);
  j["beta10"] = to_vec(s.beta10);
  j["beta20"] = to_vec(s.beta20);
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

TrueParams read_truth_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open file", path);
  TrueParams tr;
  try {
    const auto j = nlohmann::json::parse(in);
    tr.mode_gamma = gamma_mode_from_string(j.at("mode_gamma").get<std::string>());
    tr.mode_spatial = weight_mode_from_string(j.at("mode_spatial").get<std::string>());
    tr.time_origin = j.at("time_origin").get<double>();
    tr.region_ids = j.at("region_ids").get<std::vector<std::string>>();
    tr.years = j.at("years").get<std::vector<int>>();
    tr.temporal_names = j.at("temporal_names").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) tr.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    ParamState& s = tr.state;
    s.b0 = j.at("b0").get<double>();
    s.b_spatial = Eigen::VectorXd(0);
    s.b_temporal = from_json_vec(j.at("b_temporal"));
    s.b_climate = Eigen::VectorXd(0);
    s.a1 = j.at("a1").get<double>();
    s.a2 = j.at("a2").get<double>();
    s.tbar = j.at("tbar").get<double>();
    s.lgamma = j.at("lgamma").get<double>();
    s.v = j.at("v").get<double>();
    s.sigma_tau = j.at("sigma_tau").get<double>();
    s.sigma_gamma = j.at("sigma_gamma").get<double>();
    s.sigma1 = j.at("sigma1").get<double>();
    s.sigma2 = j.at("sigma2").get<double>();
    s.sigma10 = j.at("sigma10").get<double>();
    s.sigma20 = j.at("sigma20").get<double>();
    s.alpha1 = from_json_vec(j.at("alpha1"));
    s.alpha2 = from_json_vec(j.at("alpha2"));
    s.tau = from_json_vec(j.at("tau"));
    s.log_gamma = from_json_vec(j.at("log_gamma"));
    s.beta10 = from_json_vec(j.at("beta10"));
    s.beta20 = from_json_vec(j.at("beta20"));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("malformed truth file: ") + e.what(), path);
  }
  return tr;
}

const RecoveryRow* RecoveryReport::find(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

RecoveryReport recovery_report(const TrueParams& truth, const PosteriorSamples& samples) {
  const ParamLayout& L = samples.layout;
  if (L.region_ids() != truth.region_ids) throw ConfigError("recovery: region ids differ between truth and samples");
  if (L.years() != truth.years) throw ConfigError("recovery: years differ between truth and samples");
  if (L.n_spatial() != 0 || L.n_climate() != 0 || L.n_temporal() != static_cast<int>(truth.temporal_names.size())) {
    throw ConfigError("recovery: covariate sets differ between truth and samples");
  }
  for (int k = 0; k < L.n_temporal(); ++k) {
    if (L.names()[L.b_temporal + k] != "b_temporal[" + truth.temporal_names[k] + "]") {
      throw ConfigError("recovery: covariate '" + truth.temporal_names[k] + "' not in samples");
    }
  }
  if (L.mode() != truth.mode_gamma) throw ConfigError("recovery: gamma mode differs between truth and samples");

  const FitReport rep = summarize(samples);
  std::vector<double> flat = L.flatten(truth.state);
  RecoveryReport out;
  auto add = [&](const ParamSummary& p, double t, bool population) {
    const Interval* iv = p.at(0.95);
    RecoveryRow r{p.name, t, p.median, iv->lo, iv->hi, iv->lo <= t && t <= iv->hi, population};
    out.rows.push_back(r);
  };
  for (std::size_t k = 0; k < L.size(); ++k) {
    const bool raw = static_cast<int>(k) == L.b0 ||
                     (static_cast<int>(k) >= L.b_temporal && static_cast<int>(k) < L.b_temporal + L.n_temporal());
    if (raw) {
      for (const auto& p : rep.raw_scale) {
        if (p.name == L.names()[k]) add(p, flat[k], true);
      }
    } else {
      add(rep.params[k], flat[k], L.is_population(k));
    }
  }
  int covered = 0, pop = 0, pop_covered = 0;
  for (const auto& r : out.rows) {
    covered += r.covered;
    if (r.population) {
      ++pop;
      pop_covered += r.covered;
    }
  }
  out.coverage = out.rows.empty() ? 0.0 : static_cast<double>(covered) / out.rows.size();
  out.population_coverage = pop ? static_cast<double>(pop_covered) / pop : 0.0;
  return out;
}

void write_recovery_csv(const RecoveryReport& r, const std::string& path) {
  auto out = open_out(path);
  out << "name,truth,median,lo95,hi95,covered\n";
  for (const auto& row : r.rows) {
    out << row.name << ',' << format_double(row.truth) << ',' << format_double(row.median) << ','
        << format_double(row.lo95) << ',' << format_double(row.hi95) << ',' << (row.covered ? 1 : 0) << '\n';
  }
}

}  // namespace bentcable
