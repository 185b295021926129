#include <doctest.h>

#include <cmath>

#include "bentcable/assess.hpp"
#include "bentcable/bent_cable.hpp"
#include "bentcable/errors.hpp"
#include "bentcable/simulate.hpp"
#include "support.hpp"

using namespace bentcable;

namespace {

// Truth re-expressed on the panel's standardized covariate scale.
ParamState standardized_truth(const SimDataset& ds) {
  ParamState s = ds.truth.state;
  for (int k = 0; k < s.b_temporal.size(); ++k) {
    const auto& c = ds.panel.temporal_scaling[k];
    s.b0 += s.b_temporal[k] * c.center;
    s.b_temporal[k] *= c.scale;
  }
  return s;
}

// Residual of cell (i, t) against the generating mean on the raw scale.
double raw_residual(const SimDataset& ds, int i, int t) {
  const ParamState& s = ds.truth.state;
  const int year = ds.truth.years[t];
  const double gdp = ds.tables.temporal_by_year.at(year).at(ds.truth.temporal_names[0]);
  const double mean = s.b0 + s.beta10[i] + s.beta20[t] + s.b_temporal[0] * gdp +
                      cable_at(year, ds.truth.time_origin, s.alpha1[i], s.alpha2[i], s.tau[i], std::exp(s.log_gamma[i]));
  return ds.panel.y(i, t) - mean;
}

}  // namespace

TEST_CASE("same seed, same dataset; different seed, different dataset") {
  SimScenario sc;
  const auto a = simulate_dataset(sc, 3), b = simulate_dataset(sc, 3), c = simulate_dataset(sc, 4);
  CHECK(a.panel.y == b.panel.y);
  CHECK(a.truth.edges == b.truth.edges);
  CHECK(a.panel.y != c.panel.y);
  CHECK(a.panel.n_regions() == 10);
  CHECK(a.panel.n_years() == 27);
  CHECK(a.panel.n_observed() == 270);
}

TEST_CASE("random graphs are connected") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng = make_rng({seed});
    for (int k : {0, 1, 3}) CHECK(random_planar_graph(12, k, rng).is_connected());
  }
}

TEST_CASE("residual sd matches v") {
  SimScenario sc;
  sc.n_regions = 40;
  sc.year_min = 1;
  sc.year_max = 2500;
  sc.tbar = 1250;
  sc.a1 = sc.a2 = sc.sigma1 = sc.sigma2 = 0.0;  // keep 2500 years of trend in range
  sc.v = 0.3;
  const auto ds = simulate_dataset(sc, 8);
  double ss = 0.0, sum = 0.0;
  long n = 0;
  for (int i = 0; i < ds.panel.n_regions(); ++i) {
    for (int t = 0; t < ds.panel.n_years(); ++t) {
      const double r = raw_residual(ds, i, t);
      sum += r;
      ss += r * r;
      ++n;
    }
  }
  REQUIRE(n == 100000);
  CHECK(std::abs(std::sqrt(ss / n) - 0.3) < 0.003);
  CHECK(std::abs(sum / n) < 4 * 0.3 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("zero sds give exact Level 2 effects") {
  SimScenario sc;
  sc.sigma1 = sc.sigma2 = sc.sigma_tau = sc.sigma10 = sc.sigma20 = 0.0;
  const auto ds = simulate_dataset(sc, 2);
  const ParamState& s = ds.truth.state;
  CHECK((s.alpha1.array() == sc.a1).all());
  CHECK((s.alpha2.array() == sc.a2).all());
  CHECK((s.tau.array() == sc.tbar).all());
  CHECK(s.beta10.isZero(0.0));
  CHECK(s.beta20.isZero(0.0));
}

TEST_CASE("log-likelihood at the truth beats perturbed parameters") {
  SimScenario sc;
  const auto ds = simulate_dataset(sc, 5);
  const ParamState truth = standardized_truth(ds);
  const double at_truth = log_likelihood(ds.panel, truth);
  auto worse = [&](auto edit) {
    ParamState p = truth;
    edit(p);
    return log_likelihood(ds.panel, p) < at_truth;
  };
  CHECK(worse([](ParamState& p) { p.b0 += 0.3; }));
  CHECK(worse([](ParamState& p) { p.alpha2.array() -= 0.2; }));
  CHECK(worse([](ParamState& p) { p.tau.array() -= 8.0; }));
  CHECK(worse([](ParamState& p) { p.beta20.setZero(); }));
  CHECK(worse([](ParamState& p) { p.v *= 2.0; }));
}

TEST_CASE("truth file round trip") {
  testing::TempDir dir("truth");
  const auto ds = simulate_dataset(SimScenario{}, 6);
  write_truth_json(ds.truth, dir.file("truth.json"));
  const TrueParams back = read_truth_json(dir.file("truth.json"));
  CHECK(back.region_ids == ds.truth.region_ids);
  CHECK(back.years == ds.truth.years);
  CHECK(back.edges == ds.truth.edges);
  CHECK(back.time_origin == ds.truth.time_origin);
  const ParamLayout l(ds.panel, GammaMode::common);
  CHECK(l.flatten(back.state) == l.flatten(ds.truth.state));
  testing::write_text(dir.file("bad.json"), "{\"mode_gamma\": 3}");
  CHECK_THROWS_AS(read_truth_json(dir.file("bad.json")), IngestionError);
}

TEST_CASE("written dataset reads back to the same panel") {
  testing::TempDir dir("simfiles");
  const auto ds = simulate_dataset(SimScenario{}, 9);
  write_dataset(ds, dir.path().string());
  CovariateTables tab;
  read_static_csv(dir.file("static.csv"), tab);
  read_temporal_csv(dir.file("temporal.csv"), tab);
  PanelConfig pc;
  pc.temporal_covariates = {"gdp_growth_pct"};
  const PanelData p = build_panel(read_response_csv(dir.file("response.csv")), tab, pc);
  CHECK(p.region_ids == ds.panel.region_ids);
  CHECK(p.years == ds.panel.years);
  CHECK(p.y == ds.panel.y);
  CHECK(p.temporal == ds.panel.temporal);
  const AdjacencyGraph g = read_adjacency(dir.file("adjacency.csv"), p.region_ids, {});
  CHECK(g.edges() == ds.graph.edges());
}

TEST_CASE("a point-mass posterior at the truth covers every parameter") {
  const auto ds = simulate_dataset(SimScenario{}, 10);
  const ParamState truth = standardized_truth(ds);
  const std::vector<std::vector<ParamState>> chains(2, std::vector<ParamState>(20, truth));
  const auto smp = testing::samples_from_states(ds.panel, GammaMode::common, chains);
  const RecoveryReport r = recovery_report(ds.truth, smp);
  CHECK(r.coverage == 1.0);
  CHECK(r.population_coverage == 1.0);
  const RecoveryRow* b = r.find("b_temporal[gdp_growth_pct]");
  REQUIRE(b != nullptr);
  CHECK(b->median == doctest::Approx(-0.03).epsilon(1e-12));
  CHECK(r.find("b0")->median == doctest::Approx(2.0).epsilon(1e-12));

  TrueParams other = ds.truth;
  other.years.pop_back();
  CHECK_THROWS_AS(recovery_report(other, smp), ConfigError);
}

TEST_CASE("scenario validation") {
  SimScenario sc;
  sc.v = -1.0;
  CHECK_THROWS_AS(simulate_dataset(sc, 1), ConfigError);
  sc = SimScenario{};
  sc.gamma = 0.0;
  CHECK_THROWS_AS(simulate_dataset(sc, 1), ConfigError);
  sc = SimScenario{};
  sc.year_max = sc.year_min - 1;
  CHECK_THROWS_AS(simulate_dataset(sc, 1), ConfigError);
}
