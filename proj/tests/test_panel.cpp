#include <doctest.h>

#include <cmath>
#include <random>

#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"
#include "bentcable/panel.hpp"
#include "support.hpp"

using namespace bentcable;
using testing::TempDir;
using testing::write_text;

TEST_CASE("1972 five-year epoch is divided by five") {
  const auto out = annualize_epochs({{"Q1", 1972, 5, 100.0, 5000.0}});
  REQUIRE(out.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(out[k].region_id == "Q1");
    CHECK(out[k].year == 1972 + k);
    CHECK(out[k].defor_area == 20.0);
    CHECK(out[k].forest_extent == 5000.0);
  }
}

TEST_CASE("annualization conserves totals exactly") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> amount(0.0, 1e5);
  std::uniform_int_distribution<int> span(1, 9);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<EpochRecord> recs;
    int year = 1972;
    for (int e = 0; e < 4; ++e) {
      const int s = span(rng);
      recs.push_back({"R", year, s, amount(rng), 1e6});
      year += s;
    }
    const auto out = annualize_epochs(recs);
    std::size_t k = 0;
    for (const auto& r : recs) {
      double sum = 0.0;
      for (int j = 0; j < r.epoch_span_years; ++j) sum += out[k++].defor_area;
      CHECK(sum == r.defor_total);
    }
    CHECK(k == out.size());
  }
}

TEST_CASE("span-1 epochs pass through and overlaps are rejected") {
  const auto one = annualize_epochs({{"A", 2005, 1, 12.5, 900.0}});
  REQUIRE(one.size() == 1);
  CHECK(one[0].year == 2005);
  CHECK(one[0].defor_area == 12.5);
  CHECK_THROWS_AS(annualize_epochs({{"A", 1972, 5, 1, 10}, {"A", 1975, 2, 1, 10}}), IngestionError);
  CHECK_THROWS_AS(annualize_epochs({{"A", 1972, 0, 1, 10}}), IngestionError);
  CHECK_NOTHROW(annualize_epochs({{"A", 1972, 5, 1, 10}, {"A", 1977, 2, 1, 10}}));
}

TEST_CASE("epoch csv reader") {
  TempDir dir("epochs");
  const auto path = write_text(dir.file("e.csv"),
                               "region_id,epoch_start_year,span_years,defor_total_ha,forest_extent_ha\n"
                               "A,1988,2,10,1000\nA,1990,1,3,990\n");
  const auto recs = read_epoch_csv(path);
  REQUIRE(recs.size() == 2);
  CHECK(annualize_epochs(recs).size() == 3);
  write_text(dir.file("bad.csv"), "region_id,epoch_start_year,span_years,defor_total_ha,forest_extent_ha\nA,1988,0,1,1\n");
  CHECK_THROWS_AS(read_epoch_csv(dir.file("bad.csv")), IngestionError);
}

namespace {

std::vector<RegionObservation> small_obs() {
  std::vector<RegionObservation> obs;
  for (const char* id : {"A", "B"}) {
    for (int y = 1990; y <= 1995; ++y) obs.push_back({id, y, 1.0 + 0.37 * (y - 1990) + (id[0] == 'B'), 1000.0, {}});
  }
  return obs;
}

PanelConfig window(int lo, int hi) {
  PanelConfig c;
  c.year_min = lo;
  c.year_max = hi;
  return c;
}

}  // namespace

TEST_CASE("response-only panel") {
  const PanelData p = build_panel(small_obs(), {}, window(1991, 1994));
  CHECK(p.n_regions() == 2);
  CHECK(p.n_years() == 4);
  CHECK(p.time_origin == 1992.5);
  CHECK(p.n_spatial() == 0);
  CHECK(p.n_temporal() == 0);
  CHECK(p.n_observed() == 8);
  CHECK(p.y(0, 0) == transform_response(1.37, 1000.0));
}

TEST_CASE("zero cells are missing, ratios of one or more are errors") {
  auto obs = small_obs();
  obs[2].defor_area = 0.0;
  const PanelData p = build_panel(obs, {}, window(1990, 1995));
  CHECK_FALSE(p.observed(0, 2));
  CHECK(p.n_observed() == 11);
  PanelConfig floored = window(1990, 1995);
  floored.zero_floor = 1e-6;
  CHECK(build_panel(obs, {}, floored).n_observed() == 12);

  obs[2].defor_area = 1000.0;
  CHECK_THROWS_AS(build_panel(obs, {}, window(1990, 1995)), IngestionError);
}

TEST_CASE("a region with no usable response is rejected by name") {
  auto obs = small_obs();
  for (auto& o : obs) {
    if (o.region_id == "B") o.defor_area = 0.0;
  }
  try {
    build_panel(obs, {}, window(1990, 1995));
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("B") != std::string::npos);
  }
}

TEST_CASE("duplicate cells and unknown regions") {
  auto obs = small_obs();
  obs.push_back(obs.front());
  CHECK_THROWS_AS(build_panel(obs, {}, window(1990, 1995)), IngestionError);
  PanelConfig c = window(1990, 1995);
  c.regions = {"A", "Z"};
  CHECK_THROWS_AS(build_panel(small_obs(), {}, c), IngestionError);
  PanelConfig s = window(1990, 1995);
  s.spatial_covariates = {"elev"};
  CovariateTables t;
  t.static_columns = {"elev"};
  t.static_by_region["A"]["elev"] = 10;
  CHECK_THROWS_AS(build_panel(small_obs(), t, s), IngestionError);
}

TEST_CASE("covariates are standardized and the scaling recorded") {
  CovariateTables t;
  t.static_columns = {"elev", "frac_freehold", "frac_leasehold"};
  t.static_by_region["A"] = {{"elev", 100.0}, {"frac_freehold", 1.0}, {"frac_leasehold", 0.0}};
  t.static_by_region["B"] = {{"elev", 300.0}, {"frac_freehold", 0.0}, {"frac_leasehold", 1.0}};
  t.temporal_columns = {"gdp"};
  for (int y = 1990; y <= 1995; ++y) t.temporal_by_year[y]["gdp"] = y - 1990.0;
  PanelConfig c = window(1990, 1995);
  c.spatial_covariates = {"elev", "tenure"};
  c.temporal_covariates = {"gdp"};
  const PanelData p = build_panel(small_obs(), t, c);
  REQUIRE(p.spatial_scaling.size() == 2);
  CHECK(p.spatial_scaling[0].center == 200.0);
  CHECK(p.spatial(0, 0) * p.spatial_scaling[0].scale + p.spatial_scaling[0].center == doctest::Approx(100.0));
  CHECK(p.tenure[0] == doctest::Approx(std::log10(101.0)));
  CHECK(p.temporal.col(0).mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(p.temporal_scaling[0].center == 2.5);

  c.standardize = false;
  const PanelData raw = build_panel(small_obs(), t, c);
  CHECK(raw.spatial(1, 0) == 300.0);
  CHECK(raw.temporal(3, 0) == 3.0);
}

TEST_CASE("response csv round trip is bit-identical") {
  TempDir dir("roundtrip");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(1e-3, 900.0);
  std::vector<RegionObservation> obs;
  for (const char* id : {"A", "B", "C"}) {
    for (int y = 1988; y <= 2000; ++y) obs.push_back({id, y, u(rng), 1000.0 + u(rng), {}});
  }
  std::string text = "region_id,year,defor_area_ha,forest_extent_ha\n";
  for (const auto& o : obs) {
    text += o.region_id + "," + std::to_string(o.year) + "," + format_double(o.defor_area) + "," +
            format_double(o.forest_extent) + "\n";
  }
  write_text(dir.file("in.csv"), text);
  const PanelData p = build_panel(read_response_csv(dir.file("in.csv")), {}, window(1990, 1998));
  export_response_csv(p, dir.file("out.csv"));
  const PanelData q = build_panel(read_response_csv(dir.file("out.csv")), {}, window(1990, 1998));
  for (int i = 0; i < p.n_regions(); ++i) {
    for (int t = 0; t < p.n_years(); ++t) {
      CHECK(p.defor_area(i, t) == q.defor_area(i, t));
      CHECK(p.forest_extent(i, t) == q.forest_extent(i, t));
      CHECK(p.y(i, t) == q.y(i, t));
      const auto& o = obs[i * 13 + t + 2];
      CHECK(p.defor_area(i, t) == o.defor_area);
    }
  }
}

TEST_CASE("adjacency file: excluded regions drop their edges") {
  TempDir dir("adj");
  write_text(dir.file("adj.csv"), "# edges\nA,B\nB,X\nX,C\nB,C\n");
  const AdjacencyGraph g = read_adjacency(dir.file("adj.csv"), {"A", "B", "C"}, {"X"});
  CHECK(g.edges().size() == 2);
  CHECK(g.is_connected());
  CHECK_THROWS_AS(read_adjacency(dir.file("adj.csv"), {"A", "B", "C"}), IngestionError);
  write_text(dir.file("self.csv"), "A,A\n");
  CHECK_THROWS_AS(read_adjacency(dir.file("self.csv"), {"A"}), IngestionError);
}

TEST_CASE("log10p1") {
  CHECK(log10p1(0.0) == 0.0);
  CHECK(log10p1(9.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(log10p1(99.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(log10p1(-1.0), DomainError);
}

TEST_CASE("correlation matrix") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd cols(50, 4);
  for (int r = 0; r < 50; ++r) {
    cols(r, 0) = n(rng);
    cols(r, 1) = 0.5 * cols(r, 0) + n(rng);
    cols(r, 2) = 7.0;
    cols(r, 3) = n(rng);
  }
  cols(3, 3) = NAN;
  const auto c = correlation_matrix({"a", "b", "const", "gappy"}, cols);
  CHECK(c.r(0, 0) == 1.0);
  CHECK(c.r(3, 3) == 1.0);
  CHECK(c.r(0, 1) == c.r(1, 0));
  CHECK(c.r(0, 3) == c.r(3, 0));
  CHECK(std::isnan(c.r(2, 2)));
  CHECK(std::isnan(c.r(0, 2)));
  CHECK(std::isnan(c.r(2, 1)));
  // Independent Pearson on the two complete columns.
  const Eigen::VectorXd a = cols.col(0).array() - cols.col(0).mean();
  const Eigen::VectorXd b = cols.col(1).array() - cols.col(1).mean();
  CHECK(c.r(0, 1) == doctest::Approx(a.dot(b) / (a.norm() * b.norm())).epsilon(1e-13));
}
