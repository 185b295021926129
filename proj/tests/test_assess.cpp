#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "bentcable/assess.hpp"
#include "bentcable/errors.hpp"
#include "support.hpp"

using namespace bentcable;

TEST_CASE("deviance") {
  PanelData d = testing::tiny_panel(1, 1, 0, 0, 1);
  ParamState s = ParamState::zeros(d);
  s.v = 1.0;
  s.log_gamma.setZero();
  d.y(0, 0) = 0.0;
  CHECK(deviance(d, s) == doctest::Approx(std::log(2 * M_PI)).epsilon(1e-15));
  const PanelData big = testing::tiny_panel(3, 5, 1, 1, 2);
  const ParamState t = testing::plain_state(big, 2);
  CHECK(std::abs(deviance(big, t) + 2 * log_likelihood(big, t)) < 1e-12);
}

TEST_CASE("p_v") {
  const std::vector<double> flat(50, 123.456);
  CHECK(p_v(flat) == 0.0);
  CHECK(p_v(std::vector<double>{0.0, 2.0}) == 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(10, 3);
  std::vector<double> x(200), cx(200);
  for (int k = 0; k < 200; ++k) {
    x[k] = n(rng);
    cx[k] = 2.5 * x[k];
  }
  CHECK(p_v(cx) == doctest::Approx(6.25 * p_v(x)).epsilon(1e-12));
  CHECK(p_v(x) > 0.0);
  CHECK_THROWS_AS(p_v(std::vector<double>{1.0}), DomainError);
}

TEST_CASE("dic") {
  auto r = dic(std::vector<double>{10.0, 10.0}, 6.0);
  CHECK(r.p_d == 4.0);
  CHECK(r.dic == 14.0);
  CHECK(r.dic == r.mean_deviance + r.p_d);
  r = dic(std::vector<double>{7.5, 7.5, 7.5}, 7.5);
  CHECK(r.p_d == 0.0);
  CHECK(r.dic == 7.5);
  const auto a = dic(std::vector<double>{3.0, 5.0, 9.0}, 4.0);
  const auto b = dic(std::vector<double>{103.0, 105.0, 109.0}, 104.0);
  CHECK(b.p_d == doctest::Approx(a.p_d).epsilon(1e-13));
  CHECK(b.dic == doctest::Approx(a.dic + 100.0).epsilon(1e-13));
  CHECK_THROWS_AS(dic(std::vector<double>{}, 1.0), DomainError);
}

TEST_CASE("type-7 quantiles on 1..100") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(quantile_sorted(x, 0.1) == doctest::Approx(10.9).epsilon(1e-13));
  CHECK(quantile_sorted(x, 0.9) == doctest::Approx(90.1).epsilon(1e-13));
  CHECK(quantile_sorted(x, 0.025) == doctest::Approx(3.475).epsilon(1e-13));
  CHECK(quantile_sorted(x, 0.975) == doctest::Approx(97.525).epsilon(1e-13));
  CHECK(quantile_sorted(x, 0.0) == 1.0);
  CHECK(quantile_sorted(x, 1.0) == 100.0);
  CHECK(median(x) == 50.5);
  const auto s = summarize_draws("x", {x}, kDefaultLevels);
  CHECK(s.at(0.95)->lo < s.at(0.80)->lo);
  CHECK(s.at(0.95)->hi > s.at(0.80)->hi);
}

TEST_CASE("constant trace summaries collapse to the constant") {
  const std::vector<double> c(40, -2.5);
  const auto s = summarize_draws("c", {c, c}, kDefaultLevels);
  CHECK(s.median == -2.5);
  for (const auto& iv : s.intervals) {
    CHECK(iv.lo == -2.5);
    CHECK(iv.hi == -2.5);
  }
  CHECK(s.rhat == 1.0);
}

TEST_CASE("intervals are nested and bracket the median") {
  std::mt19937_64 rng(11);
  std::gamma_distribution<double> g(1.3, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::vector<double>> chains(3, std::vector<double>(37));
    for (auto& ch : chains) {
      for (auto& x : ch) x = g(rng) - 2.0;
    }
    const auto s = summarize_draws("p", chains, std::vector<double>{0.5, 0.8, 0.95});
    for (std::size_t k = 0; k < s.intervals.size(); ++k) {
      CHECK(s.intervals[k].lo <= s.median);
      CHECK(s.median <= s.intervals[k].hi);
      if (k > 0) {
        CHECK(s.intervals[k].lo <= s.intervals[k - 1].lo);
        CHECK(s.intervals[k].hi >= s.intervals[k - 1].hi);
      }
    }
  }
}

TEST_CASE("symmetric trace has median near zero") {
  Rng rng = make_rng({4});
  std::vector<double> x(20000);
  for (auto& v : x) v = std_normal(rng);
  CHECK(std::abs(median(x)) < 4 * 1.2533 / std::sqrt(20000.0));
}

TEST_CASE("rhat conventions") {
  std::vector<double> a(100);
  Rng rng = make_rng({12});
  for (auto& v : a) v = std_normal(rng);
  CHECK(rhat({a, a}) == 1.0);
  const std::vector<double> c0(50, 0.0), c1(50, 1.0);
  CHECK(rhat({c0, c0}) == 1.0);
  CHECK(rhat({c0, c1}) > 1e6);
  CHECK_THROWS_AS(rhat({a}), DomainError);
  CHECK_THROWS_AS(rhat({std::vector<double>(5, 0.0), std::vector<double>(5, 1.0)}), DomainError);
}

TEST_CASE("rhat of two iid normal chains of length 1e4") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng = make_rng({seed, 3});
    std::vector<double> a(10000), b(10000);
    for (auto& v : a) v = std_normal(rng);
    for (auto& v : b) v = std_normal(rng);
    const double r = rhat({a, b});
    CHECK(r >= 1.0);
    CHECK(r <= 1.01);
  }
}

namespace {

// Noiseless panel from a known state.
std::pair<PanelData, ParamState> exact_panel(std::uint64_t seed) {
  PanelData d = testing::tiny_panel(4, 15, 1, 1, seed);
  ParamState s = testing::plain_state(d, seed);
  s.tbar = 2006.0;
  for (int i = 0; i < 4; ++i) s.tau[i] = 2005.0 + i;
  for (int i = 0; i < 4; ++i) {
    for (int t = 0; t < 15; ++t) d.y(i, t) = fixed_mean(d, s, i, t) + cable_mean(d, s, i, t);
  }
  return {d, s};
}

}  // namespace

TEST_CASE("detrending noiseless data at the true effects returns each cable") {
  auto [d, s] = exact_panel(5);
  const Eigen::MatrixXd dt = detrend(d, s);
  for (int i = 0; i < 4; ++i) {
    for (int t = 0; t < 15; ++t) {
      const double cable = cable_at(d.years[t], d.time_origin, s.alpha1[i], s.alpha2[i], s.tau[i], std::exp(s.log_gamma[i]));
      CHECK(std::abs(dt(i, t) - cable) < 1e-8);
    }
  }
}

TEST_CASE("detrend properties") {
  auto [d, s] = exact_panel(6);
  d.observed(2, 3) = false;
  const Eigen::MatrixXd base = detrend(d, s);
  CHECK(std::isnan(base(2, 3)));

  ParamState zero = ParamState::zeros(d);
  const Eigen::MatrixXd raw = detrend(d, zero);
  CHECK(raw(1, 4) == d.y(1, 4));

  ParamState shifted = s;
  shifted.b0 += 0.75;
  PanelData dy = d;
  dy.y.array() += 0.3;
  const Eigen::MatrixXd a = detrend(d, shifted), b = detrend(dy, s);
  for (int i = 0; i < 4; ++i) {
    for (int t = 0; t < 15; ++t) {
      if (!d.observed(i, t)) continue;
      CHECK(a(i, t) == doctest::Approx(base(i, t) - 0.75).epsilon(1e-12));
      CHECK(b(i, t) == doctest::Approx(base(i, t) + 0.3).epsilon(1e-12));
    }
  }
}

TEST_CASE("fit report from hand-built samples") {
  auto [d, s] = exact_panel(7);
  std::vector<std::vector<ParamState>> chains(2);
  Rng rng = make_rng({7});
  for (auto& ch : chains) {
    for (int k = 0; k < 30; ++k) {
      ParamState x = s;
      x.b0 += 0.01 * std_normal(rng);
      x.tbar += std_normal(rng);
      x.beta10[0] = 2.0 + 0.01 * std_normal(rng);
      x.beta10[1] = -2.0 + 0.01 * std_normal(rng);
      ch.push_back(x);
    }
  }
  const PosteriorSamples smp = testing::samples_from_states(d, GammaMode::common, chains);
  const FitReport r = fit_report(d, smp);
  REQUIRE(r.dic);
  CHECK(r.dic->dic == r.dic->mean_deviance + r.dic->p_d);
  const auto dev = smp.pooled_deviance();
  CHECK(r.p_v == doctest::Approx(p_v(dev)).epsilon(1e-14));
  CHECK(r.posterior_median_deviance == median(dev));
  // Plug-in: posterior mean for b0, posterior median for tbar.
  const ParamState plug = plugin_state(smp);
  CHECK(plug.tbar == median(smp.pooled(smp.layout.tbar)));
  const auto b0 = smp.pooled(smp.layout.b0);
  CHECK(plug.b0 == doctest::Approx(std::accumulate(b0.begin(), b0.end(), 0.0) / b0.size()).epsilon(1e-14));
  CHECK(std::find(r.spatial_contagion.begin(), r.spatial_contagion.end(), "G0") != r.spatial_contagion.end());
  CHECK(std::find(r.spatial_contagion.begin(), r.spatial_contagion.end(), "G1") != r.spatial_contagion.end());
  const auto pc = population_cable(smp);
  CHECK(pc.window.mid == median(smp.pooled(smp.layout.tbar)));
  CHECK(pc.years == d.years);
}
