// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance            all criteria
//   acceptance 3 5        selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bentcable/assess.hpp"
#include "bentcable/bent_cable.hpp"
#include "bentcable/commands.hpp"
#include "bentcable/config.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/simulate.hpp"
#include "cable_checks.hpp"
#include "car_oracle.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bentcable;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome cable_kernel() {
  const auto t0 = Clock::now();
  const auto r = testing::cable_sweep(1000, 20240601);
  const double secs = seconds_since(t0);
  const bool ok = r.max_jump < 1e-10 && r.max_fd_error < 1e-6 && r.max_straddle_excess < 1e-8 && secs < 1.0;
  return {ok, fmt("max jump %.2e, max FD error %.2e, straddle excess over h/(8 gamma) %.2e, %.3f s", r.max_jump,
                  r.max_fd_error, r.max_straddle_excess, secs)};
}

Outcome tenure() {
  const double b = tenure_covariate(1.0, 0.0), r = tenure_covariate(0.0, 1.0), q = tenure_covariate(0.46, 0.53);
  const bool ok = std::abs(b - 2.0) <= 0.01 && std::abs(r + 2.0) <= 0.01 && std::abs(q + 0.06) <= 0.01;
  return {ok, fmt("Brisbane %.4f, Richmond %.4f, Quilpie %.4f", b, r, q)};
}

Outcome car_oracle() {
  const auto t0 = Clock::now();
  const auto r = testing::car_oracle_sweep(250, 7);
  const double secs = seconds_since(t0);
  const bool ok = r.graphs >= 200 && r.max_mean_error < 1e-10 && r.max_var_error < 1e-10 && secs < 10.0;
  return {ok, fmt("%d graphs, max mean error %.2e, max variance error %.2e, %.2f s", r.graphs, r.max_mean_error,
                  r.max_var_error, secs)};
}

Outcome gibbs() {
  int n = 0, bad = 0;
  double worst = 0.0;
  std::string worst_name, failed;
  for (GammaMode mode : {GammaMode::common, GammaMode::per_region}) {
    const auto f = testing::gibbs_fixture(mode);
    for (const auto& name : testing::gibbs_parameters(mode)) {
      const auto c = testing::gibbs_check(f, name);
      ++n;
      const double z = std::max(std::abs(c.z_mean), std::abs(c.z_var));
      if (z > worst) {
        worst = z;
        worst_name = std::string(to_string(mode)) + ":" + name;
      }
      if (!c.pass()) {
        ++bad;
        failed += std::string(" ") + to_string(mode) + ":" + name;
      }
    }
  }
  return {bad == 0, fmt("%d conditionals x 1e5 draws, largest |z| %.2f (%s)%s%s", n, worst, worst_name.c_str(),
                        bad ? ", failing:" : "", failed.c_str())};
}

Outcome mh() {
  const auto t0 = Clock::now();
  const auto r = testing::single_tau_mh(100000, 5000);
  const double secs = seconds_since(t0);
  return {r.ks < 0.02 && secs < 60.0, fmt("KS %.4f at 1e5 draws, acceptance %.2f, %.1f s", r.ks, r.acceptance, secs)};
}

Outcome recovery() {
  const SimScenario sc;
  const SimDataset ds = simulate_dataset(sc, 1);
  const SpatialWeights w = build_weights(ds.graph, {}, WeightMode::unweighted);
  RunSettings rs;  // 3 chains x 20k
  rs.seed = 1;
  const auto t0 = Clock::now();
  const PosteriorSamples s = run_chains(ds.panel, HyperConfig{}, w, rs);
  const double secs = seconds_since(t0);

  const FitReport rep = summarize(s);
  double worst = 1.0;
  std::string worst_name;
  for (std::size_t k = 0; k < s.layout.size(); ++k) {
    if (!s.layout.is_population(k)) continue;
    if (!(rep.params[k].rhat <= worst)) {
      worst = rep.params[k].rhat;
      worst_name = rep.params[k].name;
    }
  }
  const RecoveryReport rr = recovery_report(ds.truth, s);
  bool covered = true;
  std::string cover;
  for (const char* p : {"a1", "a2", "tbar", "v"}) {
    const RecoveryRow* row = rr.find(p);
    covered = covered && row->covered;
    cover += fmt(" %s %.3f [%.3f, %.3f]%s", p, row->truth, row->lo95, row->hi95, row->covered ? "" : " MISSED");
  }
  const double t_median = rr.find("tbar")->median;
  const bool ok = worst < 1.1 && covered && std::abs(t_median - sc.tbar) <= 2.0 && secs < 600.0;
  return {ok, fmt("max population R-hat %.3f (%s); median T %.2f;%s; %.0f s", worst, worst_name.c_str(), t_median,
                  cover.c_str(), secs)};
}

Outcome noiseless() {
  SimScenario sc;
  sc.v = 1e-6;
  sc.sigma1 = sc.sigma2 = sc.sigma_tau = sc.sigma_gamma = sc.sigma10 = sc.sigma20 = 0.0;
  const SimDataset ds = simulate_dataset(sc, 1);
  const SpatialWeights w = build_weights(ds.graph, {}, WeightMode::unweighted);
  RunSettings rs;
  rs.seed = 1;
  const PosteriorSamples s = run_chains(ds.panel, HyperConfig{}, w, rs);
  const Eigen::MatrixXd det = detrend(ds.panel, s);
  const ParamState& t = ds.truth.state;
  double worst = 0.0;
  int over = 0;
  for (int i = 0; i < ds.panel.n_regions(); ++i) {
    for (int k = 0; k < ds.panel.n_years(); ++k) {
      const double cable = cable_at(ds.panel.years[k], ds.truth.time_origin, t.alpha1[i], t.alpha2[i], t.tau[i],
                                    std::exp(t.log_gamma[i]));
      const double e = std::abs(det(i, k) - cable);
      worst = std::max(worst, e);
      over += e > 1e-2;
    }
  }
  return {worst <= 1e-2, fmt("max |detrended - true cable| %.4f, %d of %d cells over 1e-2; median T %.2f", worst, over,
                             static_cast<int>(det.size()), median(s.pooled(s.layout.tbar)))};
}

Outcome fit_statistics() {
  const std::vector<double> flat(1000, -1234.5678);
  const double pv = p_v(flat);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const PanelData d = testing::tiny_panel(5, 12, 1, 1, seed);
    ParamState s = testing::plain_state(d, seed);
    Rng rng = make_rng({seed, 5});
    s.v = 0.05 + uniform01(rng);
    s.tau.array() += 3.0 * uniform01(rng);
    worst = std::max(worst, std::abs(deviance(d, s) + 2.0 * log_likelihood(d, s)));
  }
  bool identity = true;
  Rng rng = make_rng({99});
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> dev(50);
    for (auto& x : dev) x = 100.0 * std_normal(rng);
    const auto r = dic(dev, 10.0 * std_normal(rng));
    identity = identity && r.dic == r.mean_deviance + r.p_d;
  }
  return {pv == 0.0 && worst <= 1e-12 && identity,
          fmt("p_v(constant) = %g, max |deviance + 2 loglik| %.2e, DIC = mean + p_D %s", pv, worst,
              identity ? "exact in 1000 cases" : "VIOLATED")};
}

Outcome annualization() {
  const auto five = annualize_epochs({{"LGA", 1972, 5, 100.0, 5000.0}});
  bool example = five.size() == 5;
  for (std::size_t k = 0; k < five.size(); ++k) {
    example = example && five[k].year == 1972 + static_cast<int>(k) && five[k].defor_area == 20.0;
  }
  Rng rng = make_rng({1972});
  bool conserved = true;
  int epochs = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<EpochRecord> recs;
    int year = 1972;
    for (int e = 0; e < 5; ++e) {
      const int span = 1 + static_cast<int>(uniform01(rng) * 8);
      recs.push_back({"R", year, span, 1e5 * uniform01(rng), 1e7});
      year += span;
    }
    const auto out = annualize_epochs(recs);
    std::size_t k = 0;
    for (const auto& r : recs) {
      double sum = 0.0;
      for (int j = 0; j < r.epoch_span_years; ++j) sum += out[k++].defor_area;
      conserved = conserved && sum == r.defor_total;
      ++epochs;
    }
  }
  return {example && conserved, fmt("1972 epoch of 100 ha -> 5 x %.1f ha; totals %s over %d random epochs",
                                    five.empty() ? NAN : five[0].defor_area, conserved ? "exact" : "NOT conserved",
                                    epochs)};
}

Outcome determinism() {
  testing::TempDir dir("acceptance");
  std::ostringstream log;
  cmd_simulate(make_run_config({{"seed", "5"}, {"out", dir.file("data")}}), log);
  auto fit = [&](const std::string& out) {
    const RunConfig c = load_run_config(dir.file("data/fit.cfg"),
                                        {{"iters", "2000"}, {"burnin", "1000"}, {"thin", "5"}, {"seed", "77"}, {"out", out}});
    cmd_fit(c, log);
    return testing::read_text(out + "/samples.csv");
  };
  const std::string a = fit(dir.file("run1")), b = fit(dir.file("run2"));
  return {!a.empty() && a == b, fmt("two cmd_fit runs, samples.csv %zu bytes each, %s", a.size(),
                                    a == b ? "byte-identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "bent-cable continuity and C1", cable_kernel},
      {2, "tenure covariate", tenure},
      {3, "CAR conditional oracle", car_oracle},
      {4, "conjugate full conditionals", gibbs},
      {5, "single-tau Metropolis vs grid", mh},
      {6, "parameter recovery", recovery},
      {7, "noiseless round trip", noiseless},
      {8, "fit statistics", fit_statistics},
      {9, "epoch annualization", annualization},
      {10, "fit determinism", determinism},
  };
  std::vector<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.push_back(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %s  %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
