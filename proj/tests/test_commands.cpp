#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "bentcable/assess.hpp"
#include "bentcable/commands.hpp"
#include "bentcable/errors.hpp"
#include "bentcable/samples_io.hpp"
#include "support.hpp"

using namespace bentcable;

namespace {

// A small simulated dataset on disk plus a quick fit configuration for it.
struct Workspace {
  testing::TempDir dir{"commands"};
  std::string data = dir.file("data");

  Workspace() {
    RunConfig sim = make_run_config({{"sim.n_regions", "4"},
                                     {"sim.year_min", "2000"},
                                     {"sim.year_max", "2011"},
                                     {"sim.tbar", "2005"},
                                     {"seed", "3"},
                                     {"out", data}});
    std::ostringstream log;
    REQUIRE(cmd_simulate(sim, log) == kExitOk);
  }

  RunConfig fit_config(const std::string& out, KeyValues extra = {}) const {
    KeyValues kv{{"chains", "2"}, {"iters", "300"}, {"burnin", "100"}, {"thin", "2"}, {"seed", "11"}, {"out", out}};
    for (const auto& [k, v] : extra) kv[k] = v;
    return load_run_config(data + "/fit.cfg", kv);
  }
};

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(testing::read_text(path)); }

}  // namespace

TEST_CASE("simulate writes a fit-ready dataset") {
  Workspace w;
  for (const char* f : {"response.csv", "temporal.csv", "static.csv", "adjacency.csv", "truth.json", "fit.cfg",
                        "manifest.json"}) {
    CHECK(std::filesystem::exists(w.data + "/" + f));
  }
  const LoadedData d = load_data(w.fit_config(w.dir.file("x")), WeightMode::unweighted);
  CHECK(d.panel.n_regions() == 4);
  CHECK(d.panel.n_years() == 12);
}

TEST_CASE("fit with a fixed seed is byte-identical across runs") {
  Workspace w;
  std::ostringstream log;
  REQUIRE(cmd_fit(w.fit_config(w.dir.file("a")), log) == kExitOk);
  REQUIRE(cmd_fit(w.fit_config(w.dir.file("b")), log) == kExitOk);
  for (const char* f : {"samples.csv", "report.json", "summary.csv", "population_cable.csv", "series.csv",
                        "prior_terms.csv"}) {
    INFO(f);
    const std::string a = testing::read_text(w.dir.file("a") + "/" + f);
    CHECK(!a.empty());
    CHECK(a == testing::read_text(w.dir.file("b") + "/" + f));
  }
  // Thread count is not part of the result.
  REQUIRE(cmd_fit(w.fit_config(w.dir.file("c"), {{"threads", "1"}}), log) == kExitOk);
  CHECK(testing::read_text(w.dir.file("a/samples.csv")) == testing::read_text(w.dir.file("c/samples.csv")));
  const auto m = read_json(w.dir.file("a/manifest.json"));
  CHECK(m["command"] == "fit");
  CHECK(m["config"]["seed"] == "11");
}

TEST_CASE("report rebuilds the fit's report from the samples file") {
  Workspace w;
  std::ostringstream log;
  const std::string fit = w.dir.file("fit");
  REQUIRE(cmd_fit(w.fit_config(fit), log) == kExitOk);
  REQUIRE(cmd_report(fit + "/samples.csv", w.dir.file("rep"), log) == kExitOk);
  CHECK(testing::read_text(fit + "/report.json") == testing::read_text(w.dir.file("rep/report.json")));
  CHECK(testing::read_text(fit + "/summary.csv") == testing::read_text(w.dir.file("rep/summary.csv")));
  REQUIRE(cmd_report(fit + "/samples.csv", w.dir.file("rep2"), log) == kExitOk);
  CHECK(testing::read_text(w.dir.file("rep/report.json")) == testing::read_text(w.dir.file("rep2/report.json")));

  const auto rep = read_json(fit + "/report.json");
  const PosteriorSamples s = read_samples(fit + "/samples.csv");
  CHECK(std::abs(rep["p_v"].get<double>() - p_v(s.pooled_deviance())) < 1e-12);
  const double dic_value = rep["dic"].get<double>();
  CHECK(dic_value == rep["mean_deviance"].get<double>() + rep["p_d"].get<double>());

  // Without the original inputs the report still builds, minus DIC.
  std::filesystem::remove_all(w.data);
  std::ostringstream note;
  REQUIRE(cmd_report(fit + "/samples.csv", w.dir.file("rep3"), note) == kExitOk);
  CHECK(note.str().find("DIC and series skipped") != std::string::npos);
  CHECK_FALSE(read_json(w.dir.file("rep3/report.json")).contains("dic"));
}

TEST_CASE("the bend-mean prior location changes only its own prior term") {
  Workspace w;
  std::ostringstream log;
  REQUIRE(cmd_fit(w.fit_config(w.dir.file("m2000"), {{"m2_bend", "2000"}}), log) == kExitOk);
  REQUIRE(cmd_fit(w.fit_config(w.dir.file("m2007"), {{"m2_bend", "2007"}}), log) == kExitOk);
  const std::string a = testing::read_text(w.dir.file("m2000/prior_terms.csv"));
  const std::string b = testing::read_text(w.dir.file("m2007/prior_terms.csv"));
  std::istringstream ia(a), ib(b);
  std::string la, lb;
  int differing = 0;
  while (std::getline(ia, la) && std::getline(ib, lb)) {
    if (la != lb) {
      ++differing;
      CHECK(la.rfind("tbar,", 0) == 0);
    }
  }
  CHECK(differing == 1);
  CHECK(testing::read_text(w.dir.file("m2000/samples.csv")) != testing::read_text(w.dir.file("m2007/samples.csv")));
}

TEST_CASE("run_guarded maps failures to exit codes") {
  std::ostringstream err;
  CHECK(run_guarded([] { return kExitOk; }, err) == kExitOk);
  CHECK(err.str().empty());
  CHECK(run_guarded([]() -> int { throw IngestionError("bad row", "r.csv:4"); }, err) == kExitInput);
  CHECK(err.str().find("error kind=ingestion message=\"r.csv:4: bad row\"") != std::string::npos);
  CHECK(run_guarded([]() -> int { throw ConfigError("x"); }, err) == kExitInput);
  CHECK(run_guarded([]() -> int { throw InitializationError("x"); }, err) == kExitInit);
  CHECK(run_guarded([]() -> int { throw NumericalError("x"); }, err) == kExitInternal);
  CHECK(run_guarded([]() -> int { throw std::logic_error("x"); }, err) == kExitInternal);

  std::ostringstream log;
  CHECK(run_guarded([&] { return cmd_fit(make_run_config({}), log); }, err) == kExitInput);
  testing::TempDir dir("guard");
  const RunConfig missing = make_run_config({{"response", dir.file("none.csv")}, {"out", dir.file("o")}});
  err.str("");
  CHECK(run_guarded([&] { return cmd_fit(missing, log); }, err) == kExitInput);
  CHECK(err.str().rfind("error kind=ingestion", 0) == 0);
}
