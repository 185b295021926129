#include "bentcable/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>

#include <Eigen/Core>
#include <json.hpp>

#include "bentcable/assess.hpp"
#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"
#include "bentcable/samples_io.hpp"
#include "bentcable/simulate.hpp"

#ifndef BENTCABLE_VERSION
#define BENTCABLE_VERSION "dev"
#endif

namespace fs = std::filesystem;

namespace bentcable {

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const KeyValues& config,
                    const std::vector<std::string>& files) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["bentcable_version"] = BENTCABLE_VERSION;
  j["compiler"] = __VERSION__;
  j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
#ifdef _OPENMP
  j["openmp"] = _OPENMP;
#endif
  j["config"] = config;
  j["files"] = files;
  auto out = open_out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

KeyValues full_config(const RunConfig& c) {
  KeyValues kv = c.snapshot();
  kv["out"] = c.out;
  kv["threads"] = std::to_string(c.run.threads);
  kv["backend"] = c.backend == kernels::Backend::openmp ? "openmp" : "serial";
  return kv;
}

void write_prior_terms(const LoadedData& d, const HyperConfig& h, const fs::path& path) {
  const ParamState ref = reference_state(d.panel);
  auto out = open_out(path);
  out << "term,value\n";
  for (const auto& t : log_prior_terms(ref, h, d.weights)) out << t.name << ',' << format_double(t.value) << '\n';
}

void write_population_cable(const PosteriorSamples& s, const fs::path& path) {
  const CableCurve c = population_cable(s);
  auto out = open_out(path);
  out << "year,value\n";
  for (std::size_t t = 0; t < c.years.size(); ++t) out << c.years[t] << ',' << format_double(c.values[t]) << '\n';
}

// Report artifacts shared by fit and report. `data` may be null when the
// original inputs are unavailable; DIC and series are then skipped.
std::vector<std::string> write_report_files(const PosteriorSamples& s, const PanelData* data, const fs::path& dir) {
  std::vector<std::string> files;
  const FitReport rep = data ? fit_report(*data, s) : summarize(s);
  write_report_json(rep, s.meta, (dir / "report.json").string());
  files.push_back("report.json");
  write_summary_csv(rep, (dir / "summary.csv").string());
  files.push_back("summary.csv");
  write_population_cable(s, dir / "population_cable.csv");
  files.push_back("population_cable.csv");
  if (data) {
    write_series_csv(*data, s, (dir / "series.csv").string());
    files.push_back("series.csv");
  }
  return files;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') {
      out += '\\';
      out += ch;
    } else if (ch == '\n' || ch == '\r') {
      out += ' ';
    } else {
      out += ch;
    }
  }
  return out;
}

FitReport fit_into(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  const LoadedData d = load_data(cfg, cfg.hyper.mode_spatial);
  log << "panel: " << d.panel.n_regions() << " regions x " << d.panel.n_years() << " years, "
      << d.panel.n_observed() << " observed cells\n";

  SamplerOptions opt;
  opt.backend = cfg.backend;
  PosteriorSamples s = run_chains(d.panel, cfg.hyper, d.weights, cfg.run, std::nullopt, opt);
  s.meta.config = cfg.snapshot();

  std::vector<std::string> files;
  write_samples(s, (dir / "samples.csv").string());
  files.push_back("samples.csv");
  for (auto& f : write_report_files(s, &d.panel, dir)) files.push_back(f);
  write_prior_terms(d, cfg.hyper, dir / "prior_terms.csv");
  files.push_back("prior_terms.csv");
  write_manifest(dir, "fit", full_config(cfg), files);

  const FitReport rep = fit_report(d.panel, s);
  log << std::setprecision(10) << "posterior median deviance: " << rep.posterior_median_deviance
      << "  p_V: " << rep.p_v;
  if (rep.dic) log << "  DIC: " << rep.dic->dic << "  p_D: " << rep.dic->p_d;
  log << '\n';
  double worst = 1.0;
  for (std::size_t k = 0; k < s.layout.n_population(); ++k) {
    if (std::isfinite(rep.params[k].rhat)) worst = std::max(worst, rep.params[k].rhat);
  }
  if (s.chains.size() >= 2) log << "max population R-hat: " << worst << '\n';
  return rep;
}

}  // namespace

LoadedData load_data(const RunConfig& cfg, WeightMode mode) {
  std::vector<RegionObservation> obs;
  if (!cfg.response.empty() && !cfg.epochs.empty()) throw ConfigError("set only one of 'response' and 'epochs'");
  if (!cfg.response.empty()) {
    obs = read_response_csv(cfg.response);
  } else if (!cfg.epochs.empty()) {
    obs = annualize_epochs(read_epoch_csv(cfg.epochs));
  } else {
    throw ConfigError("no response data: set 'response' or 'epochs'");
  }
  if (!cfg.exclude_regions.empty()) {
    const std::set<std::string> ex(cfg.exclude_regions.begin(), cfg.exclude_regions.end());
    std::erase_if(obs, [&](const RegionObservation& o) { return ex.count(o.region_id) > 0; });
  }
  CovariateTables tables;
  if (!cfg.static_csv.empty()) read_static_csv(cfg.static_csv, tables);
  if (!cfg.temporal_csv.empty()) read_temporal_csv(cfg.temporal_csv, tables);
  if (!cfg.spatiotemporal_csv.empty()) read_spatiotemporal_csv(cfg.spatiotemporal_csv, tables);

  LoadedData d;
  d.panel = build_panel(obs, tables, cfg.panel);
  if (!cfg.adjacency.empty()) {
    d.graph = read_adjacency(cfg.adjacency, d.panel.region_ids, cfg.exclude_regions);
  } else if (d.panel.n_regions() == 1) {
    d.graph = AdjacencyGraph(1, {});
  } else {
    throw ConfigError("no adjacency file: set 'adjacency'");
  }
  if (mode == WeightMode::tenure_weighted && d.panel.tenure.size() != d.panel.n_regions()) {
    throw ConfigError("tenure-weighted mode needs frac_freehold and frac_leasehold in the static file");
  }
  d.weights = build_weights(
      d.graph, std::span<const double>(d.panel.tenure.data(), static_cast<std::size_t>(d.panel.tenure.size())), mode);
  return d;
}

ParamState reference_state(const PanelData& data) {
  ParamState s = ParamState::zeros(data);
  s.tbar = data.time_origin;
  s.tau.setConstant(data.time_origin);
  s.lgamma = std::log(2.0);
  s.log_gamma.setConstant(s.lgamma);
  return s;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  fit_into(cfg, cfg.out, log);
  log << "wrote " << cfg.out << '\n';
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const SimDataset ds = simulate_dataset(cfg.sim, cfg.run.seed);
  write_dataset(ds, cfg.out);
  const fs::path dir(cfg.out);
  {
    auto out = open_out(dir / "fit.cfg");
    out << "# fit configuration for this simulated dataset\n"
        << "response = response.csv\n"
        << "static = static.csv\n"
        << "temporal = temporal.csv\n"
        << "adjacency = adjacency.csv\n"
        << "temporal_covariates = " << cfg.sim.temporal_name << '\n'
        << "year_min = " << cfg.sim.year_min << '\n'
        << "year_max = " << cfg.sim.year_max << '\n'
        << "mode_gamma = " << to_string(cfg.sim.mode_gamma) << '\n'
        << "mode_spatial = " << to_string(cfg.sim.mode_spatial) << '\n';
  }
  KeyValues kv = full_config(cfg);
  const SimScenario& sc = cfg.sim;
  kv["sim.n_regions"] = std::to_string(sc.n_regions);
  kv["sim.year_min"] = std::to_string(sc.year_min);
  kv["sim.year_max"] = std::to_string(sc.year_max);
  kv["sim.knn"] = std::to_string(sc.knn);
  kv["sim.temporal_name"] = sc.temporal_name;
  kv["sim.mode_gamma"] = to_string(sc.mode_gamma);
  kv["sim.mode_spatial"] = to_string(sc.mode_spatial);
  const std::pair<const char*, double> nums[] = {
      {"sim.temporal_mean", sc.temporal_mean}, {"sim.temporal_sd", sc.temporal_sd}, {"sim.b0", sc.b0},
      {"sim.b_temporal", sc.b_temporal},       {"sim.a1", sc.a1},                   {"sim.a2", sc.a2},
      {"sim.tbar", sc.tbar},                   {"sim.gamma", sc.gamma},             {"sim.v", sc.v},
      {"sim.sigma1", sc.sigma1},               {"sim.sigma2", sc.sigma2},           {"sim.sigma_tau", sc.sigma_tau},
      {"sim.sigma_gamma", sc.sigma_gamma},     {"sim.sigma10", sc.sigma10},         {"sim.sigma20", sc.sigma20}};
  for (const auto& [k, v] : nums) kv[k] = format_double(v);
  write_manifest(dir, "simulate", kv,
                 {"response.csv", "temporal.csv", "static.csv", "adjacency.csv", "truth.json", "fit.cfg"});
  log << "wrote simulated dataset (" << sc.n_regions << " regions, " << sc.year_min << "-" << sc.year_max
      << ") to " << cfg.out << '\n';
  return kExitOk;
}

int cmd_report(const std::string& samples_path, const std::string& out_dir, std::ostream& log) {
  const PosteriorSamples s = read_samples(samples_path);
  fs::create_directories(out_dir);
  std::optional<LoadedData> d;
  if (!s.meta.config.empty()) {
    try {
      const RunConfig cfg = make_run_config(s.meta.config);
      d = load_data(cfg, s.meta.hyper.mode_spatial);
      if (d->panel.region_ids != s.layout.region_ids() || d->panel.years != s.layout.years()) d.reset();
    } catch (const std::exception& e) {
      log << "note: original inputs unavailable (" << e.what() << "); DIC and series skipped\n";
      d.reset();
    }
  }
  auto files = write_report_files(s, d ? &d->panel : nullptr, out_dir);
  log << "wrote";
  for (const auto& f : files) log << ' ' << f;
  log << " to " << out_dir << '\n';
  return kExitOk;
}

int cmd_variants(const RunConfig& cfg, std::ostream& log) {
  fs::create_directories(cfg.out);
  struct Row {
    double m2;
    WeightMode mode;
    FitReport rep;
  };
  std::vector<Row> rows;
  for (double m2 : {2000.0, 2007.0}) {
    for (WeightMode mode : {WeightMode::unweighted, WeightMode::tenure_weighted}) {
      RunConfig v = cfg;
      v.hyper.m2_bend = m2;
      v.hyper.mode_spatial = mode;
      const fs::path dir = fs::path(cfg.out) / ("m2_" + std::to_string(static_cast<int>(m2)) + "_" + to_string(mode));
      log << "== variant m2=" << m2 << " " << to_string(mode) << '\n';
      rows.push_back({m2, mode, fit_into(v, dir, log)});
    }
  }
  auto out = open_out(fs::path(cfg.out) / "variants.csv");
  out << "m2_bend,mode_spatial,posterior_median_deviance,p_v,dic,p_d\n";
  log << "m2_bend  mode_spatial     median_deviance        p_V\n";
  for (const auto& r : rows) {
    out << format_double(r.m2) << ',' << to_string(r.mode) << ',' << format_double(r.rep.posterior_median_deviance)
        << ',' << format_double(r.rep.p_v) << ',' << format_double(r.rep.dic ? r.rep.dic->dic : NAN) << ','
        << format_double(r.rep.dic ? r.rep.dic->p_d : NAN) << '\n';
    log << std::setw(7) << r.m2 << "  " << std::left << std::setw(15) << to_string(r.mode) << std::right
        << std::setw(17) << std::setprecision(8) << r.rep.posterior_median_deviance << std::setw(11) << r.rep.p_v
        << '\n';
  }
  write_manifest(cfg.out, "variants", full_config(cfg), {"variants.csv"});
  return kExitOk;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  auto report = [&](const char* kind, const std::string& msg, int code) {
    err << "error kind=" << kind << " message=\"" << escape(msg) << "\"\n";
    return code;
  };
  try {
    return body();
  } catch (const IngestionError& e) {
    return report("ingestion", e.what(), kExitInput);
  } catch (const ConfigError& e) {
    return report("config", e.what(), kExitInput);
  } catch (const DomainError& e) {
    return report("config", e.what(), kExitInput);
  } catch (const InitializationError& e) {
    return report("initialization", e.what(), kExitInit);
  } catch (const NumericalError& e) {
    return report("numerical", e.what(), kExitInternal);
  } catch (const fs::filesystem_error& e) {
    return report("config", e.what(), kExitInput);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kExitInternal);
  }
}

}  // namespace bentcable
