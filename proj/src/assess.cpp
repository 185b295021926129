#include "bentcable/assess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"

namespace bentcable {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

std::vector<std::vector<double>> split_chains(const PosteriorSamples& s, std::size_t k) {
  std::vector<std::vector<double>> out;
  for (const auto& c : s.chains) {
    const auto col = c.draws.col(static_cast<Eigen::Index>(k));
    out.emplace_back(col.data(), col.data() + col.size());
  }
  return out;
}

double pooled_median(const PosteriorSamples& s, std::size_t k) { return median(s.pooled(k)); }

double pooled_mean(const PosteriorSamples& s, std::size_t k) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : s.chains) {
    sum += c.draws.col(static_cast<Eigen::Index>(k)).sum();
    n += static_cast<std::size_t>(c.draws.rows());
  }
  return sum / static_cast<double>(n);
}

bool uses_median(const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  return name == "tbar" || name == "lgamma" || starts("tau[") || starts("log_gamma[");
}

// Raw-scale coefficient traces: b_raw = b / scale and
// b0_raw = b0 - sum(b * center / scale).
std::vector<ParamSummary> raw_scale_summaries(const PosteriorSamples& s, std::span<const double> levels) {
  const ParamLayout& L = s.layout;
  struct Block {
    int offset;
    const std::vector<CovariateScaling>* scaling;
    const char* prefix;
  };
  const Block blocks[] = {{L.b_spatial, &s.meta.spatial_scaling, "b_spatial"},
                          {L.b_temporal, &s.meta.temporal_scaling, "b_temporal"},
                          {L.b_climate, &s.meta.climate_scaling, "b_climate"}};
  const int counts[] = {L.n_spatial(), L.n_temporal(), L.n_climate()};

  std::vector<std::vector<double>> b0_raw;
  for (const auto& c : s.chains) b0_raw.emplace_back(c.draws.col(L.b0).data(), c.draws.col(L.b0).data() + c.draws.rows());

  std::vector<ParamSummary> out;
  for (int b = 0; b < 3; ++b) {
    if (static_cast<int>(blocks[b].scaling->size()) != counts[b]) {
      if (counts[b] == 0) continue;
      throw ConfigError(std::string("covariate scaling missing for ") + blocks[b].prefix);
    }
    for (int k = 0; k < counts[b]; ++k) {
      const auto& sc = (*blocks[b].scaling)[k];
      const int col = blocks[b].offset + k;
      std::vector<std::vector<double>> raw;
      for (std::size_t ci = 0; ci < s.chains.size(); ++ci) {
        const auto& d = s.chains[ci].draws;
        std::vector<double> r(static_cast<std::size_t>(d.rows()));
        for (Eigen::Index it = 0; it < d.rows(); ++it) {
          r[it] = d(it, col) / sc.scale;
          b0_raw[ci][it] -= r[it] * sc.center;
        }
        raw.push_back(std::move(r));
      }
      out.push_back(summarize_draws(L.names()[col], raw, levels));
    }
  }
  out.insert(out.begin(), summarize_draws("b0", b0_raw, levels));
  return out;
}

}  // namespace

double deviance(const PanelData& data, const ParamState& s) { return -2.0 * log_likelihood(data, s); }

double p_v(std::span<const double> trace) {
  if (trace.size() < 2) throw DomainError("p_v: need at least two deviance values");
  // Centred on the first value first, so a constant trace gives exactly 0.
  const double shift = trace[0];
  double mean = 0.0;
  for (double d : trace) mean += d - shift;
  mean /= static_cast<double>(trace.size());
  double ss = 0.0;
  for (double d : trace) ss += (d - shift - mean) * (d - shift - mean);
  return ss / static_cast<double>(trace.size() - 1) / 2.0;
}

DicResult dic(std::span<const double> trace, double plugin) {
  if (trace.empty()) throw DomainError("dic: empty deviance trace");
  DicResult r;
  for (double d : trace) r.mean_deviance += d;
  r.mean_deviance /= static_cast<double>(trace.size());
  r.p_d = r.mean_deviance - plugin;
  r.dic = r.mean_deviance + r.p_d;
  return r;
}

double quantile_sorted(std::span<const double> x, double p) {
  if (x.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, 0.5);
}

const Interval* ParamSummary::at(double level) const {
  for (const auto& i : intervals) {
    if (std::abs(i.level - level) < 1e-12) return &i;
  }
  return nullptr;
}

const ParamSummary* FitReport::find(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

ParamSummary summarize_draws(const std::string& name, const std::vector<std::vector<double>>& chains,
                             std::span<const double> levels) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  if (all.empty()) throw ConfigError("no draws for " + name);
  ParamSummary s;
  s.name = name;
  double sum = 0.0;
  for (double x : all) sum += x;
  s.mean = sum / static_cast<double>(all.size());
  std::sort(all.begin(), all.end());
  s.median = quantile_sorted(all, 0.5);
  std::vector<double> lv(levels.begin(), levels.end());
  std::sort(lv.begin(), lv.end());
  for (double level : lv) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must be in (0, 1)");
    const double tail = (1.0 - level) / 2.0;
    s.intervals.push_back({level, quantile_sorted(all, tail), quantile_sorted(all, 1.0 - tail)});
  }
  s.rhat = kNaN;
  if (chains.size() >= 2 && chains[0].size() >= 10) s.rhat = rhat(chains);
  return s;
}

FitReport summarize(const PosteriorSamples& samples, std::span<const double> levels) {
  samples.validate();
  if (samples.n_kept() == 0) throw ConfigError("posterior samples are empty");
  FitReport r;
  r.levels.assign(levels.begin(), levels.end());
  std::sort(r.levels.begin(), r.levels.end());

  const auto dev = samples.pooled_deviance();
  r.posterior_median_deviance = median(dev);
  for (const auto& c : samples.chains) r.chain_median_deviance.push_back(median(c.deviance));
  r.p_v = dev.size() >= 2 ? p_v(dev) : 0.0;

  const ParamLayout& L = samples.layout;
  for (std::size_t k = 0; k < L.size(); ++k) r.params.push_back(summarize_draws(L.names()[k], split_chains(samples, k), levels));
  r.raw_scale = raw_scale_summaries(samples, levels);

  r.population_window = population_cable(samples).window;
  for (int i = 0; i < L.n_regions(); ++i) {
    const auto& p = r.params[L.beta10 + i];
    const Interval* iv = p.at(0.95);
    if (!iv && !p.intervals.empty()) iv = &p.intervals.back();
    if (iv && iv->excludes_zero()) r.spatial_contagion.push_back(L.region_ids()[i]);
  }
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& a = samples.chains[c].acceptance;
    r.acceptance.push_back({static_cast<int>(c), a.tau, a.log_gamma, a.lgamma});
  }
  return r;
}

FitReport fit_report(const PanelData& data, const PosteriorSamples& samples, std::span<const double> levels) {
  FitReport r = summarize(samples, levels);
  const double plug = deviance(data, plugin_state(samples));
  r.plugin_deviance = plug;
  r.dic = dic(samples.pooled_deviance(), plug);
  return r;
}

ParamState plugin_state(const PosteriorSamples& samples) {
  samples.validate();
  const ParamLayout& L = samples.layout;
  std::vector<double> flat(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) {
    flat[k] = uses_median(L.names()[k]) ? pooled_median(samples, k) : pooled_mean(samples, k);
  }
  ParamState s = L.unflatten(flat.data());
  if (L.mode() == GammaMode::common) s.log_gamma.setConstant(s.lgamma);
  return s;
}

ParamState median_state(const PosteriorSamples& samples) {
  samples.validate();
  const ParamLayout& L = samples.layout;
  std::vector<double> flat(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) flat[k] = pooled_median(samples, k);
  return L.unflatten(flat.data());
}

Eigen::MatrixXd detrend(const PanelData& data, const ParamState& effects) {
  check_dimensions(data, effects);
  Eigen::MatrixXd out(data.n_regions(), data.n_years());
  for (int i = 0; i < data.n_regions(); ++i) {
    for (int t = 0; t < data.n_years(); ++t) {
      out(i, t) = data.observed(i, t) ? data.y(i, t) - fixed_mean(data, effects, i, t) : kNaN;
    }
  }
  return out;
}

Eigen::MatrixXd detrend(const PanelData& data, const PosteriorSamples& samples) {
  return detrend(data, median_state(samples));
}

CableCurve population_cable(const PosteriorSamples& samples) {
  const ParamLayout& L = samples.layout;
  const double a1 = pooled_median(samples, L.a1);
  const double a2 = pooled_median(samples, L.a2);
  const double tbar = pooled_median(samples, L.tbar);
  const double gamma = std::exp(pooled_median(samples, L.lgamma));
  CableCurve c;
  c.years = L.years();
  for (int y : c.years) c.values.push_back(cable_at(y, samples.meta.time_origin, a1, a2, tbar, gamma));
  c.window = transition_window({a1, a2, tbar, gamma});
  return c;
}

std::vector<CableCurve> region_cables(const PosteriorSamples& samples) {
  const ParamLayout& L = samples.layout;
  std::vector<CableCurve> out;
  for (int i = 0; i < L.n_regions(); ++i) {
    const double a1 = pooled_median(samples, L.alpha1 + i);
    const double a2 = pooled_median(samples, L.alpha2 + i);
    const double tau = pooled_median(samples, L.tau + i);
    const double gamma = std::exp(pooled_median(samples, L.log_gamma + i));
    CableCurve c;
    c.years = L.years();
    for (int y : c.years) c.values.push_back(cable_at(y, samples.meta.time_origin, a1, a2, tau, gamma));
    c.window = transition_window({a1, a2, tau, gamma});
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

nlohmann::ordered_json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

nlohmann::ordered_json summary_json(const ParamSummary& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["mean"] = num(p.mean);
  j["median"] = num(p.median);
  auto iv = nlohmann::ordered_json::array();
  for (const auto& i : p.intervals) iv.push_back({{"level", i.level}, {"lo", num(i.lo)}, {"hi", num(i.hi)}});
  j["intervals"] = iv;
  j["rhat"] = num(p.rhat);
  return j;
}

}  // namespace

void write_report_json(const FitReport& r, const SampleMeta& meta, const std::string& path) {
  nlohmann::ordered_json j;
  j["posterior_median_deviance"] = num(r.posterior_median_deviance);
  j["chain_median_deviance"] = nlohmann::ordered_json::array();
  for (double d : r.chain_median_deviance) j["chain_median_deviance"].push_back(num(d));
  j["p_v"] = num(r.p_v);
  if (r.dic) {
    j["dic"] = num(r.dic->dic);
    j["p_d"] = num(r.dic->p_d);
    j["mean_deviance"] = num(r.dic->mean_deviance);
    j["plugin_deviance"] = num(*r.plugin_deviance);
    j["plugin_rule"] = "posterior mean; posterior median for tau, tbar, log_gamma and lgamma";
  }
  j["quantile_rule"] = "type 7";
  j["levels"] = r.levels;
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : r.params) params.push_back(summary_json(p));
  j["parameters"] = params;
  auto raw = nlohmann::ordered_json::array();
  for (const auto& p : r.raw_scale) raw.push_back(summary_json(p));
  j["raw_scale_coefficients"] = raw;
  j["population_window"] = {{"start", num(r.population_window.start)},
                            {"mid", num(r.population_window.mid)},
                            {"end", num(r.population_window.end)}};
  j["spatial_contagion"] = r.spatial_contagion;
  auto acc = nlohmann::ordered_json::array();
  for (const auto& a : r.acceptance) {
    nlohmann::ordered_json e;
    e["chain"] = a.chain;
    e["tau"] = a.tau;
    if (!a.log_gamma.empty()) {
      e["log_gamma"] = a.log_gamma;
    } else {
      e["lgamma"] = a.lgamma;
    }
    acc.push_back(e);
  }
  j["acceptance"] = acc;

  nlohmann::ordered_json m;
  m["seed"] = meta.seed;
  m["n_iter"] = meta.n_iter;
  m["burn_in"] = meta.burn_in;
  m["thin"] = meta.thin;
  m["time_origin"] = meta.time_origin;
  m["mode_gamma"] = to_string(meta.hyper.mode_gamma);
  m["mode_spatial"] = to_string(meta.hyper.mode_spatial);
  m["m2_bend"] = meta.hyper.m2_bend;
  m["config"] = meta.config;
  j["run"] = m;

  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_summary_csv(const FitReport& r, const std::string& path) {
  auto out = open_out(path);
  out << "name,median,lo80,hi80,lo95,hi95,rhat\n";
  for (const auto& p : r.params) {
    const Interval* i80 = p.at(0.80);
    const Interval* i95 = p.at(0.95);
    out << p.name << ',' << format_double(p.median) << ',' << format_double(i80 ? i80->lo : kNaN) << ','
        << format_double(i80 ? i80->hi : kNaN) << ',' << format_double(i95 ? i95->lo : kNaN) << ','
        << format_double(i95 ? i95->hi : kNaN) << ',' << format_double(p.rhat) << '\n';
  }
}

void write_series_csv(const PanelData& data, const PosteriorSamples& samples, const std::string& path) {
  const Eigen::MatrixXd det = detrend(data, samples);
  const auto cables = region_cables(samples);
  const auto pop = population_cable(samples);
  auto out = open_out(path);
  out << "region,year,value,kind\n";
  for (int i = 0; i < data.n_regions(); ++i) {
    for (int t = 0; t < data.n_years(); ++t) {
      const auto& id = data.region_ids[i];
      const int y = data.years[t];
      out << id << ',' << y << ',' << format_double(data.observed(i, t) ? data.y(i, t) : kNaN) << ",observed\n";
      out << id << ',' << y << ',' << format_double(det(i, t)) << ",detrended\n";
      out << id << ',' << y << ',' << format_double(cables[i].values[t]) << ",region_cable\n";
    }
  }
  for (std::size_t t = 0; t < pop.years.size(); ++t) {
    out << "population," << pop.years[t] << ',' << format_double(pop.values[t]) << ",population_cable\n";
  }
  out << "population,NA," << format_double(pop.window.start) << ",window_start\n";
  out << "population,NA," << format_double(pop.window.mid) << ",window_mid\n";
  out << "population,NA," << format_double(pop.window.end) << ",window_end\n";
}

}  // namespace bentcable
