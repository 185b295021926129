#include "bentcable/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"

namespace bentcable {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return x;
}

long to_long(const std::string& key, const std::string& v) {
  long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

kernels::Backend backend_from_string(const std::string& v) {
  if (v == "openmp") return kernels::Backend::openmp;
  if (v == "serial") return kernels::Backend::serial;
  throw ConfigError("config key 'backend': expected openmp or serial, got '" + v + "'");
}

struct Field {
  const char* key;
  bool path;      // resolved against the config directory
  bool snapshot;  // part of the result-affecting snapshot
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define BC_NUM(KEY, MEMBER)                                                       \
  Field {                                                                         \
    KEY, false, true, [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); }, \
        [](const RunConfig& c) { return format_double(c.MEMBER); }               \
  }
#define BC_INT(KEY, MEMBER, SNAP)                                                       \
  Field {                                                                               \
    KEY, false, SNAP,                                                                   \
        [](RunConfig& c, const std::string& v) { c.MEMBER = static_cast<decltype(c.MEMBER)>(to_long(KEY, v)); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                    \
  }
#define BC_PATH(KEY, MEMBER)                                                     \
  Field {                                                                        \
    KEY, true, true, [](RunConfig& c, const std::string& v) { c.MEMBER = v; },  \
        [](const RunConfig& c) { return c.MEMBER; }                            \
  }
#define BC_LIST(KEY, MEMBER)                                                              \
  Field {                                                                                 \
    KEY, false, true, [](RunConfig& c, const std::string& v) { c.MEMBER = to_list(v); }, \
        [](const RunConfig& c) { return join(c.MEMBER); }                                \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      BC_PATH("response", response),
      BC_PATH("epochs", epochs),
      BC_PATH("static", static_csv),
      BC_PATH("temporal", temporal_csv),
      BC_PATH("spatiotemporal", spatiotemporal_csv),
      BC_PATH("adjacency", adjacency),
      BC_LIST("exclude_regions", exclude_regions),
      BC_LIST("regions", panel.regions),
      BC_INT("year_min", panel.year_min, true),
      BC_INT("year_max", panel.year_max, true),
      BC_LIST("spatial_covariates", panel.spatial_covariates),
      BC_LIST("temporal_covariates", panel.temporal_covariates),
      BC_LIST("climate_covariates", panel.climate_covariates),
      Field{"standardize", false, true,
            [](RunConfig& c, const std::string& v) { c.panel.standardize = to_bool("standardize", v); },
            [](const RunConfig& c) { return std::string(c.panel.standardize ? "true" : "false"); }},
      Field{"zero_floor", false, true,
            [](RunConfig& c, const std::string& v) {
              if (v == "none") {
                c.panel.zero_floor.reset();
              } else {
                c.panel.zero_floor = to_double("zero_floor", v);
              }
            },
            [](const RunConfig& c) { return c.panel.zero_floor ? format_double(*c.panel.zero_floor) : "none"; }},
      Field{"time_origin", false, true,
            [](RunConfig& c, const std::string& v) {
              if (v == "midpoint") {
                c.panel.time_origin.reset();
              } else {
                c.panel.time_origin = to_double("time_origin", v);
              }
            },
            [](const RunConfig& c) {
              return c.panel.time_origin ? format_double(*c.panel.time_origin) : "midpoint";
            }},
      BC_NUM("m1_intercept", hyper.m1_intercept),
      BC_NUM("u_intercept", hyper.u_intercept),
      BC_NUM("m1_slope", hyper.m1_slope),
      BC_NUM("u_slope", hyper.u_slope),
      BC_NUM("m2_bend", hyper.m2_bend),
      BC_NUM("var_bend_mean", hyper.var_bend_mean),
      BC_NUM("lgamma_mean", hyper.lgamma_mean),
      BC_NUM("lgamma_var", hyper.lgamma_var),
      BC_NUM("precision_shape", hyper.precision_shape),
      BC_NUM("precision_rate", hyper.precision_rate),
      Field{"mode_gamma", false, true,
            [](RunConfig& c, const std::string& v) { c.hyper.mode_gamma = gamma_mode_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.hyper.mode_gamma)); }},
      Field{"mode_spatial", false, true,
            [](RunConfig& c, const std::string& v) { c.hyper.mode_spatial = weight_mode_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.hyper.mode_spatial)); }},
      BC_INT("chains", run.n_chains, true),
      BC_INT("iters", run.n_iter, true),
      BC_INT("burnin", run.burn_in, true),
      BC_INT("thin", run.thin, true),
      BC_INT("seed", run.seed, true),
      BC_INT("threads", run.threads, false),
      Field{"backend", false, false,
            [](RunConfig& c, const std::string& v) { c.backend = backend_from_string(v); },
            [](const RunConfig& c) {
              return std::string(c.backend == kernels::Backend::openmp ? "openmp" : "serial");
            }},
      Field{"out", true, false, [](RunConfig& c, const std::string& v) { c.out = v; },
            [](const RunConfig& c) { return c.out; }},
      BC_INT("sim.n_regions", sim.n_regions, false),
      BC_INT("sim.year_min", sim.year_min, false),
      BC_INT("sim.year_max", sim.year_max, false),
      BC_INT("sim.knn", sim.knn, false),
      Field{"sim.temporal_name", false, false, [](RunConfig& c, const std::string& v) { c.sim.temporal_name = v; },
            [](const RunConfig& c) { return c.sim.temporal_name; }},
      BC_NUM("sim.temporal_mean", sim.temporal_mean),
      BC_NUM("sim.temporal_sd", sim.temporal_sd),
      BC_NUM("sim.b0", sim.b0),
      BC_NUM("sim.b_temporal", sim.b_temporal),
      BC_NUM("sim.a1", sim.a1),
      BC_NUM("sim.a2", sim.a2),
      BC_NUM("sim.tbar", sim.tbar),
      BC_NUM("sim.gamma", sim.gamma),
      BC_NUM("sim.v", sim.v),
      BC_NUM("sim.sigma1", sim.sigma1),
      BC_NUM("sim.sigma2", sim.sigma2),
      BC_NUM("sim.sigma_tau", sim.sigma_tau),
      BC_NUM("sim.sigma_gamma", sim.sigma_gamma),
      BC_NUM("sim.sigma10", sim.sigma10),
      BC_NUM("sim.sigma20", sim.sigma20),
      Field{"sim.mode_gamma", false, false,
            [](RunConfig& c, const std::string& v) { c.sim.mode_gamma = gamma_mode_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.sim.mode_gamma)); }},
      Field{"sim.mode_spatial", false, false,
            [](RunConfig& c, const std::string& v) { c.sim.mode_spatial = weight_mode_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.sim.mode_spatial)); }},
  };
  return f;
}

#undef BC_NUM
#undef BC_INT
#undef BC_PATH
#undef BC_LIST

bool is_sim_key(const char* key) { return std::string_view(key).rfind("sim.", 0) == 0; }

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& label) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = label + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError(where + ": key '" + key + "' repeated");
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

RunConfig make_run_config(const KeyValues& values, const std::string& base_dir) {
  RunConfig c;
  for (const auto& [key, value] : values) {
    const Field* f = nullptr;
    for (const auto& cand : fields()) {
      if (key == cand.key) f = &cand;
    }
    if (!f) throw ConfigError("unknown config key '" + key + "'");
    std::string v = value;
    if (f->path && !v.empty()) {
      std::filesystem::path p(v);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      v = p.lexically_normal().string();
    }
    f->set(c, v);
  }
  c.hyper.validate();
  if (c.run.n_chains < 1) throw ConfigError("chains must be >= 1");
  if (c.run.thin < 1) throw ConfigError("thin must be >= 1");
  if (c.run.burn_in < 0) throw ConfigError("burnin must be >= 0");
  if (c.run.n_iter <= c.run.burn_in) throw ConfigError("iters must exceed burnin");
  if (c.run.threads < 0) throw ConfigError("threads must be >= 0");
  if (c.panel.year_max < c.panel.year_min) throw ConfigError("year_max is before year_min");
  return c;
}

RunConfig load_run_config(const std::string& path, const KeyValues& overrides) {
  KeyValues kv;
  if (!path.empty()) {
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    for (auto& [k, v] : read_key_values(path)) {
      // File paths are relative to the config file; overrides to the cwd.
      const bool is_path = std::any_of(fields().begin(), fields().end(),
                                       [&](const Field& f) { return f.path && k == f.key; });
      if (is_path && !v.empty() && std::filesystem::path(v).is_relative()) v = (base / v).string();
      kv[k] = v;
    }
  }
  for (const auto& [k, v] : overrides) kv[k] = v;
  return make_run_config(kv, ".");
}

KeyValues RunConfig::snapshot() const {
  KeyValues kv;
  for (const auto& f : fields()) {
    if (!f.snapshot || is_sim_key(f.key)) continue;
    std::string v = f.get(*this);
    if (f.path && !v.empty()) v = std::filesystem::absolute(v).lexically_normal().string();
    kv[f.key] = v;
  }
  return kv;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return keys;
}

}  // namespace bentcable
