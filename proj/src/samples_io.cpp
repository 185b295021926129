#include "bentcable/samples_io.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"

namespace bentcable {

namespace {

std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
  return s;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  double x = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) throw IngestionError("bad number '" + s + "'", where);
  return x;
}

long parse_long(const std::string& s, const std::string& where) {
  long x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) throw IngestionError("bad integer '" + s + "'", where);
  return x;
}

std::vector<double> split_values(const std::string& s, const std::string& where) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_double(item, where));
  return out;
}

void hyper_entries(const HyperConfig& h, std::vector<std::pair<std::string, std::string>>& out) {
  auto add = [&](const char* k, double v) { out.emplace_back(std::string("hyper.") + k, format_double(v)); };
  add("m1_intercept", h.m1_intercept);
  add("u_intercept", h.u_intercept);
  add("m1_slope", h.m1_slope);
  add("u_slope", h.u_slope);
  add("m2_bend", h.m2_bend);
  add("var_bend_mean", h.var_bend_mean);
  add("lgamma_mean", h.lgamma_mean);
  add("lgamma_var", h.lgamma_var);
  add("precision_shape", h.precision_shape);
  add("precision_rate", h.precision_rate);
  out.emplace_back("hyper.mode_gamma", to_string(h.mode_gamma));
  out.emplace_back("hyper.mode_spatial", to_string(h.mode_spatial));
}

}  // namespace

void write_samples(const PosteriorSamples& s, const std::string& path) {
  s.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("seed", std::to_string(s.meta.seed));
  meta.emplace_back("n_iter", std::to_string(s.meta.n_iter));
  meta.emplace_back("burn_in", std::to_string(s.meta.burn_in));
  meta.emplace_back("thin", std::to_string(s.meta.thin));
  meta.emplace_back("time_origin", format_double(s.meta.time_origin));
  hyper_entries(s.meta.hyper, meta);
  auto scal = [&](const char* kind, const std::vector<CovariateScaling>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      meta.emplace_back(std::string("scaling.") + kind + "." + std::to_string(k),
                        v[k].name + ";" + format_double(v[k].center) + ";" + format_double(v[k].scale));
    }
  };
  scal("spatial", s.meta.spatial_scaling);
  scal("temporal", s.meta.temporal_scaling);
  scal("climate", s.meta.climate_scaling);
  for (const auto& [k, v] : s.meta.config) meta.emplace_back("config." + k, v);
  for (std::size_t c = 0; c < s.chains.size(); ++c) {
    const auto& a = s.chains[c].acceptance;
    const std::string p = "acceptance." + std::to_string(c) + ".";
    meta.emplace_back(p + "tau", join_values(a.tau));
    meta.emplace_back(p + "log_gamma", join_values(a.log_gamma));
    meta.emplace_back(p + "lgamma", format_double(a.lgamma));
  }

  out << "# " << kSamplesFormat << '\n';
  for (const auto& [k, v] : meta) {
    if (k.find('=') != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("metadata entry '" + k + "' cannot be stored");
    }
    out << "# " << k << '=' << v << '\n';
  }
  out << "chain,draw,deviance";
  for (const auto& n : s.layout.names()) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < s.chains.size(); ++c) {
    const auto& ch = s.chains[c];
    for (Eigen::Index r = 0; r < ch.draws.rows(); ++r) {
      out << c << ',' << r << ',' << format_double(ch.deviance[r]);
      for (Eigen::Index k = 0; k < ch.draws.cols(); ++k) out << ',' << format_double(ch.draws(r, k));
      out << '\n';
    }
  }
  if (!out) throw ConfigError("write failed for " + path);
}

PosteriorSamples read_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open file", path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  PosteriorSamples s;
  std::map<std::string, std::string> meta;
  {
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.rfind("# ", 0) != 0) {
        if (first) throw IngestionError("not a samples file", path + ":1");
        break;
      }
      const std::string body = line.substr(2);
      if (first) {
        if (body != kSamplesFormat) throw IngestionError("unsupported samples format '" + body + "'", path + ":1");
        first = false;
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw IngestionError("malformed header line", path + ":" + std::to_string(line_no));
      meta[body.substr(0, eq)] = body.substr(eq + 1);
    }
    if (first) throw IngestionError("empty samples file", path);
  }
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = meta.find(k);
    if (it == meta.end()) throw IngestionError("missing header entry '" + k + "'", path);
    return it->second;
  };

  SampleMeta& m = s.meta;
  m.seed = static_cast<std::uint64_t>(parse_long(get("seed"), path));
  m.n_iter = parse_long(get("n_iter"), path);
  m.burn_in = parse_long(get("burn_in"), path);
  m.thin = parse_long(get("thin"), path);
  m.time_origin = parse_double(get("time_origin"), path);
  HyperConfig& h = m.hyper;
  h.m1_intercept = parse_double(get("hyper.m1_intercept"), path);
  h.u_intercept = parse_double(get("hyper.u_intercept"), path);
  h.m1_slope = parse_double(get("hyper.m1_slope"), path);
  h.u_slope = parse_double(get("hyper.u_slope"), path);
  h.m2_bend = parse_double(get("hyper.m2_bend"), path);
  h.var_bend_mean = parse_double(get("hyper.var_bend_mean"), path);
  h.lgamma_mean = parse_double(get("hyper.lgamma_mean"), path);
  h.lgamma_var = parse_double(get("hyper.lgamma_var"), path);
  h.precision_shape = parse_double(get("hyper.precision_shape"), path);
  h.precision_rate = parse_double(get("hyper.precision_rate"), path);
  try {
    h.mode_gamma = gamma_mode_from_string(get("hyper.mode_gamma"));
    h.mode_spatial = weight_mode_from_string(get("hyper.mode_spatial"));
  } catch (const ConfigError& e) {
    throw IngestionError(e.what(), path);
  }
  auto scal = [&](const char* kind, std::vector<CovariateScaling>& v) {
    for (std::size_t k = 0;; ++k) {
      auto it = meta.find(std::string("scaling.") + kind + "." + std::to_string(k));
      if (it == meta.end()) break;
      const auto& val = it->second;
      const auto a = val.rfind(';', val.rfind(';') - 1);
      const auto b = val.rfind(';');
      if (a == std::string::npos || b == std::string::npos || a >= b) {
        throw IngestionError("malformed scaling entry", path);
      }
      v.push_back({val.substr(0, a), parse_double(val.substr(a + 1, b - a - 1), path),
                   parse_double(val.substr(b + 1), path)});
    }
  };
  scal("spatial", m.spatial_scaling);
  scal("temporal", m.temporal_scaling);
  scal("climate", m.climate_scaling);
  for (const auto& [k, v] : meta) {
    if (k.rfind("config.", 0) == 0) m.config[k.substr(7)] = v;
  }

  const CsvTable t = parse_csv(text, path);
  if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "draw" || t.header[2] != "deviance") {
    throw IngestionError("samples header must start with chain,draw,deviance", path);
  }
  try {
    s.layout = ParamLayout::from_names(std::vector<std::string>(t.header.begin() + 3, t.header.end()));
  } catch (const ConfigError& e) {
    throw IngestionError(e.what(), path);
  }
  const std::size_t width = s.layout.size();
  std::vector<std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long c = parse_long(t.rows[r][0], t.where(r));
    const long d = parse_long(t.rows[r][1], t.where(r));
    if (c < 0 || c > static_cast<long>(rows_of.size())) throw IngestionError("chains out of order", t.where(r));
    if (c == static_cast<long>(rows_of.size())) rows_of.emplace_back();
    if (d != static_cast<long>(rows_of[c].size())) throw IngestionError("draws out of order", t.where(r));
    rows_of[c].push_back(r);
  }
  for (std::size_t c = 0; c < rows_of.size(); ++c) {
    ChainTrace ch;
    ch.draws.resize(static_cast<Eigen::Index>(rows_of[c].size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows_of[c].size(); ++i) {
      const std::size_t r = rows_of[c][i];
      const auto& row = t.rows[r];
      ch.deviance.push_back(parse_double(row[2], t.where(r)));
      for (std::size_t k = 0; k < width; ++k) ch.draws(i, k) = parse_double(row[3 + k], t.where(r));
    }
    const std::string p = "acceptance." + std::to_string(c) + ".";
    ch.acceptance.tau = split_values(get(p + "tau"), path);
    ch.acceptance.log_gamma = split_values(get(p + "log_gamma"), path);
    ch.acceptance.lgamma = parse_double(get(p + "lgamma"), path);
    s.chains.push_back(std::move(ch));
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw IngestionError(e.what(), path);
  }
  if (s.n_kept() == 0) throw IngestionError("samples file holds no draws", path);
  return s;
}

}  // namespace bentcable
