#include "bentcable/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "bentcable/bent_cable.hpp"
#include "bentcable/csv.hpp"
#include "bentcable/errors.hpp"

namespace bentcable {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sample mean and sd over the finite entries; scale falls back to 1 for
// constant or single-value columns.
CovariateScaling scaling_for(const std::string& name, const Eigen::Ref<const Eigen::VectorXd>& x) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (std::isfinite(x[k])) {
      sum += x[k];
      ++n;
    }
  }
  CovariateScaling s{name, 0.0, 1.0};
  if (n == 0) return s;
  s.center = sum / n;
  double ss = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (std::isfinite(x[k])) ss += (x[k] - s.center) * (x[k] - s.center);
  }
  double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  s.scale = sd > 0.0 ? sd : 1.0;
  return s;
}

}  // namespace

int PanelData::region_index(const std::string& id) const {
  auto it = std::find(region_ids.begin(), region_ids.end(), id);
  return it == region_ids.end() ? -1 : static_cast<int>(it - region_ids.begin());
}

int PanelData::year_index(int year) const {
  if (years.empty() || year < years.front() || year > years.back()) return -1;
  int k = year - years.front();
  return years[k] == year ? k : -1;
}

void PanelData::validate() const {
  const Eigen::Index r = n_regions();
  const Eigen::Index t = n_years();
  auto check = [&](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("panel: ") + what);
  };
  check(r > 0 && t > 0, "empty region or year grid");
  check(y.rows() == r && y.cols() == t, "response matrix does not match grid");
  check(observed.rows() == r && observed.cols() == t, "mask does not match grid");
  check(spatial.rows() == r && spatial.cols() == n_spatial(), "spatial covariates do not match grid");
  check(temporal.rows() == t && temporal.cols() == n_temporal(), "temporal covariates do not match grid");
  check(static_cast<int>(climate.size()) == n_climate(), "climate covariate count mismatch");
  for (const auto& c : climate) check(c.rows() == r && c.cols() == t, "climate covariates do not match grid");
  check(spatial.allFinite(), "static covariates must be finite");
  check(tenure.size() == 0 || tenure.size() == r, "tenure vector does not match regions");
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < t; ++k) {
      if (!observed(i, k)) continue;
      bool ok = std::isfinite(y(i, k)) && temporal.row(k).allFinite();
      for (const auto& c : climate) ok = ok && std::isfinite(c(i, k));
      if (!ok) {
        throw ConfigError("panel: observed cell (" + region_ids[i] + ", " + std::to_string(years[k]) +
                          ") has a non-finite value");
      }
    }
  }
}

std::vector<RegionObservation> annualize_epochs(const std::vector<EpochRecord>& records) {
  std::map<std::string, std::vector<const EpochRecord*>> by_region;
  for (const auto& e : records) {
    if (e.epoch_span_years < 1) {
      throw IngestionError("epoch for region " + e.region_id + " starting " +
                           std::to_string(e.epoch_start_year) + " has span < 1");
    }
    by_region[e.region_id].push_back(&e);
  }
  std::vector<RegionObservation> out;
  for (auto& [id, eps] : by_region) {
    std::stable_sort(eps.begin(), eps.end(), [](const EpochRecord* a, const EpochRecord* b) {
      return a->epoch_start_year < b->epoch_start_year;
    });
    for (std::size_t k = 1; k < eps.size(); ++k) {
      const auto& prev = *eps[k - 1];
      if (eps[k]->epoch_start_year < prev.epoch_start_year + prev.epoch_span_years) {
        throw IngestionError("overlapping epochs for region " + id + ": " +
                             std::to_string(prev.epoch_start_year) + "+" +
                             std::to_string(prev.epoch_span_years) + " and " +
                             std::to_string(eps[k]->epoch_start_year));
      }
    }
    for (const EpochRecord* e : eps) {
      const int span = e->epoch_span_years;
      const double share = e->defor_total / span;
      double emitted = 0.0;
      for (int k = 0; k < span; ++k) {
        // The final year absorbs rounding so the running sum equals the total.
        double a = (k + 1 == span) ? e->defor_total - emitted : share;
        emitted += a;
        out.push_back({id, e->epoch_start_year + k, a, e->forest_extent, {}});
      }
    }
  }
  return out;
}

std::vector<RegionObservation> read_response_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  auto c_id = t.require_column("region_id");
  auto c_year = t.require_column("year");
  auto c_def = t.require_column("defor_area_ha");
  auto c_ext = t.require_column("forest_extent_ha");
  std::vector<RegionObservation> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    RegionObservation o;
    o.region_id = t.rows[r][c_id];
    if (o.region_id.empty()) throw IngestionError("empty region_id", t.where(r));
    o.year = static_cast<int>(t.integer(r, c_year));
    o.defor_area = t.number(r, c_def);
    o.forest_extent = t.number(r, c_ext);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == c_id || c == c_year || c == c_def || c == c_ext) continue;
      o.covariates[t.header[c]] = t.number(r, c);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<EpochRecord> read_epoch_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  auto c_id = t.require_column("region_id");
  auto c_start = t.require_column("epoch_start_year");
  auto c_span = t.require_column("span_years");
  auto c_def = t.require_column("defor_total_ha");
  auto c_ext = t.require_column("forest_extent_ha");
  std::vector<EpochRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    EpochRecord e;
    e.region_id = t.rows[r][c_id];
    e.epoch_start_year = static_cast<int>(t.integer(r, c_start));
    e.epoch_span_years = static_cast<int>(t.integer(r, c_span));
    e.defor_total = t.number(r, c_def);
    e.forest_extent = t.number(r, c_ext);
    if (e.epoch_span_years < 1) throw IngestionError("span_years must be >= 1", t.where(r));
    if (!(e.defor_total >= 0.0)) throw IngestionError("defor_total_ha must be >= 0", t.where(r));
    out.push_back(std::move(e));
  }
  return out;
}

void read_static_csv(const std::string& path, CovariateTables& tables) {
  CsvTable t = read_csv(path);
  auto c_id = t.require_column("region_id");
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != c_id) tables.static_columns.push_back(t.header[c]);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& id = t.rows[r][c_id];
    if (tables.static_by_region.count(id)) throw IngestionError("duplicate region_id " + id, t.where(r));
    auto& row = tables.static_by_region[id];
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != c_id) row[t.header[c]] = t.number(r, c);
    }
  }
}

void read_temporal_csv(const std::string& path, CovariateTables& tables) {
  CsvTable t = read_csv(path);
  auto c_year = t.require_column("year");
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != c_year) tables.temporal_columns.push_back(t.header[c]);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    int year = static_cast<int>(t.integer(r, c_year));
    if (tables.temporal_by_year.count(year)) {
      throw IngestionError("duplicate year " + std::to_string(year), t.where(r));
    }
    auto& row = tables.temporal_by_year[year];
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != c_year) row[t.header[c]] = t.number(r, c);
    }
  }
}

void read_spatiotemporal_csv(const std::string& path, CovariateTables& tables) {
  CsvTable t = read_csv(path);
  auto c_id = t.require_column("region_id");
  auto c_year = t.require_column("year");
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != c_id && c != c_year) tables.climate_columns.push_back(t.header[c]);
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto key = std::make_pair(t.rows[r][c_id], static_cast<int>(t.integer(r, c_year)));
    if (tables.climate_by_cell.count(key)) {
      throw IngestionError("duplicate (region, year) " + key.first + "," + std::to_string(key.second),
                           t.where(r));
    }
    auto& row = tables.climate_by_cell[key];
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != c_id && c != c_year) row[t.header[c]] = t.number(r, c);
    }
  }
}

PanelData build_panel(const std::vector<RegionObservation>& obs, const CovariateTables& tables,
                      const PanelConfig& config) {
  if (config.year_min > config.year_max) throw ConfigError("panel: year_min exceeds year_max");

  PanelData p;
  std::set<std::string> present;
  for (const auto& o : obs) present.insert(o.region_id);
  if (config.regions.empty()) {
    p.region_ids.assign(present.begin(), present.end());
  } else {
    std::set<std::string> seen;
    for (const auto& id : config.regions) {
      if (!present.count(id)) throw IngestionError("unknown region id '" + id + "' in region list");
      if (!seen.insert(id).second) throw ConfigError("region '" + id + "' listed twice");
      p.region_ids.push_back(id);
    }
  }
  if (p.region_ids.empty()) throw IngestionError("no regions in response data");
  for (int yr = config.year_min; yr <= config.year_max; ++yr) p.years.push_back(yr);
  p.time_origin = config.time_origin.value_or(0.5 * (config.year_min + config.year_max));

  const int nr = p.n_regions();
  const int nt = p.n_years();
  p.defor_area = Eigen::MatrixXd::Constant(nr, nt, kNaN);
  p.forest_extent = Eigen::MatrixXd::Constant(nr, nt, kNaN);
  p.y = Eigen::MatrixXd::Constant(nr, nt, kNaN);

  BoolMatrix filled = BoolMatrix::Constant(nr, nt, false);
  for (const auto& o : obs) {
    int i = p.region_index(o.region_id);
    int t = p.year_index(o.year);
    if (i < 0 || t < 0) continue;
    if (filled(i, t)) {
      throw IngestionError("duplicate (region, year) " + o.region_id + "," + std::to_string(o.year));
    }
    filled(i, t) = true;
    p.defor_area(i, t) = o.defor_area;
    p.forest_extent(i, t) = o.forest_extent;
    if (std::isnan(o.defor_area) || std::isnan(o.forest_extent)) continue;
    try {
      p.y(i, t) = transform_response(o.defor_area, o.forest_extent, config.zero_floor);
    } catch (const ZeroDeforestationError&) {
      // stays missing
    } catch (const DomainError& e) {
      throw IngestionError(std::string(e.what()) + " at (" + o.region_id + ", " + std::to_string(o.year) + ")");
    }
  }

  // Static covariates.
  auto static_row = [&](const std::string& id) -> const std::map<std::string, double>& {
    auto it = tables.static_by_region.find(id);
    if (it == tables.static_by_region.end()) {
      throw IngestionError("unknown region id '" + id + "': no static covariate row");
    }
    return it->second;
  };
  auto static_value = [&](const std::string& id, const std::string& col) {
    const auto& row = static_row(id);
    auto it = row.find(col);
    if (it == row.end()) throw IngestionError("static covariate column '" + col + "' not found");
    return it->second;
  };
  const bool has_tenure_cols =
      std::count(tables.static_columns.begin(), tables.static_columns.end(), "frac_freehold") &&
      std::count(tables.static_columns.begin(), tables.static_columns.end(), "frac_leasehold");
  if (has_tenure_cols) {
    bool all = std::all_of(p.region_ids.begin(), p.region_ids.end(),
                           [&](const std::string& id) { return tables.static_by_region.count(id) > 0; });
    if (all) {
      p.tenure.resize(nr);
      for (int i = 0; i < nr; ++i) {
        const auto& id = p.region_ids[i];
        p.tenure[i] = tenure_covariate(static_value(id, "frac_freehold"), static_value(id, "frac_leasehold"));
      }
    }
  }
  p.spatial_names = config.spatial_covariates;
  p.spatial.resize(nr, p.n_spatial());
  for (int k = 0; k < p.n_spatial(); ++k) {
    const auto& name = p.spatial_names[k];
    for (int i = 0; i < nr; ++i) {
      if (name == kTenureCovariate) {
        if (p.tenure.size() != nr) {
          throw IngestionError("tenure covariate requested but frac_freehold/frac_leasehold are unavailable");
        }
        p.spatial(i, k) = p.tenure[i];
      } else {
        p.spatial(i, k) = static_value(p.region_ids[i], name);
      }
      if (!std::isfinite(p.spatial(i, k))) {
        throw IngestionError("static covariate '" + name + "' missing for region " + p.region_ids[i]);
      }
    }
  }

  // Temporal covariates.
  p.temporal_names = config.temporal_covariates;
  for (const auto& name : p.temporal_names) {
    if (!std::count(tables.temporal_columns.begin(), tables.temporal_columns.end(), name)) {
      throw IngestionError("temporal covariate column '" + name + "' not found");
    }
  }
  p.temporal = Eigen::MatrixXd::Constant(nt, p.n_temporal(), kNaN);
  for (int t = 0; t < nt; ++t) {
    auto it = tables.temporal_by_year.find(p.years[t]);
    if (it == tables.temporal_by_year.end()) continue;
    for (int k = 0; k < p.n_temporal(); ++k) p.temporal(t, k) = it->second.at(p.temporal_names[k]);
  }

  // Spatio-temporal covariates.
  p.climate_names = config.climate_covariates;
  for (const auto& name : p.climate_names) {
    if (!std::count(tables.climate_columns.begin(), tables.climate_columns.end(), name)) {
      throw IngestionError("spatio-temporal covariate column '" + name + "' not found");
    }
  }
  if (p.n_climate() > 0) {
    std::set<std::string> ids(p.region_ids.begin(), p.region_ids.end());
    for (const auto& [key, row] : tables.climate_by_cell) {
      if (!present.count(key.first)) {
        throw IngestionError("unknown region id '" + key.first + "' in spatio-temporal covariates");
      }
    }
  }
  for (int k = 0; k < p.n_climate(); ++k) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(nr, nt, kNaN);
    for (int i = 0; i < nr; ++i) {
      for (int t = 0; t < nt; ++t) {
        auto it = tables.climate_by_cell.find({p.region_ids[i], p.years[t]});
        if (it != tables.climate_by_cell.end()) m(i, t) = it->second.at(p.climate_names[k]);
      }
    }
    p.climate.push_back(std::move(m));
  }

  // Missingness: any non-finite input removes the cell.
  p.observed = BoolMatrix::Constant(nr, nt, false);
  for (int i = 0; i < nr; ++i) {
    for (int t = 0; t < nt; ++t) {
      bool ok = std::isfinite(p.y(i, t)) && p.temporal.row(t).allFinite();
      for (const auto& c : p.climate) ok = ok && std::isfinite(c(i, t));
      p.observed(i, t) = ok;
    }
  }
  std::vector<std::string> empty_regions;
  for (int i = 0; i < nr; ++i) {
    if (!p.observed.row(i).any()) empty_regions.push_back(p.region_ids[i]);
  }
  if (!empty_regions.empty()) {
    std::string msg = "regions with no usable response in the window:";
    for (const auto& id : empty_regions) msg += " " + id;
    throw IngestionError(msg);
  }

  // Scaling statistics are computed over cells that enter the likelihood.
  for (int k = 0; k < p.n_spatial(); ++k) {
    CovariateScaling s = config.standardize ? scaling_for(p.spatial_names[k], p.spatial.col(k))
                                            : CovariateScaling{p.spatial_names[k], 0.0, 1.0};
    p.spatial.col(k) = (p.spatial.col(k).array() - s.center) / s.scale;
    p.spatial_scaling.push_back(s);
  }
  for (int k = 0; k < p.n_temporal(); ++k) {
    Eigen::VectorXd used = p.temporal.col(k);
    for (int t = 0; t < nt; ++t) {
      if (!p.observed.col(t).any()) used[t] = kNaN;
    }
    CovariateScaling s = config.standardize ? scaling_for(p.temporal_names[k], used)
                                            : CovariateScaling{p.temporal_names[k], 0.0, 1.0};
    p.temporal.col(k) = (p.temporal.col(k).array() - s.center) / s.scale;
    p.temporal_scaling.push_back(s);
  }
  for (int k = 0; k < p.n_climate(); ++k) {
    Eigen::MatrixXd used = p.climate[k];
    for (int i = 0; i < nr; ++i) {
      for (int t = 0; t < nt; ++t) {
        if (!p.observed(i, t)) used(i, t) = kNaN;
      }
    }
    Eigen::Map<const Eigen::VectorXd> flat(used.data(), used.size());
    CovariateScaling s = config.standardize ? scaling_for(p.climate_names[k], flat)
                                            : CovariateScaling{p.climate_names[k], 0.0, 1.0};
    p.climate[k] = (p.climate[k].array() - s.center) / s.scale;
    p.climate_scaling.push_back(s);
  }

  p.validate();
  return p;
}

void export_response_csv(const PanelData& panel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write file", path);
  out << "region_id,year,defor_area_ha,forest_extent_ha\n";
  for (int i = 0; i < panel.n_regions(); ++i) {
    for (int t = 0; t < panel.n_years(); ++t) {
      double d = panel.defor_area(i, t);
      double e = panel.forest_extent(i, t);
      if (std::isnan(d) && std::isnan(e)) continue;
      out << panel.region_ids[i] << ',' << panel.years[t] << ',' << format_double(d) << ','
          << format_double(e) << '\n';
    }
  }
}

AdjacencyGraph read_adjacency(const std::string& path, const std::vector<std::string>& region_ids,
                              const std::vector<std::string>& excluded) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open file", path);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < region_ids.size(); ++i) index[region_ids[i]] = static_cast<int>(i);
  std::set<std::string> dropped(excluded.begin(), excluded.end());
  std::vector<std::pair<int, int>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto f = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != 2) throw IngestionError("expected 'region_a,region_b'", where);
    if (dropped.count(f[0]) || dropped.count(f[1])) continue;
    auto a = index.find(f[0]);
    auto b = index.find(f[1]);
    if (a == index.end()) throw IngestionError("unknown region id '" + f[0] + "'", where);
    if (b == index.end()) throw IngestionError("unknown region id '" + f[1] + "'", where);
    if (a->second == b->second) throw IngestionError("self-adjacency for region '" + f[0] + "'", where);
    edges.emplace_back(a->second, b->second);
  }
  return AdjacencyGraph(static_cast<int>(region_ids.size()), std::move(edges));
}

double log10p1(double x) {
  if (!(x > -1.0)) throw DomainError("log10p1: argument must exceed -1");
  return std::log10(x + 1.0);
}

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names, const Eigen::MatrixXd& columns) {
  const Eigen::Index k = columns.cols();
  if (static_cast<Eigen::Index>(names.size()) != k) throw DomainError("correlation_matrix: name count mismatch");
  CorrelationMatrix out{names, Eigen::MatrixXd::Constant(k, k, kNaN)};
  auto pearson = [&](Eigen::Index a, Eigen::Index b) {
    double sa = 0, sb = 0;
    int n = 0;
    for (Eigen::Index r = 0; r < columns.rows(); ++r) {
      double x = columns(r, a), y = columns(r, b);
      if (std::isfinite(x) && std::isfinite(y)) {
        sa += x;
        sb += y;
        ++n;
      }
    }
    if (n < 2) return kNaN;
    double ma = sa / n, mb = sb / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (Eigen::Index r = 0; r < columns.rows(); ++r) {
      double x = columns(r, a), y = columns(r, b);
      if (std::isfinite(x) && std::isfinite(y)) {
        sxy += (x - ma) * (y - mb);
        sxx += (x - ma) * (x - ma);
        syy += (y - mb) * (y - mb);
      }
    }
    if (sxx <= 0.0 || syy <= 0.0) return kNaN;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  };
  for (Eigen::Index a = 0; a < k; ++a) {
    double d = pearson(a, a);
    out.r(a, a) = std::isnan(d) ? kNaN : 1.0;
    for (Eigen::Index b = a + 1; b < k; ++b) {
      double v = pearson(a, b);
      out.r(a, b) = v;
      out.r(b, a) = v;
    }
  }
  if (columns.rows() < 2) throw DomainError("correlation_matrix: need at least two rows");
  return out;
}

}  // namespace bentcable
