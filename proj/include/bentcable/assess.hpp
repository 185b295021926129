#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bentcable/bent_cable.hpp"
#include "bentcable/model.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/sampler.hpp"

namespace bentcable {

// -2 * log_likelihood.
double deviance(const PanelData& data, const ParamState& s);

// Half the sample variance (n - 1 denominator) of a deviance trace.
double p_v(std::span<const double> deviance_trace);

struct DicResult {
  double mean_deviance = 0.0;
  double p_d = 0.0;
  double dic = 0.0;
};

// p_D = mean - plug-in, DIC = mean + p_D. p_D is not clamped.
DicResult dic(std::span<const double> deviance_trace, double deviance_at_plugin);

// Linear interpolation between order statistics (R's type 7). `sorted` must
// be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double p);
double median(std::vector<double> x);

inline constexpr double kDefaultLevelValues[] = {0.80, 0.95};
inline constexpr std::span<const double> kDefaultLevels{kDefaultLevelValues};

struct Interval {
  double level = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
};

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  std::vector<Interval> intervals;  // one per requested level, ascending
  double rhat = 0.0;                // NaN with fewer than two chains

  const Interval* at(double level) const;
};

struct ChainAcceptance {
  int chain = 0;
  std::vector<double> tau;        // per region
  std::vector<double> log_gamma;  // per region, per-region mode only
  double lgamma = 0.0;            // common mode only
};

struct FitReport {
  std::vector<double> levels;
  double posterior_median_deviance = 0.0;
  std::vector<double> chain_median_deviance;
  double p_v = 0.0;
  // Filled only when the data are available (fit_report).
  std::optional<DicResult> dic;
  std::optional<double> plugin_deviance;
  std::vector<ParamSummary> params;
  // Covariate coefficients and intercept mapped back to raw covariate units.
  std::vector<ParamSummary> raw_scale;
  TransitionWindow population_window;
  std::vector<std::string> spatial_contagion;  // regions whose 95% beta10 interval excludes 0
  std::vector<ChainAcceptance> acceptance;

  const ParamSummary* find(const std::string& name) const;
};

ParamSummary summarize_draws(const std::string& name, const std::vector<std::vector<double>>& chains,
                             std::span<const double> levels);

// Posterior summaries pooled across chains. Throws ConfigError on empty traces.
FitReport summarize(const PosteriorSamples& samples, std::span<const double> levels = kDefaultLevels);
// summarize plus DIC at the plug-in state.
FitReport fit_report(const PanelData& data, const PosteriorSamples& samples,
                     std::span<const double> levels = kDefaultLevels);

// Posterior means, except tau, tbar, log_gamma and lgamma, which take
// posterior medians.
ParamState plugin_state(const PosteriorSamples& samples);
// Every parameter at its pooled posterior median.
ParamState median_state(const PosteriorSamples& samples);

// y minus every non-cable term at `effects`. NaN where the cell is missing.
Eigen::MatrixXd detrend(const PanelData& data, const ParamState& effects);
Eigen::MatrixXd detrend(const PanelData& data, const PosteriorSamples& samples);

struct CableCurve {
  std::vector<int> years;
  std::vector<double> values;
  TransitionWindow window;
};

// Population cable at posterior medians of (a1, a2, tbar, exp(lgamma)).
CableCurve population_cable(const PosteriorSamples& samples);
// One cable per region at posterior medians of its own parameters.
std::vector<CableCurve> region_cables(const PosteriorSamples& samples);

// Output writers. Doubles are printed in shortest round-trip form.
void write_report_json(const FitReport& report, const SampleMeta& meta, const std::string& path);
void write_summary_csv(const FitReport& report, const std::string& path);
// Tidy series: region, year, value, kind.
void write_series_csv(const PanelData& data, const PosteriorSamples& samples, const std::string& path);

}  // namespace bentcable
