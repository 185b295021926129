#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "bentcable/config.hpp"
#include "bentcable/model.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/spatial.hpp"

namespace bentcable {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;     // ingestion or configuration failure
inline constexpr int kExitInit = 2;      // sampler could not start
inline constexpr int kExitInternal = 3;  // numerical or unexpected failure

struct LoadedData {
  PanelData panel;
  AdjacencyGraph graph;
  SpatialWeights weights;
};

// Reads the configured files and builds panel, graph and CAR weights for `mode`.
LoadedData load_data(const RunConfig& config, WeightMode mode);

// A fixed, data-derived state at which prior terms are logged, so runs that
// differ only in hyperparameters can be compared term by term.
ParamState reference_state(const PanelData& data);

// Each command writes its artifacts under config.out and returns kExitOk;
// failures are thrown and mapped to exit codes by run_guarded.
int cmd_fit(const RunConfig& config, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_report(const std::string& samples_path, const std::string& out_dir, std::ostream& log);
int cmd_variants(const RunConfig& config, std::ostream& log);

// Runs `body`, turning exceptions into one machine-parseable line on `err`:
//   error kind=<ingestion|config|initialization|numerical|internal> message="..."
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace bentcable
