#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bentcable/kernels.hpp"
#include "bentcable/model.hpp"
#include "bentcable/panel.hpp"
#include "bentcable/sampler.hpp"
#include "bentcable/simulate.hpp"

namespace bentcable {

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines; '#' starts a comment, blank lines are ignored.
// Throws ConfigError (with "label:line") on malformed lines or repeated keys.
KeyValues parse_key_values(std::string_view text, const std::string& label);
KeyValues read_key_values(const std::string& path);

// Everything a run needs. Built from defaults, then the config file, then
// command-line overrides, in that order.
struct RunConfig {
  // Input files; relative paths are resolved against the config file's directory.
  std::string response;  // annual long-format CSV
  std::string epochs;    // multi-year epoch CSV (alternative to response)
  std::string static_csv;
  std::string temporal_csv;
  std::string spatiotemporal_csv;
  std::string adjacency;
  std::vector<std::string> exclude_regions;

  PanelConfig panel;
  HyperConfig hyper;
  RunSettings run;
  kernels::Backend backend = kernels::Backend::openmp;
  std::string out = "bentcable_out";
  SimScenario sim;

  // Canonical key/value view of every setting that affects results (output
  // location excluded), with input paths made absolute.
  KeyValues snapshot() const;
};

// Throws ConfigError on unknown keys or unparsable values.
RunConfig make_run_config(const KeyValues& values, const std::string& base_dir = ".");
// Reads `path` (if non-empty), then applies `overrides` on top.
RunConfig load_run_config(const std::string& path, const KeyValues& overrides = {});

// Every key make_run_config understands, for help output.
const std::vector<std::string>& known_config_keys();

}  // namespace bentcable
