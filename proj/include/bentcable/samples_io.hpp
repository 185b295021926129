#pragma once

#include <string>

#include "bentcable/sampler.hpp"

namespace bentcable {

// Plain-text sample store. '#'-prefixed header lines carry the schema
// version, run metadata, covariate scalings, the configuration snapshot and
// acceptance rates; then one CSV row per kept draw:
//   chain,draw,deviance,<parameter names...>
// Doubles use shortest round-trip formatting, so reading back is exact.
void write_samples(const PosteriorSamples& samples, const std::string& path);
// Throws IngestionError when the file is missing, truncated or inconsistent.
PosteriorSamples read_samples(const std::string& path);

inline constexpr const char* kSamplesFormat = "bentcable-samples 1";

}  // namespace bentcable
