#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace bentcable {

using Rng = std::mt19937_64;

// Engine seeded from a tuple of integers (seed, chain, stream, ...), so that
// independent streams never depend on the order in which they are created.
inline Rng make_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2);
  for (auto k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

// Gamma(shape, rate) draw (mean shape / rate).
inline double gamma_shape_rate(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

}  // namespace bentcable
