// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace efdmp {

// Seeded generator used by every stochastic operation. The engine is
// std::mt19937_64 (bit-exact by the standard) and the distributions come from
// Boost.Random, whose algorithms are fixed in source, so a seed reproduces
// the same stream on every platform.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  double exponential() { return exponential_(engine_); }

  // Index drawn proportionally to the nonnegative weights.
  std::size_t categorical(std::span<const double> weights);

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  boost::random::uniform_01<double> uniform_;
  boost::random::normal_distribution<double> normal_;
  boost::random::exponential_distribution<double> exponential_;
};

// Independent seed for a numbered substream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace efdmp
