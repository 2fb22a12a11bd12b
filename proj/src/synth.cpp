// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/synth.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "efdmp/error.hpp"
#include "efdmp/random.hpp"

namespace efdmp {

std::vector<TrueFunction> simulation_truths() {
  constexpr double pi = std::numbers::pi;
  return {
      {"f1", [](double t) { return 1.0 - 2.0 * t; }},
      {"f2", [=](double t) { return 0.5 * (std::cos(2.0 * pi * t) + std::sin(2.0 * pi * t)); }},
      {"f3", [](double t) { return 2.0 * t * t * t * t - 1.0; }},
      {"f4", [=](double t) { return 0.5 * (std::cos(4.0 * pi * t) + std::sin(4.0 * pi * t)); }},
  };
}

SimulationSpec simulation_study(double noise_variance, std::uint64_t seed) {
  SimulationSpec spec;
  spec.n = 100;
  spec.t_count = 50;
  spec.true_functions = simulation_truths();
  spec.block_sizes = {25, 25, 25, 25};
  spec.noise_variance = noise_variance;
  spec.seed = seed;
  return spec;
}

void validate_spec(const SimulationSpec& spec) {
  if (spec.n < 1) throw Error(ErrorKind::InvalidConfig, "simulation needs n >= 1");
  if (spec.t_count < 1) throw Error(ErrorKind::InvalidConfig, "simulation needs t_count >= 1");
  if (spec.block_sizes.size() != spec.true_functions.size()) {
    throw Error(ErrorKind::InvalidConfig, "one block size is needed per true function");
  }
  for (int size : spec.block_sizes) {
    if (size < 0) throw Error(ErrorKind::InvalidConfig, "block sizes must be nonnegative");
  }
  const int total = std::accumulate(spec.block_sizes.begin(), spec.block_sizes.end(), 0);
  if (total != spec.n) {
    throw Error(ErrorKind::InvalidConfig, fmt::format("block sizes sum to {} but n = {}", total, spec.n));
  }
  if (!(spec.noise_variance >= 0.0) || !std::isfinite(spec.noise_variance)) {
    throw Error(ErrorKind::InvalidConfig, "noise variance must be nonnegative");
  }
}

SimulatedData generate(const SimulationSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  const double sd = std::sqrt(spec.noise_variance);
  const int width = static_cast<int>(std::to_string(spec.n).size());

  std::vector<double> grid(static_cast<std::size_t>(spec.t_count));
  for (int s = 0; s < spec.t_count; ++s) grid[s] = static_cast<double>(s + 1) / spec.t_count;

  SimulatedData out;
  std::vector<Unit> units;
  units.reserve(static_cast<std::size_t>(spec.n));
  int index = 0;
  for (std::size_t block = 0; block < spec.block_sizes.size(); ++block) {
    const auto& truth = spec.true_functions[block].f;
    for (int k = 0; k < spec.block_sizes[block]; ++k, ++index) {
      Unit u;
      u.id = fmt::format("unit{:0{}}", index + 1, width);
      u.grid = grid;
      u.values.reserve(grid.size());
      for (double t : grid) u.values.push_back(truth(t) + sd * rng.normal());
      units.push_back(std::move(u));
      out.labels.push_back(static_cast<int>(block));
    }
  }
  out.data = FunctionalDataset(std::move(units));
  return out;
}

}  // namespace efdmp
