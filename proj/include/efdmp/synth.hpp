// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "efdmp/dataset.hpp"

namespace efdmp {

struct TrueFunction {
  std::string name;
  std::function<double(double)> f;
};

// f1(t) = 1 - 2t, f2(t) = (cos 2pi t + sin 2pi t)/2, f3(t) = 2t^4 - 1,
// f4(t) = (cos 4pi t + sin 4pi t)/2.
std::vector<TrueFunction> simulation_truths();

inline constexpr double kSmallNoiseVariance = 0.1 * 0.1;
inline constexpr double kHighNoiseVariance = 1.5 * 1.5;

struct SimulationSpec {
  int n = 100;
  int t_count = 50;
  std::vector<TrueFunction> true_functions;
  std::vector<int> block_sizes;  // consecutive units per true function
  double noise_variance = kSmallNoiseVariance;
  std::uint64_t seed = 0;
};

// Four blocks of 25 units on 50 equally spaced points, one block per truth.
SimulationSpec simulation_study(double noise_variance, std::uint64_t seed);

void validate_spec(const SimulationSpec& spec);

struct SimulatedData {
  FunctionalDataset data;   // unstandardized
  std::vector<int> labels;  // zero-based index of each unit's true function
};

// Grid (1/T, ..., T/T); y_i(t) = f_j(t) + N(0, noise_variance) iid.
SimulatedData generate(const SimulationSpec& spec);

}  // namespace efdmp
