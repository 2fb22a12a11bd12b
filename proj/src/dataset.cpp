// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "efdmp/error.hpp"

namespace efdmp {

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

Moments population_moments(const std::vector<double>& values) {
  Moments m;
  const double count = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= count;
  for (double v : values) m.variance += (v - m.mean) * (v - m.mean);
  m.variance /= count;
  return m;
}

}  // namespace

FunctionalDataset::FunctionalDataset(std::vector<Unit> units, bool standardized)
    : units_(std::move(units)), standardized_(standardized) {
  std::unordered_set<std::string> seen;
  for (const Unit& u : units_) {
    if (!seen.insert(u.id).second) {
      throw Error(ErrorKind::InvalidData, "duplicate unit id '" + u.id + "'");
    }
    if (u.grid.empty()) {
      throw Error(ErrorKind::InvalidData, "unit '" + u.id + "' has no observations");
    }
    if (u.grid.size() != u.values.size()) {
      throw Error(ErrorKind::InvalidData, "unit '" + u.id + "' has grid and values of different length");
    }
    for (std::size_t s = 0; s < u.grid.size(); ++s) {
      if (!std::isfinite(u.grid[s]) || !std::isfinite(u.values[s])) {
        throw Error(ErrorKind::InvalidData, "unit '" + u.id + "' has a non-finite entry");
      }
      if (s > 0 && !(u.grid[s] > u.grid[s - 1])) {
        throw Error(ErrorKind::InvalidData, "unit '" + u.id + "' grid is not strictly increasing");
      }
    }
    if (u.volume && !(std::isfinite(*u.volume) && *u.volume >= 0.0)) {
      throw Error(ErrorKind::InvalidData, "unit '" + u.id + "' has a negative or non-finite volume");
    }
    if (standardized_) {
      if (u.values.size() < 2) {
        throw Error(ErrorKind::TooShort, "unit '" + u.id + "' cannot be standardized with T_i = 1");
      }
      const Moments m = population_moments(u.values);
      if (std::abs(m.mean) > 1e-10 || std::abs(m.variance - 1.0) > 1e-8) {
        throw Error(ErrorKind::InvalidData, "unit '" + u.id + "' is flagged standardized but is not");
      }
    }
    total_points_ += u.grid.size();
  }
}

bool FunctionalDataset::has_volumes() const {
  return !units_.empty() &&
         std::all_of(units_.begin(), units_.end(), [](const Unit& u) { return u.volume.has_value(); });
}

double FunctionalDataset::total_volume() const {
  double total = 0.0;
  for (const Unit& u : units_) total += u.volume.value_or(0.0);
  return total;
}

std::vector<double> FunctionalDataset::grid_union() const {
  std::vector<double> all;
  all.reserve(total_points_);
  for (const Unit& u : units_) all.insert(all.end(), u.grid.begin(), u.grid.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

double FunctionalDataset::min_time() const {
  if (units_.empty()) throw Error(ErrorKind::InvalidData, "empty dataset has no time range");
  double t = units_.front().grid.front();
  for (const Unit& u : units_) t = std::min(t, u.grid.front());
  return t;
}

double FunctionalDataset::max_time() const {
  if (units_.empty()) throw Error(ErrorKind::InvalidData, "empty dataset has no time range");
  double t = units_.front().grid.back();
  for (const Unit& u : units_) t = std::max(t, u.grid.back());
  return t;
}

FunctionalDataset standardize(const FunctionalDataset& raw) {
  std::vector<Unit> out;
  out.reserve(raw.size());
  for (const Unit& u : raw.units()) {
    if (u.values.size() < 2) {
      throw Error(ErrorKind::TooShort, "unit '" + u.id + "' has fewer than two observations");
    }
    const Moments m = population_moments(u.values);
    if (!(m.variance > 0.0)) {
      throw Error(ErrorKind::ZeroVariance, "unit '" + u.id + "' is constant");
    }
    const double scale = std::sqrt(m.variance);
    Unit z = u;
    for (double& v : z.values) v = (v - m.mean) / scale;
    out.push_back(std::move(z));
  }
  return FunctionalDataset(std::move(out), true);
}

}  // namespace efdmp
