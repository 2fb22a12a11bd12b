// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace efdmp {

// One observed series y_i on its own time grid t_i.
struct Unit {
  std::string id;
  std::vector<double> grid;
  std::vector<double> values;
  std::optional<double> volume;  // reporting metadata only, never enters the likelihood
};

// Ragged collection of functional observations. Immutable once built; the
// constructor enforces the per-unit invariants (equal lengths, T_i >= 1,
// strictly increasing finite grid, finite values, nonnegative volumes).
class FunctionalDataset {
 public:
  FunctionalDataset() = default;
  explicit FunctionalDataset(std::vector<Unit> units, bool standardized = false);

  std::span<const Unit> units() const { return units_; }
  const Unit& unit(std::size_t i) const { return units_.at(i); }
  std::size_t size() const { return units_.size(); }
  bool empty() const { return units_.empty(); }
  bool standardized() const { return standardized_; }

  // Sum of T_i, the length of the stacked observation vector.
  std::size_t total_points() const { return total_points_; }

  bool has_volumes() const;
  double total_volume() const;

  // Sorted distinct time points over all units.
  std::vector<double> grid_union() const;

  double min_time() const;
  double max_time() const;

 private:
  std::vector<Unit> units_;
  bool standardized_ = false;
  std::size_t total_points_ = 0;
};

// Per-unit centring and scaling to empirical mean 0 and population variance 1
// (divisor T_i). Grids, ids, volumes and unit order are preserved.
// Throws TooShort when T_i < 2 and ZeroVariance for a constant series.
FunctionalDataset standardize(const FunctionalDataset& raw);

}  // namespace efdmp
