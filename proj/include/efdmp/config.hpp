// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "efdmp/basis.hpp"

namespace efdmp {

// Hyperparameters of one functional class: Dirichlet mass alpha_l for the
// class weight, within-class mass c_l over h_max atoms, the basis system and
// the Gaussian prior N(prior_mean, prior_cov) on atom coefficients.
struct ClassConfig {
  double alpha = 1.0;
  double c = 1.0;
  int h_max = 1;
  BasisSpec basis;
  Eigen::VectorXd prior_mean;
  Eigen::MatrixXd prior_cov;

  std::size_t dimension() const { return basis.dimension(); }
};

struct ModelConfig {
  std::vector<ClassConfig> classes;
  double a_sigma = 1.0;  // Gamma shape of the noise precision prior
  double b_sigma = 1.0;  // Gamma rate of the noise precision prior

  // When set, the noise precision is known and held at this value: q(sigma^-2)
  // is a point mass and the noise update is skipped.
  std::optional<double> noise_precision;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t total_atoms() const;
  double alpha_total() const;
};

// Throws the error for the first violated invariant, naming the class:
// InvalidConfig, DimensionMismatch or NotPositiveDefinite.
void validate_config(const ModelConfig& cfg);

// An atom (l, h), zero-based.
struct ClusterLabel {
  std::size_t cls = 0;
  std::size_t atom = 0;
  auto operator<=>(const ClusterLabel&) const = default;
};

// Maps atom labels (l, h) to the flat column order used by responsibility
// matrices: class-major, atoms in order within each class.
class AtomLayout {
 public:
  explicit AtomLayout(const ModelConfig& cfg);

  std::size_t num_classes() const { return sizes_.size(); }
  std::size_t atoms_in(std::size_t cls) const { return sizes_.at(cls); }
  std::size_t total() const { return total_; }
  std::size_t column(ClusterLabel label) const { return offsets_.at(label.cls) + label.atom; }
  std::size_t offset(std::size_t cls) const { return offsets_.at(cls); }
  ClusterLabel label(std::size_t column) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

}  // namespace efdmp
