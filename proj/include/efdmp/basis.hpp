// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "efdmp/dataset.hpp"

namespace efdmp {

struct Constant {
  bool operator==(const Constant&) const = default;
};

// t^exponent
struct Power {
  int exponent = 1;
  bool operator==(const Power&) const = default;
};

// cos(angular_rate * t)
struct Cosine {
  double angular_rate = 1.0;
  bool operator==(const Cosine&) const = default;
};

// sin(angular_rate * t)
struct Sine {
  double angular_rate = 1.0;
  bool operator==(const Sine&) const = default;
};

// Clamped B-spline block on [lower, upper]; contributes `count` columns,
// with count == interior_knots.size() + degree + 1.
struct BSplineBlock {
  int degree = 3;
  std::vector<double> interior_knots;
  double lower = 0.0;
  double upper = 1.0;
  int count = 4;
  bool operator==(const BSplineBlock&) const = default;
};

using BasisTerm = std::variant<Constant, Power, Cosine, Sine, BSplineBlock>;

// Ordered list of basis terms for one functional class.
struct BasisSpec {
  std::vector<BasisTerm> terms;

  // Number of scalar columns after expanding spline blocks (M_l).
  std::size_t dimension() const;

  bool operator==(const BasisSpec&) const = default;
};

// Throws InvalidConfig describing the first malformed term.
void validate_basis(const BasisSpec& spec);

// [B_1(t), ..., B_M(t)] in declared term order. Throws OutOfSupport when a
// spline block is evaluated outside its boundary.
Eigen::VectorXd evaluate_basis(const BasisSpec& spec, double t);

// Values of the `count` clamped B-spline functions at t.
Eigen::VectorXd bspline_values(const BSplineBlock& block, double t);

// Per-unit design blocks B_i (T_i x M); row s is the basis at t_is.
struct DesignMatrix {
  std::vector<Eigen::MatrixXd> blocks;
  std::size_t columns = 0;

  std::size_t rows() const;

  // Units stacked in dataset order, matching the stacked observation vector.
  Eigen::MatrixXd stacked() const;
};

DesignMatrix build_design(const BasisSpec& spec, const FunctionalDataset& data);

// Cubic spline block with `spline_count` columns over [t_min, t_max]
// (uniform interior knots when spline_count > 4) followed by one annual
// cosine/sine pair at angular rate 2*pi/period.
BasisSpec preset_p1(double t_min, double t_max, int spline_count = 4, double period = 365.0 / 7.0);

// Same spline block with a semi-annual cosine/sine pair (rate 4*pi/period).
BasisSpec preset_p2(double t_min, double t_max, int spline_count = 4, double period = 365.0 / 7.0);

}  // namespace efdmp
