// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/basis.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "efdmp/error.hpp"

namespace efdmp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::size_t term_width(const BasisTerm& term) {
  if (const auto* block = std::get_if<BSplineBlock>(&term)) {
    return static_cast<std::size_t>(std::max(block->count, 0));
  }
  return 1;
}

// Full clamped knot vector: degree+1 copies of each boundary around the
// interior knots.
std::vector<double> clamped_knots(const BSplineBlock& block) {
  std::vector<double> knots;
  knots.reserve(block.interior_knots.size() + 2 * (block.degree + 1));
  knots.insert(knots.end(), block.degree + 1, block.lower);
  knots.insert(knots.end(), block.interior_knots.begin(), block.interior_knots.end());
  knots.insert(knots.end(), block.degree + 1, block.upper);
  return knots;
}

}  // namespace

std::size_t BasisSpec::dimension() const {
  std::size_t total = 0;
  for (const BasisTerm& term : terms) total += term_width(term);
  return total;
}

void validate_basis(const BasisSpec& spec) {
  if (spec.terms.empty()) {
    throw Error(ErrorKind::InvalidConfig, "basis has no terms");
  }
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    const auto fail = [k](const std::string& what) {
      throw Error(ErrorKind::InvalidConfig, fmt::format("basis term {}: {}", k + 1, what));
    };
    std::visit(Overloaded{
                   [](const Constant&) {},
                   [&](const Power& p) {
                     if (p.exponent < 0) fail("power exponent must be nonnegative");
                   },
                   [&](const Cosine& c) {
                     if (!(c.angular_rate > 0.0) || !std::isfinite(c.angular_rate))
                       fail("cosine angular_rate must be positive");
                   },
                   [&](const Sine& s) {
                     if (!(s.angular_rate > 0.0) || !std::isfinite(s.angular_rate))
                       fail("sine angular_rate must be positive");
                   },
                   [&](const BSplineBlock& b) {
                     if (b.degree < 0) fail("bspline degree must be nonnegative");
                     if (!(b.lower < b.upper)) fail("bspline boundary must satisfy lower < upper");
                     double previous = b.lower;
                     for (double knot : b.interior_knots) {
                       if (!(knot > previous) || !(knot < b.upper))
                         fail("bspline interior knots must be strictly increasing inside the boundary");
                       previous = knot;
                     }
                     const int expected = static_cast<int>(b.interior_knots.size()) + b.degree + 1;
                     if (b.count != expected)
                       fail(fmt::format("bspline count {} does not equal interior knots + degree + 1 = {}",
                                        b.count, expected));
                   },
               },
               spec.terms[k]);
  }
}

Eigen::VectorXd bspline_values(const BSplineBlock& block, double t) {
  if (!(t >= block.lower && t <= block.upper)) {
    throw Error(ErrorKind::OutOfSupport,
                fmt::format("t = {} outside spline support [{}, {}]", t, block.lower, block.upper));
  }
  const int p = block.degree;
  const int count = block.count;
  const std::vector<double> knots = clamped_knots(block);

  // Knot span k with knots[k] <= t < knots[k+1]; the right boundary goes to
  // the last non-degenerate span.
  int span = count - 1;
  if (t < block.upper) {
    span = p;
    while (span < count - 1 && t >= knots[span + 1]) ++span;
  }

  // de Boor's triangular evaluation of the p+1 nonzero functions.
  std::vector<double> nonzero(p + 1, 0.0), left(p + 1, 0.0), right(p + 1, 0.0);
  nonzero[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots[span + 1 - j];
    right[j] = knots[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = nonzero[r] / (right[r + 1] + left[j - r]);
      nonzero[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    nonzero[j] = saved;
  }

  Eigen::VectorXd values = Eigen::VectorXd::Zero(count);
  for (int r = 0; r <= p; ++r) values[span - p + r] = nonzero[r];
  return values;
}

Eigen::VectorXd evaluate_basis(const BasisSpec& spec, double t) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(spec.dimension()));
  Eigen::Index col = 0;
  for (const BasisTerm& term : spec.terms) {
    std::visit(Overloaded{
                   [&](const Constant&) { out[col++] = 1.0; },
                   [&](const Power& p) {
                     double v = 1.0;
                     for (int e = 0; e < p.exponent; ++e) v *= t;
                     out[col++] = v;
                   },
                   [&](const Cosine& c) { out[col++] = std::cos(c.angular_rate * t); },
                   [&](const Sine& s) { out[col++] = std::sin(s.angular_rate * t); },
                   [&](const BSplineBlock& b) {
                     out.segment(col, b.count) = bspline_values(b, t);
                     col += b.count;
                   },
               },
               term);
  }
  return out;
}

std::size_t DesignMatrix::rows() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += static_cast<std::size_t>(b.rows());
  return total;
}

Eigen::MatrixXd DesignMatrix::stacked() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(columns));
  Eigen::Index row = 0;
  for (const auto& b : blocks) {
    out.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  return out;
}

DesignMatrix build_design(const BasisSpec& spec, const FunctionalDataset& data) {
  DesignMatrix design;
  design.columns = spec.dimension();
  design.blocks.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Unit& u = data.unit(i);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(u.grid.size()), static_cast<Eigen::Index>(design.columns));
    for (std::size_t s = 0; s < u.grid.size(); ++s) {
      try {
        block.row(static_cast<Eigen::Index>(s)) = evaluate_basis(spec, u.grid[s]).transpose();
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::OutOfSupport) throw;
        throw Error(ErrorKind::OutOfSupport,
                    fmt::format("unit '{}' time index {} (t = {}): {}", u.id, s, u.grid[s], e.detail()));
      }
    }
    design.blocks.push_back(std::move(block));
  }
  return design;
}

namespace {

BasisSpec seasonal_preset(double t_min, double t_max, int spline_count, double rate) {
  if (spline_count < 4) {
    throw Error(ErrorKind::InvalidConfig, "cubic spline block needs at least 4 columns");
  }
  BSplineBlock block;
  block.degree = 3;
  block.lower = t_min;
  block.upper = t_max;
  block.count = spline_count;
  const int interior = spline_count - 4;
  for (int k = 1; k <= interior; ++k) {
    block.interior_knots.push_back(t_min + (t_max - t_min) * k / (interior + 1));
  }
  BasisSpec spec;
  spec.terms = {block, Cosine{rate}, Sine{rate}};
  validate_basis(spec);
  return spec;
}

}  // namespace

BasisSpec preset_p1(double t_min, double t_max, int spline_count, double period) {
  return seasonal_preset(t_min, t_max, spline_count, 2.0 * std::numbers::pi / period);
}

BasisSpec preset_p2(double t_min, double t_max, int spline_count, double period) {
  return seasonal_preset(t_min, t_max, spline_count, 4.0 * std::numbers::pi / period);
}

}  // namespace efdmp
