// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/estimates.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "efdmp/error.hpp"

namespace efdmp {

std::size_t MapAssignments::disagreements() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < g_hat.size(); ++i) count += (g_hat[i].cls != f_hat[i]) ? 1 : 0;
  return count;
}

MapAssignments map_assignments(const Eigen::MatrixXd& rho, const AtomLayout& layout) {
  if (static_cast<std::size_t>(rho.cols()) != layout.total()) {
    throw Error(ErrorKind::DimensionMismatch, "responsibility matrix width does not match the atom layout");
  }
  MapAssignments out;
  out.g_hat.reserve(static_cast<std::size_t>(rho.rows()));
  out.f_hat.reserve(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    Eigen::Index best_col = 0;
    for (Eigen::Index col = 1; col < rho.cols(); ++col) {
      if (rho(i, col) > rho(i, best_col)) best_col = col;
    }
    out.g_hat.push_back(layout.label(static_cast<std::size_t>(best_col)));

    std::size_t best_class = 0;
    double best_mass = -1.0;
    for (std::size_t l = 0; l < layout.num_classes(); ++l) {
      const double mass = rho.row(i)
                              .segment(static_cast<Eigen::Index>(layout.offset(l)),
                                       static_cast<Eigen::Index>(layout.atoms_in(l)))
                              .sum();
      if (mass > best_mass) {
        best_mass = mass;
        best_class = l;
      }
    }
    out.f_hat.push_back(best_class);
  }
  return out;
}

MapAssignments map_assignments(const VariationalState& state, const ModelConfig& cfg) {
  return map_assignments(state.rho, AtomLayout(cfg));
}

Eigen::VectorXd estimate_curve(const VariationalState& state, const ModelConfig& cfg, ClusterLabel label,
                               std::span<const double> grid) {
  const BasisSpec& spec = cfg.classes.at(label.cls).basis;
  const Eigen::VectorXd& mean = state.atom_mean.at(label.cls).at(label.atom);
  Eigen::VectorXd curve(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t s = 0; s < grid.size(); ++s) {
    curve[static_cast<Eigen::Index>(s)] = evaluate_basis(spec, grid[s]).dot(mean);
  }
  return curve;
}

Contingency contingency(std::span<const int> true_labels, std::span<const int> est_labels) {
  if (true_labels.size() != est_labels.size()) {
    throw Error(ErrorKind::LengthMismatch, fmt::format("{} true labels but {} estimated labels", true_labels.size(),
                                                       est_labels.size()));
  }
  Contingency out;
  out.true_labels.assign(true_labels.begin(), true_labels.end());
  out.est_labels.assign(est_labels.begin(), est_labels.end());
  for (auto* labels : {&out.true_labels, &out.est_labels}) {
    std::sort(labels->begin(), labels->end());
    labels->erase(std::unique(labels->begin(), labels->end()), labels->end());
  }
  const auto row_of = [&](int label) {
    return std::lower_bound(out.true_labels.begin(), out.true_labels.end(), label) - out.true_labels.begin();
  };
  const auto col_of = [&](int label) {
    return std::lower_bound(out.est_labels.begin(), out.est_labels.end(), label) - out.est_labels.begin();
  };
  out.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(out.true_labels.size()),
                                     static_cast<Eigen::Index>(out.est_labels.size()));
  for (std::size_t i = 0; i < true_labels.size(); ++i) out.counts(row_of(true_labels[i]), col_of(est_labels[i])) += 1;
  return out;
}

std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights) {
  const auto rows = static_cast<int>(weights.rows());
  const auto cols = static_cast<int>(weights.cols());
  const int size = std::max(rows, cols);
  if (size == 0) return {};
  const double top = weights.size() > 0 ? weights.maxCoeff() : 0.0;

  // Square cost matrix, 1-based, padded with zero-weight (cost = top) cells.
  std::vector<std::vector<double>> cost(size + 1, std::vector<double>(size + 1, top));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) cost[r + 1][c + 1] = top - weights(r, c);
  }

  // Shortest augmenting path Hungarian method with potentials, O(size^3).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(size + 1, 0.0), v(size + 1, 0.0);
  std::vector<int> match(size + 1, 0), way(size + 1, 0);
  for (int r = 1; r <= size; ++r) {
    match[0] = r;
    int col0 = 0;
    std::vector<double> min_slack(size + 1, inf);
    std::vector<bool> used(size + 1, false);
    do {
      used[col0] = true;
      const int row0 = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int c = 1; c <= size; ++c) {
        if (used[c]) continue;
        const double slack = cost[row0][c] - u[row0] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (int c = 0; c <= size; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> assignment(rows, -1);
  for (int c = 1; c <= size; ++c) {
    const int r = match[c];
    if (r >= 1 && r <= rows && c <= cols) assignment[r - 1] = c - 1;
  }
  return assignment;
}

double permutation_accuracy(std::span<const int> true_labels, std::span<const int> est_labels) {
  const Contingency table = contingency(true_labels, est_labels);
  if (true_labels.empty()) return 1.0;
  // Rows: estimated labels, each mapped to at most one true label.
  const Eigen::MatrixXd weights = table.counts.transpose().cast<double>();
  const std::vector<int> assignment = max_weight_assignment(weights);
  long matched = 0;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] >= 0) matched += table.counts(assignment[r], static_cast<Eigen::Index>(r));
  }
  return static_cast<double>(matched) / static_cast<double>(true_labels.size());
}

namespace {

long best_injection(const std::vector<std::vector<long>>& counts, std::size_t est, std::vector<bool>& used) {
  if (est == counts.size()) return 0;
  long best = best_injection(counts, est + 1, used);  // leave this label unmatched
  for (std::size_t t = 0; t < used.size(); ++t) {
    if (used[t]) continue;
    used[t] = true;
    best = std::max(best, counts[est][t] + best_injection(counts, est + 1, used));
    used[t] = false;
  }
  return best;
}

}  // namespace

double permutation_accuracy_exhaustive(std::span<const int> true_labels, std::span<const int> est_labels) {
  if (true_labels.size() != est_labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "label vectors differ in length");
  }
  if (true_labels.empty()) return 1.0;
  std::map<int, std::size_t> true_index, est_index;
  for (int t : true_labels) true_index.emplace(t, true_index.size());
  for (int e : est_labels) est_index.emplace(e, est_index.size());
  if (true_index.size() > 8 || est_index.size() > 8) {
    throw Error(ErrorKind::InvalidData, "exhaustive matching supports at most 8 labels per side");
  }
  std::vector<std::vector<long>> counts(est_index.size(), std::vector<long>(true_index.size(), 0));
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    counts[est_index[est_labels[i]]][true_index[true_labels[i]]] += 1;
  }
  std::vector<bool> used(true_index.size(), false);
  return static_cast<double>(best_injection(counts, 0, used)) / static_cast<double>(true_labels.size());
}

ClusterReport build_report(const VariationalState& state, const ModelConfig& cfg, const FunctionalDataset& data,
                           std::span<const double> grid) {
  const AtomLayout layout(cfg);
  if (static_cast<std::size_t>(state.rho.rows()) != data.size()) {
    throw Error(ErrorKind::DimensionMismatch, "state and dataset have different numbers of units");
  }
  ClusterReport report;
  report.assignments = map_assignments(state.rho, layout);
  report.grid.assign(grid.begin(), grid.end());

  std::vector<int> frequency(layout.total(), 0);
  for (const ClusterLabel& g : report.assignments.g_hat) frequency[layout.column(g)] += 1;
  const bool volumes = data.has_volumes();
  std::vector<double> volume(layout.total(), 0.0);
  if (volumes) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      volume[layout.column(report.assignments.g_hat[i])] += *data.unit(i).volume;
    }
  }
  for (std::size_t col = 0; col < layout.total(); ++col) {
    if (frequency[col] == 0) continue;
    OccupiedCluster cluster;
    cluster.label = layout.label(col);
    cluster.frequency = frequency[col];
    if (volumes) cluster.volume = volume[col];
    cluster.curve = estimate_curve(state, cfg, cluster.label, grid);
    report.clusters.push_back(std::move(cluster));
  }
  return report;
}

std::vector<double> volume_report(const ClusterReport& report, const FunctionalDataset& data) {
  if (!data.has_volumes()) throw Error(ErrorKind::MissingVolumes, "dataset does not carry a volume for every unit");
  if (report.assignments.g_hat.size() != data.size()) {
    throw Error(ErrorKind::LengthMismatch, "report and dataset have different numbers of units");
  }
  std::vector<double> sums(report.clusters.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto it = std::find_if(report.clusters.begin(), report.clusters.end(),
                                 [&](const OccupiedCluster& c) { return c.label == report.assignments.g_hat[i]; });
    if (it == report.clusters.end()) {
      throw Error(ErrorKind::InconsistentState, "unit assigned to a cluster missing from the report");
    }
    sums[static_cast<std::size_t>(it - report.clusters.begin())] += *data.unit(i).volume;
  }
  return sums;
}

std::vector<int> flat_labels(const MapAssignments& assignments, const AtomLayout& layout) {
  std::vector<int> out;
  out.reserve(assignments.g_hat.size());
  for (const ClusterLabel& g : assignments.g_hat) out.push_back(static_cast<int>(layout.column(g)));
  return out;
}

}  // namespace efdmp
