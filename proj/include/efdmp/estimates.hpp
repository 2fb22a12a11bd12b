// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "efdmp/cavi.hpp"
#include "efdmp/config.hpp"
#include "efdmp/dataset.hpp"

namespace efdmp {

// Argmax point estimates: g_hat[i] over all atoms, f_hat[i] over classes of
// the per-class responsibility mass. Ties go to the lexicographically
// smallest label. The two are computed independently and may disagree.
struct MapAssignments {
  std::vector<ClusterLabel> g_hat;
  std::vector<std::size_t> f_hat;

  // Units whose f_hat differs from the class of g_hat.
  std::size_t disagreements() const;
};

MapAssignments map_assignments(const Eigen::MatrixXd& rho, const AtomLayout& layout);
MapAssignments map_assignments(const VariationalState& state, const ModelConfig& cfg);

// theta_hat(t) = sum_m B_m(t) mu_tilde_m on the grid.
Eigen::VectorXd estimate_curve(const VariationalState& state, const ModelConfig& cfg, ClusterLabel label,
                               std::span<const double> grid);

// Co-occurrence counts; rows are the sorted distinct true labels, columns the
// sorted distinct estimated labels.
struct Contingency {
  std::vector<int> true_labels;
  std::vector<int> est_labels;
  Eigen::MatrixXi counts;
};

Contingency contingency(std::span<const int> true_labels, std::span<const int> est_labels);

// Best matched fraction over injective maps from estimated to true labels,
// solved as an assignment problem (Hungarian method).
double permutation_accuracy(std::span<const int> true_labels, std::span<const int> est_labels);

// Same quantity by enumerating every injective map; at most 8 labels a side.
double permutation_accuracy_exhaustive(std::span<const int> true_labels, std::span<const int> est_labels);

// Maximum-weight assignment of rows to distinct columns for a nonnegative
// weight matrix; returns the column of each row, -1 when left unassigned.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights);

struct OccupiedCluster {
  ClusterLabel label;
  int frequency = 0;
  std::optional<double> volume;
  Eigen::VectorXd curve;  // theta_hat on ClusterReport::grid
};

struct ClusterReport {
  MapAssignments assignments;
  std::vector<OccupiedCluster> clusters;  // labels with at least one g_hat member, lexicographic
  std::vector<double> grid;
};

// Occupancy, frequencies, curves on `grid` and, when every unit carries a
// volume, per-cluster volume sums.
ClusterReport build_report(const VariationalState& state, const ModelConfig& cfg, const FunctionalDataset& data,
                           std::span<const double> grid);

// Per occupied cluster, the sum of member volumes (MissingVolumes otherwise).
std::vector<double> volume_report(const ClusterReport& report, const FunctionalDataset& data);

// Flat integer label per unit from g_hat, for contingency tables.
std::vector<int> flat_labels(const MapAssignments& assignments, const AtomLayout& layout);

}  // namespace efdmp
