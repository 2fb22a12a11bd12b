// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "efdmp/config.hpp"

namespace efdmp {

// Sequential state of the enriched Polya urn: how many units sit in each
// class, and the sizes of the distinct atoms drawn so far within each class.
struct UrnCluster {
  std::size_t atom = 0;  // creation order within the class
  int size = 0;
};

struct UrnState {
  std::vector<int> class_counts;                  // n_l
  std::vector<std::vector<UrnCluster>> clusters;  // per class; k_l = clusters[l].size()

  static UrnState empty(std::size_t num_classes);

  int total() const;                        // n
  std::size_t distinct(std::size_t cls) const { return clusters.at(cls).size(); }
};

// Throws InconsistentState unless the state matches cfg: L classes, cluster
// sizes positive and summing to n_l, and k_l <= H_l.
void check_state(const UrnState& state, const ModelConfig& cfg);

// Prior probability that two distinct units share an atom:
//   sum_l alpha_l(alpha_l+1)/(alpha(alpha+1)) * (c_l+H_l)/(c_l H_l + H_l).
double cocluster_probability(const ModelConfig& cfg);

// Limit of cocluster_probability as every H_l grows without bound.
double cocluster_limit(const ModelConfig& cfg);

// P(F_{n+1} = l | F) = (alpha_l + n_l) / (alpha + n).
std::vector<double> class_predictive(const UrnState& state, const ModelConfig& cfg);

struct WithinClassPredictive {
  double new_prob = 0.0;         // (1 - k_l/H_l) c_l / (c_l + n_l)
  std::vector<double> existing;  // (n_jl + c_l/H_l) / (c_l + n_l), one per existing atom
};

WithinClassPredictive within_class_predictive(const UrnState& state, std::size_t cls, const ModelConfig& cfg);

// Probability that the next draw opens a new cluster, summed over classes.
double new_cluster_probability(const UrnState& state, const ModelConfig& cfg);

struct PriorDraw {
  std::vector<std::size_t> classes;    // F_i
  std::vector<ClusterLabel> clusters;  // G_i; atom = creation order within the class
  UrnState state;                      // urn after the last draw
};

// n sequential urn draws: class first, then new or existing atom.
PriorDraw sample_partition(const ModelConfig& cfg, int n, std::uint64_t seed);

// Coefficient vectors beta ~ N(mu_l, Sigma_l) for each distinct cluster of a
// draw, indexed as atoms[l][atom].
std::vector<std::vector<Eigen::VectorXd>> sample_atom_coefficients(const PriorDraw& draw, const ModelConfig& cfg,
                                                                   std::uint64_t seed);

// `count` prior trajectories of class `cls` evaluated on `grid`; each entry
// holds one curve. Throws OutOfSupport for grid points outside the basis.
std::vector<Eigen::VectorXd> sample_prior_curves(const ModelConfig& cfg, std::size_t cls, int count,
                                                 std::span<const double> grid, std::uint64_t seed);

// E[theta(t)] under class cls: sum_m B_m(t) mu_m.
Eigen::VectorXd class_prior_mean_curve(const ModelConfig& cfg, std::size_t cls, std::span<const double> grid);

// E[f(t)] = sum_l alpha_l/alpha * class prior mean.
Eigen::VectorXd prior_mean_curve(const ModelConfig& cfg, std::span<const double> grid);

}  // namespace efdmp
