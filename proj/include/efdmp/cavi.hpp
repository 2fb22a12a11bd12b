// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "efdmp/basis.hpp"
#include "efdmp/config.hpp"
#include "efdmp/dataset.hpp"

namespace efdmp {

// Mean-field variational posterior
//   q(G) q(Pi) prod_l q(pi_l) prod_{l,h} q(beta_lh) q(sigma^-2)
// with categorical q(G_i) = rho_i, Dirichlet weights, Gaussian atoms and a
// Gamma noise precision.
struct VariationalState {
  Eigen::MatrixXd rho;                                 // n x H, AtomLayout column order
  Eigen::VectorXd class_dirichlet;                     // length L
  std::vector<Eigen::VectorXd> within_dirichlet;       // per class, length H_l
  std::vector<std::vector<Eigen::VectorXd>> atom_mean;  // [l][h], length M_l
  std::vector<std::vector<Eigen::MatrixXd>> atom_cov;   // [l][h], M_l x M_l
  double noise_shape = 1.0;
  double noise_rate = 1.0;
  std::vector<double> elbo_trace;  // one entry per completed sweep
};

// Data, configuration, per-class designs and the sufficient statistics every
// update reads: B_i'B_i, B_i'y_i, y_i'y_i, and the prior precision terms.
class Problem {
 public:
  Problem(FunctionalDataset data, ModelConfig cfg);

  const FunctionalDataset& data() const { return data_; }
  const ModelConfig& config() const { return cfg_; }
  const AtomLayout& layout() const { return layout_; }
  std::size_t num_units() const { return data_.size(); }

  const DesignMatrix& design(std::size_t cls) const { return designs_.at(cls); }
  const Eigen::MatrixXd& gram(std::size_t cls, std::size_t unit) const { return gram_[cls][unit]; }
  const Eigen::VectorXd& cross(std::size_t cls, std::size_t unit) const { return cross_[cls][unit]; }
  double sum_squares(std::size_t unit) const { return sum_squares_[unit]; }

  const Eigen::MatrixXd& prior_precision(std::size_t cls) const { return prior_precision_[cls]; }
  const Eigen::VectorXd& prior_shift(std::size_t cls) const { return prior_shift_[cls]; }  // Sigma^-1 mu
  double prior_log_det(std::size_t cls) const { return prior_log_det_[cls]; }

 private:
  FunctionalDataset data_;
  ModelConfig cfg_;
  AtomLayout layout_;
  std::vector<DesignMatrix> designs_;
  std::vector<std::vector<Eigen::MatrixXd>> gram_;
  std::vector<std::vector<Eigen::VectorXd>> cross_;
  std::vector<double> sum_squares_;
  std::vector<Eigen::MatrixXd> prior_precision_;
  std::vector<Eigen::VectorXd> prior_shift_;
  std::vector<double> prior_log_det_;
};

// E_q[sigma^-2] and E_q[log sigma^-2]; the known value when the config fixes
// the noise precision.
struct NoiseMoments {
  double mean = 1.0;
  double log_mean = 0.0;
};

NoiseMoments noise_moments(const VariationalState& state, const ModelConfig& cfg);

// E[(y - b'beta)^2] for beta ~ N(mean, cov): (y - b'mean)^2 + b' cov b.
double expected_sq_residual(double y, const Eigen::VectorXd& b, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov);

// Same quantity at observation s of a unit, for atom `label`.
double expected_sq_residual(const VariationalState& state, const Problem& problem, std::size_t unit,
                            std::size_t s, ClusterLabel label);

// Sum over a unit's observations, from the sufficient statistics.
double unit_expected_sq_residual(const VariationalState& state, const Problem& problem, std::size_t unit,
                                 ClusterLabel label);

// Coordinate updates, applied in place. Each is the exact optimum of its
// block given the others.
void update_responsibilities(VariationalState& state, const Problem& problem);  // q(G)
void update_class_weights(VariationalState& state, const Problem& problem);     // q(Pi)
void update_within_weights(VariationalState& state, const Problem& problem);    // q(pi_l)
void update_atoms(VariationalState& state, const Problem& problem);             // q(beta_lh)
void update_noise(VariationalState& state, const Problem& problem);             // q(sigma^-2)

// One full cycle of the five updates, in order. Does not touch elbo_trace.
void sweep(VariationalState& state, const Problem& problem);

// Additive pieces of the evidence lower bound: expected log joint terms
// followed by entropies of the variational factors.
struct ElboTerms {
  double likelihood = 0.0;  // E log p(y | G, beta, sigma)
  double assignment = 0.0;  // E log p(G | Pi, pi)
  double class_prior = 0.0;
  double within_prior = 0.0;
  double atom_prior = 0.0;
  double noise_prior = 0.0;
  double assignment_entropy = 0.0;
  double class_entropy = 0.0;
  double within_entropy = 0.0;
  double atom_entropy = 0.0;
  double noise_entropy = 0.0;

  double total() const;
};

ElboTerms elbo_terms(const VariationalState& state, const Problem& problem);

// Throws NonFiniteElbo when the bound is NaN or infinite.
double compute_elbo(const VariationalState& state, const Problem& problem);

enum class InitStrategy {
  // Per-unit Dirichlet(1, ..., 1) responsibilities; the remaining blocks are
  // then set by one pass of the weight, atom and noise updates.
  RandomSoft,
  // Atom means drawn from their class priors, everything else at the prior;
  // the first sweep assigns units to the drawn atoms.
  AssignPriorMeans,
};

// Every block at its prior value, responsibilities uniform.
VariationalState prior_state(const Problem& problem);

VariationalState initial_state(const Problem& problem, InitStrategy init, std::uint64_t seed);

struct FitOptions {
  int max_sweeps = 500;
  double rel_tol = 1e-6;
  int restarts = 20;
  std::uint64_t seed = 0;
  InitStrategy init = InitStrategy::RandomSoft;
  int threads = 1;  // restarts run concurrently; results do not depend on this
  // Called after every sweep; may be invoked from worker threads.
  std::function<void(int restart, int sweep, double elbo)> progress;
};

void validate_options(const FitOptions& opts);

// Runs sweeps until the relative ELBO change drops below rel_tol or
// max_sweeps is reached; appends to state.elbo_trace. Returns true when the
// tolerance was met.
bool run_cavi(VariationalState& state, const Problem& problem, int max_sweeps, double rel_tol,
              const std::function<void(int sweep, double elbo)>& progress = {});

struct RestartSummary {
  std::uint64_t seed = 0;
  std::vector<double> elbo_trace;
  bool converged = false;
};

struct FitResult {
  VariationalState state;   // highest final ELBO over restarts
  int best_restart = 0;     // ties go to the lowest index
  std::vector<RestartSummary> restarts;
  std::vector<std::string> warnings;
};

FitResult fit(const FunctionalDataset& data, const ModelConfig& cfg, const FitOptions& opts);

}  // namespace efdmp
