// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/prior.hpp"

#include <numeric>

#include <fmt/format.h>

#include "efdmp/error.hpp"
#include "efdmp/random.hpp"

namespace efdmp {

UrnState UrnState::empty(std::size_t num_classes) {
  UrnState state;
  state.class_counts.assign(num_classes, 0);
  state.clusters.resize(num_classes);
  return state;
}

int UrnState::total() const { return std::accumulate(class_counts.begin(), class_counts.end(), 0); }

void check_state(const UrnState& state, const ModelConfig& cfg) {
  const std::size_t L = cfg.num_classes();
  if (state.class_counts.size() != L || state.clusters.size() != L) {
    throw Error(ErrorKind::InconsistentState,
                fmt::format("urn state has {} classes, config has {}", state.class_counts.size(), L));
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (state.class_counts[l] < 0) {
      throw Error(ErrorKind::InconsistentState, fmt::format("class {}: negative count", l + 1));
    }
    if (state.clusters[l].size() > static_cast<std::size_t>(cfg.classes[l].h_max)) {
      throw Error(ErrorKind::InconsistentState,
                  fmt::format("class {}: {} distinct atoms exceed H = {}", l + 1, state.clusters[l].size(),
                              cfg.classes[l].h_max));
    }
    int sum = 0;
    for (const UrnCluster& c : state.clusters[l]) {
      if (c.size <= 0) throw Error(ErrorKind::InconsistentState, fmt::format("class {}: empty cluster", l + 1));
      sum += c.size;
    }
    if (sum != state.class_counts[l]) {
      throw Error(ErrorKind::InconsistentState,
                  fmt::format("class {}: cluster sizes sum to {} but n_l = {}", l + 1, sum, state.class_counts[l]));
    }
  }
}

double cocluster_probability(const ModelConfig& cfg) {
  const double alpha = cfg.alpha_total();
  double total = 0.0;
  for (const ClassConfig& cls : cfg.classes) {
    const double h = cls.h_max;
    total += cls.alpha * (cls.alpha + 1.0) / (alpha * (alpha + 1.0)) * (cls.c + h) / (cls.c * h + h);
  }
  return total;
}

double cocluster_limit(const ModelConfig& cfg) {
  const double alpha = cfg.alpha_total();
  double total = 0.0;
  for (const ClassConfig& cls : cfg.classes) {
    total += cls.alpha * (cls.alpha + 1.0) / (alpha * (alpha + 1.0)) / (1.0 + cls.c);
  }
  return total;
}

namespace {

// The two urn factors, shared so that the factorized and summed new-cluster
// probabilities agree bit for bit.
double class_factor(const UrnState& state, std::size_t l, double alpha, int n, const ModelConfig& cfg) {
  return (cfg.classes[l].alpha + state.class_counts[l]) / (alpha + n);
}

double new_factor(const UrnState& state, std::size_t l, const ModelConfig& cfg) {
  const ClassConfig& cls = cfg.classes[l];
  const double k = static_cast<double>(state.clusters[l].size());
  return (1.0 - k / cls.h_max) * cls.c / (cls.c + state.class_counts[l]);
}

}  // namespace

std::vector<double> class_predictive(const UrnState& state, const ModelConfig& cfg) {
  check_state(state, cfg);
  const double alpha = cfg.alpha_total();
  const int n = state.total();
  std::vector<double> probs(cfg.num_classes());
  for (std::size_t l = 0; l < probs.size(); ++l) probs[l] = class_factor(state, l, alpha, n, cfg);
  return probs;
}

WithinClassPredictive within_class_predictive(const UrnState& state, std::size_t cls, const ModelConfig& cfg) {
  check_state(state, cfg);
  if (cls >= cfg.num_classes()) {
    throw Error(ErrorKind::InconsistentState, fmt::format("class index {} out of range", cls + 1));
  }
  const ClassConfig& c = cfg.classes[cls];
  WithinClassPredictive out;
  out.new_prob = new_factor(state, cls, cfg);
  const double denom = c.c + state.class_counts[cls];
  for (const UrnCluster& cluster : state.clusters[cls]) {
    out.existing.push_back((cluster.size + c.c / c.h_max) / denom);
  }
  return out;
}

double new_cluster_probability(const UrnState& state, const ModelConfig& cfg) {
  check_state(state, cfg);
  const double alpha = cfg.alpha_total();
  const int n = state.total();
  double total = 0.0;
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    total += class_factor(state, l, alpha, n, cfg) * new_factor(state, l, cfg);
  }
  return total;
}

PriorDraw sample_partition(const ModelConfig& cfg, int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidConfig, "sample_partition needs n >= 1");
  Rng rng(seed);
  PriorDraw draw;
  draw.state = UrnState::empty(cfg.num_classes());
  draw.classes.reserve(n);
  draw.clusters.reserve(n);
  std::vector<double> weights;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> class_probs = class_predictive(draw.state, cfg);
    const std::size_t l = rng.categorical(class_probs);
    const WithinClassPredictive within = within_class_predictive(draw.state, l, cfg);
    weights.assign(within.existing.begin(), within.existing.end());
    weights.push_back(within.new_prob);
    const std::size_t pick = rng.categorical(weights);
    auto& clusters = draw.state.clusters[l];
    if (pick == clusters.size()) clusters.push_back(UrnCluster{clusters.size(), 0});
    clusters[pick].size += 1;
    draw.state.class_counts[l] += 1;
    draw.classes.push_back(l);
    draw.clusters.push_back(ClusterLabel{l, clusters[pick].atom});
  }
  return draw;
}

namespace {

Eigen::MatrixXd prior_factor(const ClassConfig& cls) {
  Eigen::LLT<Eigen::MatrixXd> llt(cls.prior_cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "prior_cov is not positive definite");
  }
  return llt.matrixL();
}

Eigen::VectorXd draw_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& lower, Rng& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index m = 0; m < z.size(); ++m) z[m] = rng.normal();
  return mean + lower * z;
}

Eigen::MatrixXd grid_design(const BasisSpec& spec, std::span<const double> grid) {
  Eigen::MatrixXd design(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(spec.dimension()));
  for (std::size_t s = 0; s < grid.size(); ++s) {
    design.row(static_cast<Eigen::Index>(s)) = evaluate_basis(spec, grid[s]).transpose();
  }
  return design;
}

}  // namespace

std::vector<std::vector<Eigen::VectorXd>> sample_atom_coefficients(const PriorDraw& draw, const ModelConfig& cfg,
                                                                   std::uint64_t seed) {
  check_state(draw.state, cfg);
  Rng rng(seed);
  std::vector<std::vector<Eigen::VectorXd>> atoms(cfg.num_classes());
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const Eigen::MatrixXd lower = prior_factor(cfg.classes[l]);
    for (std::size_t j = 0; j < draw.state.clusters[l].size(); ++j) {
      atoms[l].push_back(draw_gaussian(cfg.classes[l].prior_mean, lower, rng));
    }
  }
  return atoms;
}

std::vector<Eigen::VectorXd> sample_prior_curves(const ModelConfig& cfg, std::size_t cls, int count,
                                                 std::span<const double> grid, std::uint64_t seed) {
  if (cls >= cfg.num_classes()) {
    throw Error(ErrorKind::InvalidConfig, fmt::format("class index {} out of range", cls + 1));
  }
  const ClassConfig& c = cfg.classes[cls];
  const Eigen::MatrixXd design = grid_design(c.basis, grid);
  const Eigen::MatrixXd lower = prior_factor(c);
  Rng rng(seed);
  std::vector<Eigen::VectorXd> curves;
  curves.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) curves.push_back(design * draw_gaussian(c.prior_mean, lower, rng));
  return curves;
}

Eigen::VectorXd class_prior_mean_curve(const ModelConfig& cfg, std::size_t cls, std::span<const double> grid) {
  const ClassConfig& c = cfg.classes.at(cls);
  return grid_design(c.basis, grid) * c.prior_mean;
}

Eigen::VectorXd prior_mean_curve(const ModelConfig& cfg, std::span<const double> grid) {
  const double alpha = cfg.alpha_total();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    total += cfg.classes[l].alpha / alpha * class_prior_mean_curve(cfg, l, grid);
  }
  return total;
}

}  // namespace efdmp
