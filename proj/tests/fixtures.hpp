// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "efdmp/config.hpp"
#include "efdmp/dataset.hpp"
#include "efdmp/prior.hpp"

namespace efdmp::testing {

inline ClassConfig make_class(BasisSpec basis, int h_max, double alpha = 1.0, double c = 1.0, double prior_var = 10.0) {
  ClassConfig cls;
  cls.alpha = alpha;
  cls.c = c;
  cls.h_max = h_max;
  cls.basis = std::move(basis);
  const auto m = static_cast<Eigen::Index>(cls.basis.dimension());
  cls.prior_mean = Eigen::VectorXd::Zero(m);
  cls.prior_cov = prior_var * Eigen::MatrixXd::Identity(m, m);
  return cls;
}

inline BasisSpec linear_basis() { return BasisSpec{{Constant{}, Power{1}}}; }

inline ModelConfig make_config(std::vector<ClassConfig> classes, double a = 1.0, double b = 1.0) {
  ModelConfig cfg;
  cfg.classes = std::move(classes);
  cfg.a_sigma = a;
  cfg.b_sigma = b;
  return cfg;
}

// Classes with the given atom counts, all sharing alpha and c.
inline ModelConfig urn_config(const std::vector<int>& h, double alpha, double c) {
  std::vector<ClassConfig> classes;
  for (int hl : h) classes.push_back(make_class(BasisSpec{{Constant{}}}, hl, alpha, c));
  return make_config(std::move(classes));
}

inline Unit make_unit(std::string id, std::vector<double> grid, std::vector<double> values) {
  return Unit{std::move(id), std::move(grid), std::move(values), std::nullopt};
}

inline std::vector<double> unit_grid(int t) {
  std::vector<double> g(static_cast<std::size_t>(t));
  for (int s = 0; s < t; ++s) g[s] = static_cast<double>(s + 1) / t;
  return g;
}

// A random SPD matrix A A' + eps I.
inline Eigen::MatrixXd random_spd(std::mt19937_64& gen, Eigen::Index m, double eps = 0.5) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = nd(gen);
  return a * a.transpose() / static_cast<double>(m) + eps * Eigen::MatrixXd::Identity(m, m);
}

// Random urn state consistent with cfg: per-class counts in [0, 30] split
// into at most H_l clusters.
inline UrnState random_urn_state(std::mt19937_64& gen, const ModelConfig& cfg) {
  UrnState state = UrnState::empty(cfg.num_classes());
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const int k_max = cfg.classes[l].h_max;
    const int k = std::uniform_int_distribution<int>(0, std::min(k_max, 8))(gen);
    for (int j = 0; j < k; ++j) {
      const int size = std::uniform_int_distribution<int>(1, 6)(gen);
      state.clusters[l].push_back(UrnCluster{static_cast<std::size_t>(j), size});
      state.class_counts[l] += size;
    }
  }
  return state;
}

struct Instance {
  FunctionalDataset data;
  ModelConfig cfg;
};

// Small random problem: n <= 20 units, total H <= 6 atoms, mixed bases,
// optionally a fixed noise precision.
inline Instance random_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> pick_n(2, 20), pick_t(3, 9), pick_l(1, 3), pick_basis(0, 4);
  std::uniform_real_distribution<double> ud(0.2, 3.0);
  std::normal_distribution<double> nd;
  const int num_classes = pick_l(gen);
  int budget = 6;
  std::vector<ClassConfig> classes;
  for (int l = 0; l < num_classes; ++l) {
    const int room = budget - (num_classes - l - 1);
    const int h = std::uniform_int_distribution<int>(1, std::min(room, 3))(gen);
    budget -= h;
    BasisSpec basis;
    switch (pick_basis(gen)) {
      case 0: basis = BasisSpec{{Constant{}}}; break;
      case 1: basis = linear_basis(); break;
      case 2: basis = BasisSpec{{Constant{}, Cosine{6.283185307179586}, Sine{6.283185307179586}}}; break;
      case 3: basis = BasisSpec{{Constant{}, Power{2}, Power{4}}}; break;
      default: basis = BasisSpec{{BSplineBlock{3, {0.5}, 0.0, 1.0, 5}}}; break;
    }
    ClassConfig cls = make_class(std::move(basis), h, ud(gen), ud(gen), ud(gen));
    const auto m = static_cast<Eigen::Index>(cls.dimension());
    cls.prior_cov = random_spd(gen, m, 0.3);
    for (Eigen::Index k = 0; k < m; ++k) cls.prior_mean[k] = 0.5 * nd(gen);
    classes.push_back(std::move(cls));
  }
  ModelConfig cfg = make_config(std::move(classes), ud(gen), ud(gen));
  if (std::bernoulli_distribution(0.25)(gen)) cfg.noise_precision = ud(gen);

  const int n = pick_n(gen);
  std::vector<Unit> units;
  for (int i = 0; i < n; ++i) {
    const int t = pick_t(gen);
    const double slope = 2.0 * nd(gen), phase = nd(gen), scale = ud(gen);
    std::vector<double> grid = unit_grid(t), values(static_cast<std::size_t>(t));
    for (int s = 0; s < t; ++s) {
      values[s] = scale * (slope * grid[s] + std::sin(6.283185307179586 * grid[s] + phase)) + 0.3 * nd(gen);
    }
    units.push_back(make_unit("u" + std::to_string(i), std::move(grid), std::move(values)));
  }
  return {FunctionalDataset(std::move(units)), std::move(cfg)};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("efdmp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(EFDMP_CONFIG_DIR) / name;
}

}  // namespace efdmp::testing
