// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"

#include "efdmp/cavi.hpp"
#include "efdmp/error.hpp"
#include "efdmp/estimates.hpp"
#include "efdmp/io.hpp"
#include "efdmp/synth.hpp"

using namespace efdmp;
using namespace efdmp::testing;

namespace {

// L = 2 with H = (3, 3).
ModelConfig two_by_three() { return urn_config({3, 3}, 1.0, 1.0); }

std::vector<int> relabel(const std::vector<int>& labels, const std::vector<int>& map) {
  std::vector<int> out;
  for (int x : labels) out.push_back(map[static_cast<std::size_t>(x)]);
  return out;
}

}  // namespace

TEST_CASE("MAP assignment examples") {
  const ModelConfig cfg = two_by_three();
  const AtomLayout layout(cfg);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(3, 6);
  rho(0, layout.column({1, 2})) = 1.0;
  rho.row(1).setConstant(1.0 / 6.0);
  rho(2, layout.column({0, 0})) = 0.3;
  rho(2, layout.column({0, 1})) = 0.3;
  rho(2, layout.column({1, 0})) = 0.4;
  const MapAssignments m = map_assignments(rho, layout);
  CHECK(m.g_hat[0] == ClusterLabel{1, 2});
  CHECK(m.f_hat[0] == 1);
  CHECK(m.g_hat[1] == ClusterLabel{0, 0});
  CHECK(m.f_hat[1] == 0);
  CHECK(m.g_hat[2] == ClusterLabel{1, 0});
  CHECK(m.f_hat[2] == 0);
  CHECK(m.disagreements() == 1);
}

TEST_CASE("MAP assignments are invariant to positive row scaling") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const ModelConfig cfg = two_by_three();
  const AtomLayout layout(cfg);
  Eigen::MatrixXd rho(50, 6);
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    for (Eigen::Index k = 0; k < 6; ++k) rho(i, k) = ud(gen);
    rho.row(i) /= rho.row(i).sum();
  }
  Eigen::MatrixXd scaled = rho;
  for (Eigen::Index i = 0; i < rho.rows(); ++i) scaled.row(i) *= std::pow(2.0, static_cast<double>(i % 7) - 3.0);
  const MapAssignments a = map_assignments(rho, layout);
  const MapAssignments b = map_assignments(scaled, layout);
  CHECK(a.g_hat == b.g_hat);
  CHECK(a.f_hat == b.f_hat);
}

TEST_CASE("estimate_curve examples and linearity") {
  FunctionalDataset data({make_unit("a", {0, 1}, {0, 1})});
  ModelConfig cfg = make_config({make_class(BasisSpec{{Constant{}}}, 1), make_class(linear_basis(), 2)});
  Problem p(data, cfg);
  VariationalState s = prior_state(p);
  const std::vector<double> grid = {0.0, 0.3, 0.7, 1.0};
  CHECK(estimate_curve(s, cfg, {1, 0}, grid).isZero(0.0));
  s.atom_mean[0][0] << 2.0;
  const Eigen::VectorXd flat = estimate_curve(s, cfg, {0, 0}, grid);
  CHECK(flat == Eigen::VectorXd::Constant(4, 2.0));

  s.atom_mean[1][0] << 0.5, -1.5;
  s.atom_mean[1][1] << -2.0, 4.0;
  const Eigen::VectorXd u = estimate_curve(s, cfg, {1, 0}, grid);
  const Eigen::VectorXd v = estimate_curve(s, cfg, {1, 1}, grid);
  VariationalState t = s;
  t.atom_mean[1][0] = 3.0 * s.atom_mean[1][0] + s.atom_mean[1][1];
  CHECK((estimate_curve(t, cfg, {1, 0}, grid) - (3.0 * u + v)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contingency and permutation accuracy") {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 2};
  CHECK(permutation_accuracy(truth, truth) == 1.0);
  CHECK(permutation_accuracy(truth, relabel(truth, {7, 3, 5})) == 1.0);
  CHECK(permutation_accuracy(relabel(truth, {2, 9, 4}), truth) == 1.0);

  const Contingency c = contingency(truth, std::vector<int>{5, 5, 5, 1, 1, 1, 1});
  CHECK(c.true_labels == std::vector<int>{0, 1, 2});
  CHECK(c.est_labels == std::vector<int>{1, 5});
  CHECK(c.counts(0, 1) == 2);
  CHECK(c.counts(1, 0) == 1);
  CHECK(c.counts(2, 0) == 3);
  CHECK(c.counts.sum() == 7);
  CHECK(permutation_accuracy(truth, std::vector<int>{5, 5, 5, 1, 1, 1, 1}) == doctest::Approx(5.0 / 7.0));
  CHECK_THROWS_AS(contingency(truth, std::vector<int>{1, 2}), Error);
}

TEST_CASE("high-variance contingency table scores 0.88") {
  // Rows are the true functions, columns the four estimated clusters.
  const int table[4][4] = {{22, 1, 0, 2}, {3, 19, 1, 2}, {0, 2, 23, 0}, {1, 0, 0, 24}};
  std::vector<int> truth, est;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < table[r][c]; ++k) {
        truth.push_back(r);
        est.push_back(10 + c);
      }
  REQUIRE(truth.size() == 100);
  CHECK(permutation_accuracy(truth, est) == doctest::Approx(0.88).epsilon(1e-15));
  CHECK(permutation_accuracy_exhaustive(truth, est) == doctest::Approx(0.88).epsilon(1e-15));
}

TEST_CASE("Hungarian matches exhaustive search") {
  std::mt19937_64 gen(1234);
  for (int r = 0; r < 300; ++r) {
    const int kt = std::uniform_int_distribution<int>(1, 7)(gen);
    const int ke = std::uniform_int_distribution<int>(1, 8)(gen);
    const int n = std::uniform_int_distribution<int>(1, 60)(gen);
    std::vector<int> t(n), e(n);
    for (int i = 0; i < n; ++i) {
      t[i] = std::uniform_int_distribution<int>(0, kt - 1)(gen);
      // Correlate the labelings so matches matter.
      e[i] = std::bernoulli_distribution(0.6)(gen) ? t[i] % ke : std::uniform_int_distribution<int>(0, ke - 1)(gen);
    }
    CHECK(permutation_accuracy(t, e) == doctest::Approx(permutation_accuracy_exhaustive(t, e)).epsilon(1e-15));
  }
}

TEST_CASE("max weight assignment on a known matrix") {
  Eigen::MatrixXd w(3, 4);
  w << 1, 9, 0, 0, 8, 9, 0, 0, 0, 0, 0, 7;
  const std::vector<int> cols = max_weight_assignment(w);
  CHECK(cols == std::vector<int>{1, 0, 3});
  Eigen::MatrixXd tall(3, 1);
  tall << 1, 5, 2;
  const std::vector<int> one = max_weight_assignment(tall);
  CHECK(std::count(one.begin(), one.end(), -1) == 2);
  CHECK(one[1] == 0);
}

TEST_CASE("volume report") {
  const ModelConfig cfg = two_by_three();
  const AtomLayout layout(cfg);
  std::vector<Unit> units;
  std::mt19937_64 gen(2);
  for (int i = 0; i < 40; ++i) {
    units.push_back(Unit{"u" + std::to_string(i), {0.0, 1.0}, {0.0, 1.0},
                         static_cast<double>(std::uniform_int_distribution<int>(0, 100000)(gen))});
  }
  const FunctionalDataset data(units);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(40, 6);
  for (int i = 0; i < 40; ++i) rho(i, i % 5) = 1.0;
  VariationalState s;
  s.rho = rho;
  s.atom_mean.resize(2);
  for (auto& means : s.atom_mean) means.assign(3, Eigen::VectorXd::Zero(1));
  const ClusterReport report = build_report(s, cfg, data, std::vector<double>{0.0, 1.0});
  CHECK(report.clusters.size() == 5);
  int freq = 0;
  for (const auto& c : report.clusters) freq += c.frequency;
  CHECK(freq == 40);
  const std::vector<double> volumes = volume_report(report, data);
  CHECK(std::accumulate(volumes.begin(), volumes.end(), 0.0) == data.total_volume());

  std::vector<Unit> ones = units;
  for (auto& u : ones) u.volume = 1.0;
  const FunctionalDataset unit_volumes(ones);
  const std::vector<double> counted = volume_report(build_report(s, cfg, unit_volumes, std::vector<double>{0.0}), unit_volumes);
  for (std::size_t k = 0; k < counted.size(); ++k) CHECK(counted[k] == report.clusters[k].frequency);

  Eigen::MatrixXd single = Eigen::MatrixXd::Zero(40, 6);
  single.col(4).setOnes();
  s.rho = single;
  const ClusterReport one = build_report(s, cfg, data, std::vector<double>{0.0});
  REQUIRE(one.clusters.size() == 1);
  CHECK(volume_report(one, data)[0] == data.total_volume());

  std::vector<Unit> bare = units;
  bare[3].volume.reset();
  const FunctionalDataset partial(bare);
  CHECK_THROWS_AS(volume_report(build_report(s, cfg, partial, std::vector<double>{0.0}), partial), Error);
}

TEST_CASE("fitted small-variance curves track the truths") {
  const ModelConfig cfg = load_config(config_path("simulation.json"));
  const SimulatedData sim = generate(simulation_study(kSmallNoiseVariance, 5));
  FitOptions opts;
  opts.restarts = 10;
  opts.threads = 4;
  // Curves are compared on the raw scale, so fit the unstandardized series.
  const FitResult res = fit(sim.data, cfg, opts);
  const std::vector<double> grid = sim.data.grid_union();
  const ClusterReport report = build_report(res.state, cfg, sim.data, grid);
  REQUIRE(report.clusters.size() == 4);
  const auto truths = simulation_truths();
  const std::vector<int> est = flat_labels(report.assignments, AtomLayout(cfg));
  CHECK(permutation_accuracy(sim.labels, est) == 1.0);
  for (const auto& cluster : report.clusters) {
    // Members of a pure cluster share one truth.
    int truth = -1;
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
      if (report.assignments.g_hat[i] == cluster.label) truth = sim.labels[i];
    }
    double worst = 0.0;
    for (std::size_t s = 0; s < grid.size(); ++s) {
      worst = std::max(worst, std::abs(cluster.curve[static_cast<Eigen::Index>(s)] - truths[truth].f(grid[s])));
    }
    CAPTURE(truth);
    CHECK(worst < 0.1);
  }
}
