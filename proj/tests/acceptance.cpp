// Apache License, Version 2.0, refer to LICENSE.txt

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <iostream>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "cli_harness.hpp"
#include "fixtures.hpp"

#include "efdmp/cavi.hpp"
#include "efdmp/estimates.hpp"
#include "efdmp/io.hpp"
#include "efdmp/prior.hpp"
#include "efdmp/synth.hpp"

using namespace efdmp;
using namespace efdmp::testing;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr int kSeeds = 10;
constexpr int kSmallRequired = 9;
constexpr int kHighRequired = 8;
constexpr double kHighMinAccuracy = 0.80;
constexpr std::size_t kHighMinClusters = 4, kHighMaxClusters = 6;
constexpr int kFitRestarts = 20;
constexpr double kStudyBudgetSeconds = 120.0;
constexpr int kPairDraws = 100000;
constexpr double kSeMultiple = 3.0;
constexpr double kLimitTolerance = 1e-4;
constexpr int kUrnStates = 1000;
constexpr double kUrnSumTolerance = 1e-12;
constexpr int kPartitions = 10000;
constexpr int kElboInstances = 100;
constexpr double kElboSlack = 1e-8;
constexpr int kConjugateInstances = 20;
constexpr double kConjugateTolerance = 1e-8;
constexpr int kMomentInstances = 10;
constexpr int kMomentDraws = 1000000;
constexpr int kHarmonicDraws = 1000;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int hardware_threads() { return static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency()))); }

struct StudyRun {
  std::size_t occupied = 0;
  double accuracy = 0.0;
};

StudyRun run_study(double variance, std::uint64_t seed, const ModelConfig& cfg) {
  const SimulatedData sim = generate(simulation_study(variance, 1000 + seed));
  const FunctionalDataset data = standardize(sim.data);
  FitOptions opts;
  opts.restarts = kFitRestarts;
  opts.seed = seed;
  opts.threads = hardware_threads();
  const FitResult res = fit(data, cfg, opts);
  const ClusterReport rep = build_report(res.state, cfg, data, std::vector<double>{});
  return {rep.clusters.size(), permutation_accuracy(sim.labels, flat_labels(rep.assignments, AtomLayout(cfg)))};
}

void simulation_studies() {
  const ModelConfig cfg = load_config(config_path("simulation.json"));
  for (int scenario = 0; scenario < 2; ++scenario) {
    const bool small = scenario == 0;
    const auto start = std::chrono::steady_clock::now();
    int good = 0;
    std::string runs;
    for (int s = 0; s < kSeeds; ++s) {
      const StudyRun r = run_study(small ? kSmallNoiseVariance : kHighNoiseVariance, static_cast<std::uint64_t>(s), cfg);
      const bool ok = small ? (r.occupied == 4 && r.accuracy == 1.0)
                            : (r.accuracy >= kHighMinAccuracy && r.occupied >= kHighMinClusters &&
                               r.occupied <= kHighMaxClusters);
      good += ok ? 1 : 0;
      runs += fmt::format("{}{}/{:.2f}", s ? " " : "", r.occupied, r.accuracy);
    }
    const double elapsed = seconds_since(start);
    const int required = small ? kSmallRequired : kHighRequired;
    const bool ok = good >= required && elapsed < kStudyBudgetSeconds;
    report(ok, small ? "simulation study, small variance" : "simulation study, high variance",
           fmt::format("{}/{} seeds pass (need {}), clusters/accuracy = [{}], {:.1f}s (budget {}s)", good, kSeeds,
                       required, runs, elapsed, kStudyBudgetSeconds));
  }
}

void cocluster_oracle() {
  struct Case {
    std::vector<int> h;
    std::vector<double> alpha, c;
  };
  const std::vector<Case> cases = {
      {{1}, {1.0}, {1.0}},
      {{50}, {2.0}, {0.5}},
      {{5, 5}, {1.0, 1.0}, {1.0, 1.0}},
      {{1, 5, 50}, {0.5, 1.0, 2.0}, {1.0, 3.0, 0.7}},
      {{50, 1}, {3.0, 0.4}, {2.0, 1.0}},
  };
  bool ok = true;
  std::string detail;
  std::uint64_t base = 1;
  for (const Case& c : cases) {
    ModelConfig cfg = urn_config(c.h, 1.0, 1.0);
    for (std::size_t l = 0; l < c.h.size(); ++l) {
      cfg.classes[l].alpha = c.alpha[l];
      cfg.classes[l].c = c.c[l];
    }
    int hits = 0;
    for (int r = 0; r < kPairDraws; ++r) {
      const PriorDraw d = sample_partition(cfg, 2, base++);
      hits += d.clusters[0] == d.clusters[1] ? 1 : 0;
    }
    const double rate = static_cast<double>(hits) / kPairDraws;
    const double se = std::sqrt(rate * (1.0 - rate) / kPairDraws);
    const double exact = cocluster_probability(cfg);
    const double z = se > 0 ? std::abs(rate - exact) / se : (rate == exact ? 0.0 : INFINITY);
    ok = ok && z <= kSeMultiple;
    detail += fmt::format("L={} p={:.4f} mc={:.4f} z={:.2f}; ", c.h.size(), exact, rate, z);
  }
  ModelConfig huge = urn_config({1000000, 1000000, 1000000}, 1.0, 1.0);
  huge.classes[0].alpha = 0.5;
  huge.classes[2].c = 4.0;
  const double gap = std::abs(cocluster_probability(huge) - cocluster_limit(huge));
  ModelConfig two = urn_config({1000000, 1000000}, 1.0, 1.0);
  const double gap_third = std::abs(cocluster_probability(two) - 1.0 / 3.0);
  ok = ok && gap < kLimitTolerance && gap_third < kLimitTolerance && cocluster_limit(huge) > 0.0;
  report(ok, "co-clustering oracle",
         fmt::format("{}H=1e6 gap to limit {:.2e} and {:.2e} (tol {:.0e}), {} draws per config, {} SE", detail, gap,
                     gap_third, kLimitTolerance, kPairDraws, kSeMultiple));
}

void urn_exactness() {
  std::mt19937_64 gen(314);
  std::uniform_real_distribution<double> ud(0.05, 6.0);
  double worst = 0.0;
  int identity_misses = 0;
  for (int r = 0; r < kUrnStates; ++r) {
    std::vector<int> hs;
    const int num_classes = std::uniform_int_distribution<int>(1, 5)(gen);
    for (int l = 0; l < num_classes; ++l) hs.push_back(std::uniform_int_distribution<int>(1, 20)(gen));
    ModelConfig cfg = urn_config(hs, 1.0, 1.0);
    for (auto& c : cfg.classes) {
      c.alpha = ud(gen);
      c.c = ud(gen);
    }
    const UrnState state = random_urn_state(gen, cfg);
    const auto cp = class_predictive(state, cfg);
    worst = std::max(worst, std::abs(std::accumulate(cp.begin(), cp.end(), 0.0) - 1.0));
    double factored = 0.0;
    for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
      const auto w = within_class_predictive(state, l, cfg);
      worst = std::max(worst, std::abs(std::accumulate(w.existing.begin(), w.existing.end(), w.new_prob) - 1.0));
      factored += cp[l] * w.new_prob;
    }
    identity_misses += new_cluster_probability(state, cfg) == factored ? 0 : 1;
  }
  int bound_violations = 0;
  for (int r = 0; r < kPartitions; ++r) {
    const ModelConfig cfg = urn_config({1 + r % 3, 2 + r % 5, 7}, 0.5 + (r % 4), 0.3 + (r % 6));
    const PriorDraw d = sample_partition(cfg, 40, 5000000 + static_cast<std::uint64_t>(r));
    for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
      if (d.state.distinct(l) > static_cast<std::size_t>(cfg.classes[l].h_max)) ++bound_violations;
    }
  }
  report(worst <= kUrnSumTolerance && identity_misses == 0 && bound_violations == 0, "urn exactness",
         fmt::format("max |sum - 1| = {:.1e} over {} states (tol {:.0e}), factorization mismatches {}, "
                     "k > H in {} of {} partitions",
                     worst, kUrnStates, kUrnSumTolerance, identity_misses, bound_violations, kPartitions));
}

void elbo_monotonicity() {
  std::mt19937_64 gen(2718);
  int violations = 0, sweeps = 0;
  double worst = 0.0;
  for (int r = 0; r < kElboInstances; ++r) {
    const Instance inst = random_instance(gen);
    const Problem p(inst.data, inst.cfg);
    for (InitStrategy init : {InitStrategy::RandomSoft, InitStrategy::AssignPriorMeans}) {
      VariationalState s = initial_state(p, init, static_cast<std::uint64_t>(r));
      run_cavi(s, p, 300, 1e-12);
      for (std::size_t k = 1; k < s.elbo_trace.size(); ++k) {
        ++sweeps;
        const double drop = s.elbo_trace[k - 1] - s.elbo_trace[k];
        const double rel = drop / std::abs(s.elbo_trace[k - 1]);
        worst = std::max(worst, rel);
        if (drop > kElboSlack * std::abs(s.elbo_trace[k - 1])) ++violations;
      }
    }
  }
  report(violations == 0, "ELBO monotonicity",
         fmt::format("{} violations over {} sweeps on {} instances (n<=20, H<=6), worst relative drop {:.1e} "
                     "(slack {:.0e})",
                     violations, sweeps, kElboInstances, std::max(worst, 0.0), kElboSlack));
}

void conjugate_oracle() {
  std::mt19937_64 gen(1618);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  double worst = 0.0;
  for (int r = 0; r < kConjugateInstances; ++r) {
    const BasisSpec basis{{Constant{}, Power{1}, Sine{4.0}}};
    ModelConfig cfg = make_config({make_class(basis, 2), make_class(BasisSpec{{Constant{}}}, 1)});
    cfg.classes[0].prior_cov = random_spd(gen, 3);
    for (Eigen::Index k = 0; k < 3; ++k) cfg.classes[0].prior_mean[k] = nd(gen);
    cfg.noise_precision = 0.2 + 3.0 * ut(gen);
    std::vector<double> grid(5);
    for (double& t : grid) t = ut(gen);
    std::sort(grid.begin(), grid.end());
    std::vector<double> y(5);
    for (double& v : y) v = nd(gen);
    const Problem p(FunctionalDataset({make_unit("a", grid, y), make_unit("b", {0.1, 0.2}, {3.0, 4.0})}), cfg);
    VariationalState s = prior_state(p);
    s.rho.setZero();
    s.rho(0, 0) = 1.0;
    s.rho(1, 2) = 1.0;
    update_atoms(s, p);

    Eigen::MatrixXd x(5, 3);
    for (int k = 0; k < 5; ++k) x.row(k) << 1.0, grid[k], std::sin(4.0 * grid[k]);
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), 5);
    const double tau = *cfg.noise_precision;
    const Eigen::MatrixXd prior_prec = cfg.classes[0].prior_cov.inverse();
    const Eigen::MatrixXd cov = (tau * x.transpose() * x + prior_prec).inverse();
    const Eigen::VectorXd mean = cov * (tau * x.transpose() * yv + prior_prec * cfg.classes[0].prior_mean);
    worst = std::max(worst, (s.atom_mean[0][0] - mean).cwiseAbs().maxCoeff() / mean.cwiseAbs().maxCoeff());
    worst = std::max(worst, (s.atom_cov[0][0] - cov).cwiseAbs().maxCoeff() / cov.cwiseAbs().maxCoeff());
  }
  report(worst < kConjugateTolerance, "conjugate oracle",
         fmt::format("max relative error {:.1e} over {} five-point instances (tol {:.0e})", worst, kConjugateInstances,
                     kConjugateTolerance));
}

void moment_oracle() {
  std::mt19937_64 gen(4242);
  std::normal_distribution<double> nd;
  double worst_z = 0.0;
  for (int r = 0; r < kMomentInstances; ++r) {
    const Eigen::Index m = 1 + r % 4;
    const Eigen::MatrixXd cov = random_spd(gen, m, 0.2);
    Eigen::VectorXd mean(m), b(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      mean[k] = nd(gen);
      b[k] = nd(gen);
    }
    const double y = 2.0 * nd(gen);
    const Eigen::MatrixXd lower = cov.llt().matrixL();
    double sum = 0.0, sq = 0.0;
    Eigen::VectorXd z(m);
    for (int k = 0; k < kMomentDraws; ++k) {
      for (Eigen::Index j = 0; j < m; ++j) z[j] = nd(gen);
      const double res = y - b.dot(mean + lower * z);
      sum += res * res;
      sq += res * res * res * res;
    }
    const double mc = sum / kMomentDraws;
    const double se = std::sqrt((sq / kMomentDraws - mc * mc) / kMomentDraws);
    worst_z = std::max(worst_z, std::abs(mc - expected_sq_residual(y, b, mean, cov)) / se);
  }
  report(worst_z <= kSeMultiple, "moment oracle",
         fmt::format("max |mc - exact| = {:.2f} SE over {} instances of {} draws (limit {} SE)", worst_z,
                     kMomentInstances, kMomentDraws, kSeMultiple));
}

void determinism() {
  const fs::path dir = scratch_dir("acceptance_determinism");
  bool ok = run_cli({"simulate", "--out", (dir / "sim").string(), "--seed", "21", "--scenario", "high"}).code == 0;
  const std::string data = (dir / "sim" / "data.csv").string();
  const std::string cfg = config_path("simulation.json").string();
  const auto fit_into = [&](const std::string& name, int threads) {
    return run_cli({"fit", "--config", cfg, "--data", data, "--out", (dir / name).string(), "--restarts", "4", "--seed",
                    "7", "--threads", std::to_string(threads)})
               .code == 0;
  };
  ok = ok && fit_into("serial_a", 1) && fit_into("serial_b", 1) && fit_into("parallel_a", 4) &&
       fit_into("parallel_b", 4);
  const std::string d1 = ok ? first_difference(dir / "serial_a", dir / "serial_b") : "<run failed>";
  const std::string d2 = ok ? first_difference(dir / "parallel_a", dir / "parallel_b") : "<run failed>";
  const std::string d3 = ok ? first_difference(dir / "serial_a", dir / "parallel_a", true) : "<run failed>";
  report(d1.empty() && d2.empty() && d3.empty(), "determinism",
         fmt::format("serial rerun [{}], 4-thread rerun [{}], serial vs 4-thread results [{}] "
                     "(empty = identical; manifest timings excluded, thread count recorded in the manifest)",
                     d1, d2, d3));
}

// Magnitudes of DFT bins 1 and 2 of a series.
std::pair<double, double> low_bins(const Eigen::VectorXd& x) {
  const auto n = static_cast<double>(x.size());
  std::complex<double> b1, b2;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / n;
    b1 += x[k] * std::polar(1.0, angle);
    b2 += x[k] * std::polar(1.0, 2.0 * angle);
  }
  return {std::abs(b1), std::abs(b2)};
}

void weekly_properties() {
  const BasisSpec p1 = preset_p1(1.0, 55.0), p2 = preset_p2(1.0, 55.0);
  std::vector<double> weeks(55);
  std::iota(weeks.begin(), weeks.end(), 1.0);
  std::string detail = fmt::format("dims {}/{}; ", p1.dimension(), p2.dimension());
  bool ok = p1.dimension() == 6 && p2.dimension() == 6;
  for (int which = 0; which < 2; ++which) {
    const ModelConfig cfg = make_config({make_class(which == 0 ? p1 : p2, 1, 1.0, 1.0, 1.0)});
    const auto curves = sample_prior_curves(cfg, 0, kHarmonicDraws, weeks, 77 + which);
    double m1 = 0.0, m2 = 0.0;
    for (const auto& c : curves) {
      const auto [a, b] = low_bins(c);
      m1 += a / kHarmonicDraws;
      m2 += b / kHarmonicDraws;
    }
    const bool ordered = which == 0 ? m1 > m2 : m2 > m1;
    ok = ok && ordered;
    detail += fmt::format("P{} mean |bin1|={:.2f} |bin2|={:.2f}; ", which + 1, m1, m2);
  }

  // Integer volumes make every partial sum exact.
  const ModelConfig cfg = load_config(config_path("simulation.json"));
  const SimulatedData sim = generate(simulation_study(kHighNoiseVariance, 5));
  std::mt19937_64 gen(6);
  std::vector<Unit> units(sim.data.units().begin(), sim.data.units().end());
  for (auto& u : units) u.volume = static_cast<double>(std::uniform_int_distribution<int>(0, 5000000)(gen));
  const FunctionalDataset data = standardize(FunctionalDataset(units));
  FitOptions opts;
  opts.restarts = 4;
  opts.threads = hardware_threads();
  const FitResult res = fit(data, cfg, opts);
  const ClusterReport rep = build_report(res.state, cfg, data, std::vector<double>{});
  const std::vector<double> volumes = volume_report(rep, data);
  const double total = std::accumulate(volumes.begin(), volumes.end(), 0.0);
  ok = ok && total == data.total_volume();
  detail += fmt::format("volume total {} vs dataset {} over {} clusters", format_double(total),
                        format_double(data.total_volume()), volumes.size());
  report(ok, "weekly presets and volumes", detail + fmt::format(" ({} draws per preset)", kHarmonicDraws));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  const std::pair<const char*, void (*)()> criteria[] = {
      {"simulation studies", simulation_studies}, {"co-clustering", cocluster_oracle},
      {"urn", urn_exactness},                     {"elbo", elbo_monotonicity},
      {"conjugate", conjugate_oracle},            {"moments", moment_oracle},
      {"determinism", determinism},               {"weekly", weekly_properties},
  };
  for (const auto& [name, body] : criteria) {
    try {
      body();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  }
  std::cout << fmt::format("{} criteria failed, {:.1f}s total", failures, seconds_since(start)) << std::endl;
  return failures;
}
