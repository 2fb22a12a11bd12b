// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/cavi.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "efdmp/error.hpp"
#include "efdmp/random.hpp"

namespace efdmp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr double kRhoFloor = 1e-12;

double digamma(double x) { return boost::math::digamma(x); }
double lgamma(double x) { return boost::math::lgamma(x); }

// E[log w_k] under Dirichlet(params).
Eigen::VectorXd dirichlet_log_mean(const Eigen::VectorXd& params) {
  const double total = digamma(params.sum());
  Eigen::VectorXd out(params.size());
  for (Eigen::Index k = 0; k < params.size(); ++k) out[k] = digamma(params[k]) - total;
  return out;
}

double log_beta(const Eigen::VectorXd& params) {
  double out = -lgamma(params.sum());
  for (Eigen::Index k = 0; k < params.size(); ++k) out += lgamma(params[k]);
  return out;
}

double dirichlet_entropy(const Eigen::VectorXd& params) {
  const double total = params.sum();
  double out = log_beta(params) + (total - static_cast<double>(params.size())) * digamma(total);
  for (Eigen::Index k = 0; k < params.size(); ++k) out -= (params[k] - 1.0) * digamma(params[k]);
  return out;
}

// E log Dirichlet(w | prior) under q with E[log w] = log_mean.
double dirichlet_cross(const Eigen::VectorXd& prior, const Eigen::VectorXd& log_mean) {
  return -log_beta(prior) + (prior.array() - 1.0).matrix().dot(log_mean);
}

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularSystem, "covariance is not positive definite");
  }
  const Eigen::MatrixXd& factor = llt.matrixLLT();
  double out = 0.0;
  for (Eigen::Index k = 0; k < factor.rows(); ++k) out += 2.0 * std::log(factor(k, k));
  return out;
}

// Within-class prior masses c_l / H_l for every atom of the class.
Eigen::VectorXd within_prior(const ClassConfig& cls) {
  return Eigen::VectorXd::Constant(cls.h_max, cls.c / cls.h_max);
}

Eigen::VectorXd class_prior(const ModelConfig& cfg) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(cfg.num_classes()));
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) out[static_cast<Eigen::Index>(l)] = cfg.classes[l].alpha;
  return out;
}

// Expected squared residual summed over every unit (rows) and atom (columns).
Eigen::MatrixXd residual_table(const VariationalState& state, const Problem& problem) {
  const AtomLayout& layout = problem.layout();
  Eigen::MatrixXd table(static_cast<Eigen::Index>(problem.num_units()), static_cast<Eigen::Index>(layout.total()));
  for (std::size_t i = 0; i < problem.num_units(); ++i) {
    for (std::size_t col = 0; col < layout.total(); ++col) {
      table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
          unit_expected_sq_residual(state, problem, i, layout.label(col));
    }
  }
  return table;
}

}  // namespace

Problem::Problem(FunctionalDataset data, ModelConfig cfg)
    : data_(std::move(data)), cfg_(std::move(cfg)), layout_((validate_config(cfg_), cfg_)) {
  if (data_.empty()) throw Error(ErrorKind::InvalidData, "dataset has no units");
  const std::size_t n = data_.size();
  sum_squares_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& values = data_.unit(i).values;
    sum_squares_[i] = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))
                          .squaredNorm();
  }
  for (std::size_t l = 0; l < cfg_.num_classes(); ++l) {
    const ClassConfig& cls = cfg_.classes[l];
    DesignMatrix design = build_design(cls.basis, data_);
    std::vector<Eigen::MatrixXd> grams(n);
    std::vector<Eigen::VectorXd> crosses(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& values = data_.unit(i).values;
      const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
      const Eigen::MatrixXd& b = design.blocks[i];
      grams[i] = b.transpose() * b;
      crosses[i] = b.transpose() * y;
    }
    designs_.push_back(std::move(design));
    gram_.push_back(std::move(grams));
    cross_.push_back(std::move(crosses));

    Eigen::LLT<Eigen::MatrixXd> llt(cls.prior_cov);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(cls.prior_cov.rows(), cls.prior_cov.cols());
    Eigen::MatrixXd precision = llt.solve(identity);
    precision = 0.5 * (precision + precision.transpose()).eval();
    prior_shift_.push_back(llt.solve(cls.prior_mean));
    prior_precision_.push_back(std::move(precision));
    prior_log_det_.push_back(log_det_spd(cls.prior_cov));
  }
}

NoiseMoments noise_moments(const VariationalState& state, const ModelConfig& cfg) {
  if (cfg.noise_precision) return {*cfg.noise_precision, std::log(*cfg.noise_precision)};
  return {state.noise_shape / state.noise_rate, digamma(state.noise_shape) - std::log(state.noise_rate)};
}

double expected_sq_residual(double y, const Eigen::VectorXd& b, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
  const double r = y - b.dot(mean);
  return r * r + b.dot(cov * b);
}

double expected_sq_residual(const VariationalState& state, const Problem& problem, std::size_t unit,
                            std::size_t s, ClusterLabel label) {
  const Eigen::VectorXd b =
      problem.design(label.cls).blocks.at(unit).row(static_cast<Eigen::Index>(s)).transpose();
  return expected_sq_residual(problem.data().unit(unit).values.at(s), b, state.atom_mean[label.cls][label.atom],
                              state.atom_cov[label.cls][label.atom]);
}

double unit_expected_sq_residual(const VariationalState& state, const Problem& problem, std::size_t unit,
                                 ClusterLabel label) {
  const Eigen::VectorXd& mean = state.atom_mean[label.cls][label.atom];
  const Eigen::MatrixXd& cov = state.atom_cov[label.cls][label.atom];
  const Eigen::MatrixXd& gram = problem.gram(label.cls, unit);
  const double fit = problem.sum_squares(unit) - 2.0 * mean.dot(problem.cross(label.cls, unit)) +
                     mean.dot(gram * mean);
  const double spread = (gram.array() * cov.array()).sum();  // tr(G S), both symmetric
  return std::max(0.0, fit) + spread;
}

void update_responsibilities(VariationalState& state, const Problem& problem) {
  const AtomLayout& layout = problem.layout();
  const ModelConfig& cfg = problem.config();
  const double precision = noise_moments(state, cfg).mean;
  const Eigen::VectorXd log_class = dirichlet_log_mean(state.class_dirichlet);
  Eigen::VectorXd log_prior(static_cast<Eigen::Index>(layout.total()));
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const Eigen::VectorXd log_within = dirichlet_log_mean(state.within_dirichlet[l]);
    for (std::size_t h = 0; h < layout.atoms_in(l); ++h) {
      log_prior[static_cast<Eigen::Index>(layout.offset(l) + h)] =
          log_class[static_cast<Eigen::Index>(l)] + log_within[static_cast<Eigen::Index>(h)];
    }
  }

  const Eigen::MatrixXd residuals = residual_table(state, problem);
  const auto n = static_cast<Eigen::Index>(problem.num_units());
  state.rho.resize(n, static_cast<Eigen::Index>(layout.total()));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd log_weight = log_prior - 0.5 * precision * residuals.row(i).transpose();
    if (!log_weight.allFinite()) {
      throw Error(ErrorKind::NonFiniteLogWeight,
                  fmt::format("unit '{}' has a non-finite assignment log weight", problem.data().unit(i).id));
    }
    const double top = log_weight.maxCoeff();
    Eigen::VectorXd weight = (log_weight.array() - top).exp().matrix();
    weight /= weight.sum();
    for (Eigen::Index k = 0; k < weight.size(); ++k) {
      if (weight[k] < kRhoFloor) weight[k] = 0.0;
    }
    weight /= weight.sum();
    state.rho.row(i) = weight.transpose();
  }
}

void update_class_weights(VariationalState& state, const Problem& problem) {
  const AtomLayout& layout = problem.layout();
  const ModelConfig& cfg = problem.config();
  state.class_dirichlet.resize(static_cast<Eigen::Index>(cfg.num_classes()));
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const double mass =
        state.rho.middleCols(static_cast<Eigen::Index>(layout.offset(l)), static_cast<Eigen::Index>(layout.atoms_in(l)))
            .sum();
    state.class_dirichlet[static_cast<Eigen::Index>(l)] = cfg.classes[l].alpha + mass;
  }
}

void update_within_weights(VariationalState& state, const Problem& problem) {
  const AtomLayout& layout = problem.layout();
  const ModelConfig& cfg = problem.config();
  state.within_dirichlet.resize(cfg.num_classes());
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const ClassConfig& cls = cfg.classes[l];
    Eigen::VectorXd params(cls.h_max);
    for (int h = 0; h < cls.h_max; ++h) {
      params[h] = cls.c / cls.h_max + state.rho.col(static_cast<Eigen::Index>(layout.offset(l)) + h).sum();
    }
    state.within_dirichlet[l] = std::move(params);
  }
}

void update_atoms(VariationalState& state, const Problem& problem) {
  const AtomLayout& layout = problem.layout();
  const ModelConfig& cfg = problem.config();
  const double precision = noise_moments(state, cfg).mean;
  state.atom_mean.resize(cfg.num_classes());
  state.atom_cov.resize(cfg.num_classes());
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const auto dim = static_cast<Eigen::Index>(cfg.classes[l].dimension());
    state.atom_mean[l].resize(layout.atoms_in(l));
    state.atom_cov[l].resize(layout.atoms_in(l));
    for (std::size_t h = 0; h < layout.atoms_in(l); ++h) {
      const auto col = static_cast<Eigen::Index>(layout.offset(l) + h);
      Eigen::MatrixXd system = problem.prior_precision(l);
      Eigen::VectorXd rhs = problem.prior_shift(l);
      for (std::size_t i = 0; i < problem.num_units(); ++i) {
        const double weight = precision * state.rho(static_cast<Eigen::Index>(i), col);
        if (weight == 0.0) continue;
        system += weight * problem.gram(l, i);
        rhs += weight * problem.cross(l, i);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(system);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::SingularSystem, fmt::format("atom ({}, {}) precision is not positive definite", l + 1, h + 1));
      }
      Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
      state.atom_cov[l][h] = 0.5 * (cov + cov.transpose());
      state.atom_mean[l][h] = llt.solve(rhs);
    }
  }
}

void update_noise(VariationalState& state, const Problem& problem) {
  if (problem.config().noise_precision) return;
  const AtomLayout& layout = problem.layout();
  double weighted = 0.0;
  for (std::size_t i = 0; i < problem.num_units(); ++i) {
    for (std::size_t col = 0; col < layout.total(); ++col) {
      const double r = state.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col));
      if (r == 0.0) continue;
      weighted += r * unit_expected_sq_residual(state, problem, i, layout.label(col));
    }
  }
  state.noise_shape = problem.config().a_sigma + 0.5 * static_cast<double>(problem.data().total_points());
  state.noise_rate = problem.config().b_sigma + 0.5 * weighted;
}

void sweep(VariationalState& state, const Problem& problem) {
  update_responsibilities(state, problem);
  update_class_weights(state, problem);
  update_within_weights(state, problem);
  update_atoms(state, problem);
  update_noise(state, problem);
}

double ElboTerms::total() const {
  return likelihood + assignment + class_prior + within_prior + atom_prior + noise_prior + assignment_entropy +
         class_entropy + within_entropy + atom_entropy + noise_entropy;
}

ElboTerms elbo_terms(const VariationalState& state, const Problem& problem) {
  const AtomLayout& layout = problem.layout();
  const ModelConfig& cfg = problem.config();
  const NoiseMoments noise = noise_moments(state, cfg);
  const Eigen::MatrixXd residuals = residual_table(state, problem);
  const Eigen::VectorXd log_class = dirichlet_log_mean(state.class_dirichlet);

  ElboTerms terms;
  for (std::size_t i = 0; i < problem.num_units(); ++i) {
    const double count = static_cast<double>(problem.data().unit(i).values.size());
    terms.likelihood += 0.5 * count * (noise.log_mean - kLog2Pi);
  }
  double weighted = 0.0;
  for (Eigen::Index i = 0; i < state.rho.rows(); ++i) {
    for (Eigen::Index col = 0; col < state.rho.cols(); ++col) {
      const double r = state.rho(i, col);
      if (r == 0.0) continue;
      weighted += r * residuals(i, col);
      terms.assignment_entropy -= r * std::log(r);
    }
  }
  terms.likelihood -= 0.5 * noise.mean * weighted;

  terms.class_prior = dirichlet_cross(class_prior(cfg), log_class);
  terms.class_entropy = dirichlet_entropy(state.class_dirichlet);

  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const ClassConfig& cls = cfg.classes[l];
    const Eigen::VectorXd log_within = dirichlet_log_mean(state.within_dirichlet[l]);
    terms.within_prior += dirichlet_cross(within_prior(cls), log_within);
    terms.within_entropy += dirichlet_entropy(state.within_dirichlet[l]);

    const auto block = state.rho.middleCols(static_cast<Eigen::Index>(layout.offset(l)),
                                            static_cast<Eigen::Index>(layout.atoms_in(l)));
    const Eigen::VectorXd mass = block.colwise().sum().transpose();
    terms.assignment += mass.sum() * log_class[static_cast<Eigen::Index>(l)] + mass.dot(log_within);

    const double dim = static_cast<double>(cls.dimension());
    const Eigen::MatrixXd& precision = problem.prior_precision(l);
    for (std::size_t h = 0; h < layout.atoms_in(l); ++h) {
      const Eigen::VectorXd diff = state.atom_mean[l][h] - cls.prior_mean;
      const double trace = (precision.array() * state.atom_cov[l][h].array()).sum();
      terms.atom_prior += -0.5 * dim * kLog2Pi - 0.5 * problem.prior_log_det(l) -
                          0.5 * (trace + diff.dot(precision * diff));
      terms.atom_entropy += 0.5 * dim * (1.0 + kLog2Pi) + 0.5 * log_det_spd(state.atom_cov[l][h]);
    }
  }

  if (!cfg.noise_precision) {
    const double a = cfg.a_sigma, b = cfg.b_sigma;
    terms.noise_prior = a * std::log(b) - lgamma(a) + (a - 1.0) * noise.log_mean - b * noise.mean;
    const double shape = state.noise_shape;
    terms.noise_entropy = shape - std::log(state.noise_rate) + lgamma(shape) + (1.0 - shape) * digamma(shape);
  }
  return terms;
}

double compute_elbo(const VariationalState& state, const Problem& problem) {
  const double value = elbo_terms(state, problem).total();
  if (!std::isfinite(value)) throw Error(ErrorKind::NonFiniteElbo, "evidence lower bound is not finite");
  return value;
}

VariationalState prior_state(const Problem& problem) {
  const ModelConfig& cfg = problem.config();
  const AtomLayout& layout = problem.layout();
  VariationalState state;
  state.rho = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(problem.num_units()),
                                        static_cast<Eigen::Index>(layout.total()), 1.0 / layout.total());
  state.class_dirichlet = class_prior(cfg);
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    const ClassConfig& cls = cfg.classes[l];
    state.within_dirichlet.push_back(within_prior(cls));
    state.atom_mean.emplace_back(layout.atoms_in(l), cls.prior_mean);
    state.atom_cov.emplace_back(layout.atoms_in(l), cls.prior_cov);
  }
  state.noise_shape = cfg.a_sigma;
  state.noise_rate = cfg.b_sigma;
  return state;
}

VariationalState initial_state(const Problem& problem, InitStrategy init, std::uint64_t seed) {
  Rng rng(seed);
  VariationalState state = prior_state(problem);
  switch (init) {
    case InitStrategy::RandomSoft: {
      for (Eigen::Index i = 0; i < state.rho.rows(); ++i) {
        for (Eigen::Index k = 0; k < state.rho.cols(); ++k) state.rho(i, k) = rng.exponential();
        state.rho.row(i) /= state.rho.row(i).sum();
      }
      update_class_weights(state, problem);
      update_within_weights(state, problem);
      update_atoms(state, problem);
      update_noise(state, problem);
      break;
    }
    case InitStrategy::AssignPriorMeans: {
      const ModelConfig& cfg = problem.config();
      for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
        const Eigen::MatrixXd lower = Eigen::LLT<Eigen::MatrixXd>(cfg.classes[l].prior_cov).matrixL();
        for (auto& mean : state.atom_mean[l]) {
          Eigen::VectorXd z(mean.size());
          for (Eigen::Index m = 0; m < z.size(); ++m) z[m] = rng.normal();
          mean = cfg.classes[l].prior_mean + lower * z;
        }
      }
      break;
    }
  }
  return state;
}

void validate_options(const FitOptions& opts) {
  if (opts.max_sweeps < 1) throw Error(ErrorKind::InvalidConfig, "max_sweeps must be at least 1");
  if (opts.restarts < 1) throw Error(ErrorKind::InvalidConfig, "restarts must be at least 1");
  if (!(opts.rel_tol >= 0.0)) throw Error(ErrorKind::InvalidConfig, "rel_tol must be nonnegative");
  if (opts.threads < 1) throw Error(ErrorKind::InvalidConfig, "threads must be at least 1");
}

bool run_cavi(VariationalState& state, const Problem& problem, int max_sweeps, double rel_tol,
              const std::function<void(int sweep, double elbo)>& progress) {
  for (int k = 0; k < max_sweeps; ++k) {
    try {
      sweep(state, problem);
      state.elbo_trace.push_back(compute_elbo(state, problem));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("sweep {}: {}", k + 1, e.detail()));
    }
    if (progress) progress(k + 1, state.elbo_trace.back());
    const std::size_t len = state.elbo_trace.size();
    if (len >= 2) {
      const double previous = state.elbo_trace[len - 2];
      if (std::abs(state.elbo_trace[len - 1] - previous) < rel_tol * std::abs(previous)) return true;
    }
  }
  return false;
}

FitResult fit(const FunctionalDataset& data, const ModelConfig& cfg, const FitOptions& opts) {
  validate_options(opts);
  const Problem problem(data, cfg);

  FitResult result;
  if (!data.standardized()) {
    result.warnings.push_back("data are not standardized; fitting the raw series");
  }

  const auto restarts = static_cast<std::size_t>(opts.restarts);
  std::vector<VariationalState> states(restarts);
  result.restarts.resize(restarts);
  std::vector<std::exception_ptr> failures(restarts);
  std::mutex progress_mutex;

  const auto run_one = [&](std::size_t r) {
    try {
      const std::uint64_t seed = derive_seed(opts.seed, r);
      VariationalState state = initial_state(problem, opts.init, seed);
      std::function<void(int, double)> report;
      if (opts.progress) {
        report = [&, r](int k, double elbo) {
          std::lock_guard lock(progress_mutex);
          opts.progress(static_cast<int>(r), k, elbo);
        };
      }
      const bool converged = run_cavi(state, problem, opts.max_sweeps, opts.rel_tol, report);
      result.restarts[r] = RestartSummary{seed, state.elbo_trace, converged};
      states[r] = std::move(state);
    } catch (const Error& e) {
      failures[r] = std::make_exception_ptr(Error(e.kind(), fmt::format("restart {}: {}", r + 1, e.detail())));
    } catch (...) {
      failures[r] = std::current_exception();
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(opts.threads), restarts);
  if (workers <= 1) {
    for (std::size_t r = 0; r < restarts; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < restarts; r = next++) run_one(r);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (states[r].elbo_trace.back() > states[best].elbo_trace.back()) best = r;
  }
  result.best_restart = static_cast<int>(best);
  result.state = std::move(states[best]);
  for (std::size_t r = 0; r < restarts; ++r) {
    if (!result.restarts[r].converged) {
      result.warnings.push_back(fmt::format("restart {} stopped at max_sweeps without meeting rel_tol", r + 1));
    }
  }
  return result;
}

}  // namespace efdmp
