// Apache License, Version 2.0, refer to LICENSE.txt

#include "efdmp/commands.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "efdmp/cavi.hpp"
#include "efdmp/error.hpp"
#include "efdmp/estimates.hpp"
#include "efdmp/io.hpp"
#include "efdmp/manifest.hpp"
#include "efdmp/prior.hpp"
#include "efdmp/random.hpp"
#include "efdmp/synth.hpp"

#ifndef EFDMP_VERSION
#define EFDMP_VERSION "dev"
#endif

namespace efdmp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runs one named stage, converting library and I/O failures into a
// CommandError that names it, and records the elapsed time.
class Stages {
 public:
  template <class F>
  auto run(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(name, start);
      } else {
        auto value = body();
        record(name, start);
        return value;
      }
    } catch (const CommandError&) {
      throw;
    } catch (const Error& e) {
      throw CommandError(name, e.what());
    } catch (const json::exception& e) {
      throw CommandError(name, e.what());
    } catch (const fs::filesystem_error& e) {
      throw CommandError(name, e.what());
    }
  }

  const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point start) {
    timings_.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }

  std::vector<std::pair<std::string, double>> timings_;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorKind::Io, fmt::format("{} '{}' does not exist", what, path.string()));
  }
}

std::string atom_name(ClusterLabel label) { return fmt::format("c{}_h{}", label.cls + 1, label.atom + 1); }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::MatrixXd matrix_from(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != c) throw Error(ErrorKind::Parse, "ragged matrix in state file");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const json& values) {
  const auto v = values.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json state_to_json(const VariationalState& state, const FunctionalDataset& data, const std::vector<double>& grid) {
  json units = json::array();
  for (const Unit& u : data.units()) units.push_back(u.id);
  json within = json::array();
  for (const auto& w : state.within_dirichlet) within.push_back(vector_json(w));
  json atoms = json::array();
  for (std::size_t l = 0; l < state.atom_mean.size(); ++l) {
    for (std::size_t h = 0; h < state.atom_mean[l].size(); ++h) {
      atoms.push_back({{"class", l + 1},
                       {"cluster", h + 1},
                       {"mean", vector_json(state.atom_mean[l][h])},
                       {"cov", matrix_json(state.atom_cov[l][h])}});
    }
  }
  return {{"unit_ids", units},
          {"grid", grid},
          {"rho", matrix_json(state.rho)},
          {"class_dirichlet", vector_json(state.class_dirichlet)},
          {"within_dirichlet", within},
          {"atoms", atoms},
          {"noise_shape", state.noise_shape},
          {"noise_rate", state.noise_rate},
          {"elbo_trace", state.elbo_trace}};
}

struct SavedFit {
  VariationalState state;
  std::vector<std::string> unit_ids;
  std::vector<double> grid;
};

SavedFit state_from_json(const json& doc, const ModelConfig& cfg) {
  SavedFit saved;
  saved.unit_ids = doc.at("unit_ids").get<std::vector<std::string>>();
  saved.grid = doc.at("grid").get<std::vector<double>>();
  VariationalState& state = saved.state;
  state.rho = matrix_from(doc.at("rho"));
  state.class_dirichlet = vector_from(doc.at("class_dirichlet"));
  for (const auto& w : doc.at("within_dirichlet")) state.within_dirichlet.push_back(vector_from(w));
  state.atom_mean.resize(cfg.num_classes());
  state.atom_cov.resize(cfg.num_classes());
  for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
    state.atom_mean[l].resize(static_cast<std::size_t>(cfg.classes[l].h_max));
    state.atom_cov[l].resize(static_cast<std::size_t>(cfg.classes[l].h_max));
  }
  for (const auto& atom : doc.at("atoms")) {
    const auto l = atom.at("class").get<std::size_t>() - 1;
    const auto h = atom.at("cluster").get<std::size_t>() - 1;
    if (l >= cfg.num_classes() || h >= state.atom_mean[l].size()) {
      throw Error(ErrorKind::InconsistentState, "state file atom label does not match the config");
    }
    state.atom_mean[l][h] = vector_from(atom.at("mean"));
    state.atom_cov[l][h] = matrix_from(atom.at("cov"));
  }
  state.noise_shape = doc.at("noise_shape").get<double>();
  state.noise_rate = doc.at("noise_rate").get<double>();
  state.elbo_trace = doc.at("elbo_trace").get<std::vector<double>>();
  const AtomLayout layout(cfg);
  if (static_cast<std::size_t>(state.rho.cols()) != layout.total() ||
      static_cast<std::size_t>(state.rho.rows()) != saved.unit_ids.size()) {
    throw Error(ErrorKind::InconsistentState, "state file responsibilities do not match the config");
  }
  return saved;
}

json clusters_json(const ClusterReport& report) {
  json clusters = json::array();
  for (const OccupiedCluster& c : report.clusters) {
    json entry = {{"class", c.label.cls + 1}, {"cluster", c.label.atom + 1}, {"frequency", c.frequency}};
    if (c.volume) entry["volume"] = *c.volume;
    clusters.push_back(std::move(entry));
  }
  return clusters;
}

json class_frequencies(const MapAssignments& assignments, std::size_t num_classes) {
  std::vector<int> counts(num_classes, 0);
  for (std::size_t f : assignments.f_hat) counts[f] += 1;
  return counts;
}

void write_curves(const fs::path& path, const ClusterReport& report) {
  auto out = open_output(path);
  out << "time";
  for (const auto& c : report.clusters) out << ',' << atom_name(c.label);
  out << '\n';
  for (std::size_t s = 0; s < report.grid.size(); ++s) {
    out << format_double(report.grid[s]);
    for (const auto& c : report.clusters) out << ',' << format_double(c.curve[static_cast<Eigen::Index>(s)]);
    out << '\n';
  }
}

InitStrategy parse_init(const std::string& name) {
  if (name == "random_soft") return InitStrategy::RandomSoft;
  if (name == "assign_prior_means") return InitStrategy::AssignPriorMeans;
  throw Error(ErrorKind::InvalidConfig, fmt::format("unknown init strategy '{}'", name));
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 3) throw Error(ErrorKind::InvalidConfig, fmt::format("grid '{}' is not lo:hi:count", text));
  double lo = 0.0, hi = 0.0;
  int count = 0;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    count = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, fmt::format("grid '{}' is not lo:hi:count", text));
  }
  if (count < 1 || (count > 1 && !(hi > lo))) {
    throw Error(ErrorKind::InvalidConfig, fmt::format("grid '{}' needs count >= 1 and hi > lo", text));
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) grid[s] = count == 1 ? lo : lo + (hi - lo) * s / (count - 1);
  return grid;
}

}  // namespace

void cmd_fit(const FitArgs& args, std::ostream& log) {
  Stages stages;
  const ModelConfig cfg = stages.run("reading config", [&] {
    require_file(args.config, "config file");
    ModelConfig c = load_config(args.config);
    validate_config(c);
    return c;
  });
  const FunctionalDataset raw = stages.run("reading data", [&] {
    require_file(args.data, "data file");
    return read_dataset_csv(args.data);
  });
  const FunctionalDataset data = stages.run("standardizing", [&] { return args.raw ? raw : standardize(raw); });

  FitOptions opts;
  opts.seed = args.seed;
  opts.restarts = args.restarts;
  opts.rel_tol = args.tol;
  opts.max_sweeps = args.max_sweeps;
  opts.threads = args.threads;
  std::mutex log_mutex;
  stages.run("options", [&] { opts.init = parse_init(args.init); validate_options(opts); });
  if (args.progress) {
    opts.progress = [&](int restart, int sweep, double elbo) {
      std::lock_guard lock(log_mutex);
      log << fmt::format("restart {} sweep {} elbo {}\n", restart + 1, sweep, format_double(elbo));
    };
  }
  const FitResult result = stages.run("fitting", [&] { return fit(data, cfg, opts); });
  for (const auto& warning : result.warnings) log << "warning: " << warning << '\n';

  const std::vector<double> grid = data.grid_union();
  const ClusterReport report =
      stages.run("estimating", [&] { return build_report(result.state, cfg, data, grid); });
  const AtomLayout layout(cfg);

  stages.run("writing outputs", [&] {
    fs::create_directories(args.out);
    {
      auto out = open_output(args.out / "assignments.csv");
      out << "unit_id,class,cluster,max_rho\n";
      for (std::size_t i = 0; i < data.size(); ++i) {
        const ClusterLabel g = report.assignments.g_hat[i];
        const double top = result.state.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(layout.column(g)));
        out << data.unit(i).id << ',' << g.cls + 1 << ',' << g.atom + 1 << ',' << format_double(top) << '\n';
      }
    }
    {
      auto out = open_output(args.out / "rho.csv");
      out << "unit_id";
      for (std::size_t col = 0; col < layout.total(); ++col) out << ',' << atom_name(layout.label(col));
      out << '\n';
      for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.unit(i).id;
        for (std::size_t col = 0; col < layout.total(); ++col) {
          out << ',' << format_double(result.state.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)));
        }
        out << '\n';
      }
    }
    write_curves(args.out / "curves.csv", report);
    {
      auto out = open_output(args.out / "elbo.csv");
      out << "restart,sweep,elbo\n";
      for (std::size_t r = 0; r < result.restarts.size(); ++r) {
        const auto& trace = result.restarts[r].elbo_trace;
        for (std::size_t k = 0; k < trace.size(); ++k) out << r + 1 << ',' << k + 1 << ',' << format_double(trace[k]) << '\n';
      }
    }
    {
      json summary = {{"n_units", data.size()},
                      {"standardized", data.standardized()},
                      {"occupied_clusters", report.clusters.size()},
                      {"clusters", clusters_json(report)},
                      {"class_frequencies", class_frequencies(report.assignments, cfg.num_classes())},
                      {"class_disagreements", report.assignments.disagreements()},
                      {"best_restart", result.best_restart + 1},
                      {"final_elbo", result.state.elbo_trace.back()},
                      {"sweeps", result.state.elbo_trace.size()},
                      {"converged", result.restarts[static_cast<std::size_t>(result.best_restart)].converged},
                      {"warnings", result.warnings}};
      if (data.has_volumes()) summary["total_volume"] = data.total_volume();
      auto out = open_output(args.out / "summary.json");
      out << summary.dump(2) << '\n';
    }
    {
      auto out = open_output(args.out / "state.json");
      out << state_to_json(result.state, data, grid).dump(2) << '\n';
    }
    save_config(args.out / "config.json", cfg);
  });

  RunManifest manifest;
  manifest.command = "fit";
  manifest.version = EFDMP_VERSION;
  manifest.seed = args.seed;
  manifest.config = config_to_json(cfg);
  manifest.options = {{"restarts", args.restarts}, {"tol", args.tol},   {"max_sweeps", args.max_sweeps},
                      {"threads", args.threads},   {"init", args.init}, {"raw", args.raw}};
  stages.run("writing manifest", [&] {
    manifest.inputs = {{args.config.string(), sha256_file(args.config)}, {args.data.string(), sha256_file(args.data)}};
    manifest.timings = stages.timings();
    write_manifest(args.out, manifest);
  });
  log << fmt::format("fit: {} occupied clusters, final elbo {}, best restart {}\n", report.clusters.size(),
                     format_double(result.state.elbo_trace.back()), result.best_restart + 1);
}

void cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  Stages stages;
  const double variance = stages.run("options", [&] {
    if (args.noise_variance) return *args.noise_variance;
    if (args.scenario == "small") return kSmallNoiseVariance;
    if (args.scenario == "high") return kHighNoiseVariance;
    throw Error(ErrorKind::InvalidConfig, fmt::format("unknown scenario '{}' (expected small or high)", args.scenario));
  });
  const SimulatedData sim = stages.run("generating", [&] { return generate(simulation_study(variance, args.seed)); });
  stages.run("writing outputs", [&] {
    fs::create_directories(args.out);
    {
      auto out = open_output(args.out / "data.csv");
      write_dataset_csv(out, sim.data);
    }
    LabelTable truth;
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
      truth.unit_ids.push_back(sim.data.unit(i).id);
      truth.labels.push_back(sim.labels[i] + 1);
    }
    auto out = open_output(args.out / "truth.csv");
    write_labels_csv(out, truth);
  });
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.version = EFDMP_VERSION;
  manifest.seed = args.seed;
  manifest.options = {{"scenario", args.scenario}, {"noise_variance", variance}, {"n", 100}, {"t_count", 50}};
  manifest.timings = stages.timings();
  stages.run("writing manifest", [&] { write_manifest(args.out, manifest); });
  log << fmt::format("simulate: {} units, noise variance {}\n", sim.data.size(), format_double(variance));
}

void cmd_prior_sample(const PriorSampleArgs& args, std::ostream& log) {
  Stages stages;
  const ModelConfig cfg = stages.run("reading config", [&] {
    require_file(args.config, "config file");
    ModelConfig c = load_config(args.config);
    validate_config(c);
    return c;
  });
  const std::vector<double> grid = stages.run("grid", [&] {
    if (args.data) {
      require_file(*args.data, "data file");
      return read_dataset_csv(*args.data).grid_union();
    }
    return parse_grid(args.grid);
  });
  if (args.n < 1 || args.draws < 0) {
    throw CommandError("options", "--n must be >= 1 and --draws >= 0");
  }
  const PriorDraw draw = stages.run("sampling partition", [&] { return sample_partition(cfg, args.n, args.seed); });
  std::vector<std::vector<Eigen::VectorXd>> curves;
  stages.run("sampling curves", [&] {
    for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
      curves.push_back(sample_prior_curves(cfg, l, args.draws, grid, derive_seed(args.seed, l + 1)));
    }
  });
  stages.run("writing outputs", [&] {
    fs::create_directories(args.out);
    {
      auto out = open_output(args.out / "partition.csv");
      out << "unit,class,cluster\n";
      for (std::size_t i = 0; i < draw.clusters.size(); ++i) {
        out << i + 1 << ',' << draw.clusters[i].cls + 1 << ',' << draw.clusters[i].atom + 1 << '\n';
      }
    }
    for (std::size_t l = 0; l < cfg.num_classes(); ++l) {
      auto out = open_output(args.out / fmt::format("curves_class{}.csv", l + 1));
      out << "time";
      for (int k = 0; k < args.draws; ++k) out << ",draw_" << k + 1;
      out << '\n';
      for (std::size_t s = 0; s < grid.size(); ++s) {
        out << format_double(grid[s]);
        for (const auto& curve : curves[l]) out << ',' << format_double(curve[static_cast<Eigen::Index>(s)]);
        out << '\n';
      }
    }
    {
      auto out = open_output(args.out / "prior_mean.csv");
      out << "time";
      for (std::size_t l = 0; l < cfg.num_classes(); ++l) out << ",class_" << l + 1;
      out << ",mixture\n";
      std::vector<Eigen::VectorXd> means;
      for (std::size_t l = 0; l < cfg.num_classes(); ++l) means.push_back(class_prior_mean_curve(cfg, l, grid));
      const Eigen::VectorXd mixture = prior_mean_curve(cfg, grid);
      for (std::size_t s = 0; s < grid.size(); ++s) {
        const auto row = static_cast<Eigen::Index>(s);
        out << format_double(grid[s]);
        for (const auto& m : means) out << ',' << format_double(m[row]);
        out << ',' << format_double(mixture[row]) << '\n';
      }
    }
    std::size_t clusters = 0;
    for (std::size_t l = 0; l < cfg.num_classes(); ++l) clusters += draw.state.distinct(l);
    json summary = {{"n", args.n},
                    {"clusters", clusters},
                    {"class_counts", draw.state.class_counts},
                    {"cocluster_probability", cocluster_probability(cfg)},
                    {"cocluster_limit", cocluster_limit(cfg)},
                    {"next_new_cluster_probability", new_cluster_probability(draw.state, cfg)}};
    auto out = open_output(args.out / "summary.json");
    out << summary.dump(2) << '\n';
  });
  RunManifest manifest;
  manifest.command = "prior-sample";
  manifest.version = EFDMP_VERSION;
  manifest.seed = args.seed;
  manifest.config = config_to_json(cfg);
  manifest.options = {{"n", args.n}, {"draws", args.draws}, {"grid", args.data ? "data" : args.grid}};
  stages.run("writing manifest", [&] {
    manifest.inputs = {{args.config.string(), sha256_file(args.config)}};
    if (args.data) manifest.inputs.emplace_back(args.data->string(), sha256_file(*args.data));
    manifest.timings = stages.timings();
    write_manifest(args.out, manifest);
  });
  log << fmt::format("prior-sample: {} units, {} curves per class\n", args.n, args.draws);
}

void cmd_report(const ReportArgs& args, std::ostream& log) {
  Stages stages;
  const fs::path config_path = args.fit_dir / "config.json";
  const fs::path state_path = args.fit_dir / "state.json";
  const ModelConfig cfg = stages.run("reading fit", [&] {
    require_file(config_path, "fit config");
    return load_config(config_path);
  });
  const SavedFit saved = stages.run("reading fit", [&] {
    require_file(state_path, "fit state");
    std::ifstream in(state_path);
    return state_from_json(json::parse(in), cfg);
  });

  // Volumes come from the data file when given; ids must match the fit.
  std::vector<Unit> units;
  const FunctionalDataset data = stages.run("reading data", [&] {
    if (!args.data) {
      for (const auto& id : saved.unit_ids) units.push_back(Unit{id, {0.0}, {0.0}, std::nullopt});
      return FunctionalDataset(units);
    }
    require_file(*args.data, "data file");
    FunctionalDataset d = read_dataset_csv(*args.data);
    if (d.size() != saved.unit_ids.size()) {
      throw Error(ErrorKind::LengthMismatch, "data file and fit have different numbers of units");
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.unit(i).id != saved.unit_ids[i]) {
        throw Error(ErrorKind::InvalidData, fmt::format("data unit '{}' does not match fit unit '{}'", d.unit(i).id,
                                                        saved.unit_ids[i]));
      }
    }
    return d;
  });
  const ClusterReport report =
      stages.run("estimating", [&] { return build_report(saved.state, cfg, data, saved.grid); });
  const AtomLayout layout(cfg);

  json doc = {{"n_units", saved.unit_ids.size()},
              {"occupied_clusters", report.clusters.size()},
              {"clusters", clusters_json(report)},
              {"class_frequencies", class_frequencies(report.assignments, cfg.num_classes())},
              {"class_disagreements", report.assignments.disagreements()}};
  if (data.has_volumes()) {
    const std::vector<double> volumes = stages.run("volumes", [&] { return volume_report(report, data); });
    double total = 0.0;
    for (double v : volumes) total += v;
    doc["total_volume"] = total;
  }
  json units_doc = json::array();
  for (std::size_t i = 0; i < saved.unit_ids.size(); ++i) {
    const ClusterLabel g = report.assignments.g_hat[i];
    units_doc.push_back({{"unit_id", saved.unit_ids[i]},
                         {"class", g.cls + 1},
                         {"cluster", g.atom + 1},
                         {"f_hat", report.assignments.f_hat[i] + 1}});
  }
  doc["units"] = units_doc;

  std::optional<Contingency> table;
  std::optional<double> accuracy;
  if (args.truth) {
    stages.run("reading truth", [&] {
      require_file(*args.truth, "truth file");
      const LabelTable truth = read_labels_csv(*args.truth);
      std::map<std::string, int> by_id;
      for (std::size_t i = 0; i < truth.unit_ids.size(); ++i) by_id[truth.unit_ids[i]] = truth.labels[i];
      std::vector<int> true_labels;
      for (const auto& id : saved.unit_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorKind::InvalidData, fmt::format("truth file lacks unit '{}'", id));
        true_labels.push_back(it->second);
      }
      const std::vector<int> est = flat_labels(report.assignments, layout);
      table = contingency(true_labels, est);
      accuracy = permutation_accuracy(true_labels, est);
    });
    doc["accuracy"] = *accuracy;
  }

  stages.run("writing outputs", [&] {
    fs::create_directories(args.out);
    {
      auto out = open_output(args.out / "report.json");
      out << doc.dump(2) << '\n';
    }
    write_curves(args.out / "curves.csv", report);
    if (table) {
      auto out = open_output(args.out / "contingency.csv");
      out << "true_label";
      for (int e : table->est_labels) out << ',' << atom_name(layout.label(static_cast<std::size_t>(e)));
      out << '\n';
      for (Eigen::Index r = 0; r < table->counts.rows(); ++r) {
        out << table->true_labels[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < table->counts.cols(); ++c) out << ',' << table->counts(r, c);
        out << '\n';
      }
      auto acc = open_output(args.out / "accuracy.csv");
      acc << "metric,value\npermutation_accuracy," << format_double(*accuracy) << '\n';
    }
  });
  RunManifest manifest;
  manifest.command = "report";
  manifest.version = EFDMP_VERSION;
  manifest.config = config_to_json(cfg);
  manifest.options = {{"fit_dir", args.fit_dir.string()}};
  stages.run("writing manifest", [&] {
    manifest.inputs = {{config_path.string(), sha256_file(config_path)}, {state_path.string(), sha256_file(state_path)}};
    if (args.data) manifest.inputs.emplace_back(args.data->string(), sha256_file(*args.data));
    if (args.truth) manifest.inputs.emplace_back(args.truth->string(), sha256_file(*args.truth));
    manifest.timings = stages.timings();
    write_manifest(args.out, manifest);
  });
  log << fmt::format("report: {} occupied clusters\n", report.clusters.size());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Enriched functional Dirichlet multinomial clustering"};
  app.set_version_flag("--version", std::string(EFDMP_VERSION));
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the model by coordinate-ascent variational inference");
  fit_cmd->add_option("--config", fit_args.config, "Model config (JSON)")->required();
  fit_cmd->add_option("--data", fit_args.data, "Long-format CSV: unit_id,time,value[,volume]")->required();
  fit_cmd->add_option("--out", fit_args.out, "Output directory")->required();
  fit_cmd->add_option("--seed", fit_args.seed, "Random seed");
  fit_cmd->add_option("--restarts", fit_args.restarts, "Independent initializations")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--tol", fit_args.tol, "Relative ELBO tolerance")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--max-sweeps", fit_args.max_sweeps, "Maximum sweeps per restart")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--threads", fit_args.threads, "Restarts run concurrently")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--init", fit_args.init, "Initialization")
      ->check(CLI::IsMember({"random_soft", "assign_prior_means"}));
  fit_cmd->add_flag("--raw", fit_args.raw, "Fit the series without standardizing");
  fit_cmd->add_flag("--progress", fit_args.progress, "Stream per-sweep ELBO to stderr");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate the four-curve simulation study");
  sim_cmd->add_option("--out", sim_args.out, "Output directory")->required();
  sim_cmd->add_option("--seed", sim_args.seed, "Random seed");
  sim_cmd->add_option("--scenario", sim_args.scenario, "Noise scenario")->check(CLI::IsMember({"small", "high"}));
  sim_cmd->add_option("--noise-variance", sim_args.noise_variance, "Override the noise variance")
      ->check(CLI::NonNegativeNumber);

  PriorSampleArgs prior_args;
  std::string prior_data;
  auto* prior_cmd = app.add_subcommand("prior-sample", "Draw partitions and curves from the prior");
  prior_cmd->add_option("--config", prior_args.config, "Model config (JSON)")->required();
  prior_cmd->add_option("--out", prior_args.out, "Output directory")->required();
  prior_cmd->add_option("--data", prior_data, "Take the curve grid from this dataset");
  prior_cmd->add_option("--grid", prior_args.grid, "Curve grid lo:hi:count");
  prior_cmd->add_option("--seed", prior_args.seed, "Random seed");
  prior_cmd->add_option("--n", prior_args.n, "Units in the sampled partition")->check(CLI::PositiveNumber);
  prior_cmd->add_option("--draws", prior_args.draws, "Curves per class")->check(CLI::NonNegativeNumber);

  ReportArgs report_args;
  std::string report_data, report_truth;
  auto* report_cmd = app.add_subcommand("report", "Summarise a fit directory");
  report_cmd->add_option("--fit", report_args.fit_dir, "Directory written by fit")->required();
  report_cmd->add_option("--out", report_args.out, "Output directory")->required();
  report_cmd->add_option("--data", report_data, "Dataset the fit used (for volumes)");
  report_cmd->add_option("--truth", report_truth, "Ground-truth labels unit_id,label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << EFDMP_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "efdmp: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) {
      err << app.get_subcommands().front()->help();
    } else {
      err << app.help();
    }
    return 2;
  }

  std::string name;
  try {
    if (fit_cmd->parsed()) {
      name = "fit";
      cmd_fit(fit_args, err);
    } else if (sim_cmd->parsed()) {
      name = "simulate";
      cmd_simulate(sim_args, err);
    } else if (prior_cmd->parsed()) {
      name = "prior-sample";
      if (!prior_data.empty()) prior_args.data = prior_data;
      cmd_prior_sample(prior_args, err);
    } else if (report_cmd->parsed()) {
      name = "report";
      if (!report_data.empty()) report_args.data = report_data;
      if (!report_truth.empty()) report_args.truth = report_truth;
      cmd_report(report_args, err);
    }
  } catch (const CommandError& e) {
    err << "efdmp " << name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "efdmp " << name << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace efdmp::cli
