// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace efdmp::cli {

struct FitArgs {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int restarts = 20;
  double tol = 1e-6;
  int max_sweeps = 500;
  int threads = 1;
  std::string init = "random_soft";  // or assign_prior_means
  bool raw = false;                   // skip standardization
  bool progress = false;
};

struct SimulateArgs {
  std::filesystem::path out;
  std::uint64_t seed = 0;
  std::string scenario = "small";  // small | high
  std::optional<double> noise_variance;
};

struct PriorSampleArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::filesystem::path> data;  // grid source
  std::string grid = "0:1:101";               // lo:hi:count, used without --data
  std::uint64_t seed = 0;
  int n = 100;
  int draws = 10;
};

struct ReportArgs {
  std::filesystem::path fit_dir;
  std::filesystem::path out;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> truth;
};

class CommandError : public std::runtime_error {
 public:
  CommandError(const std::string& stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(stage) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Each command writes its outputs plus manifest.json into args.out. Failures
// throw CommandError naming the stage.
void cmd_fit(const FitArgs& args, std::ostream& log);
void cmd_simulate(const SimulateArgs& args, std::ostream& log);
void cmd_prior_sample(const PriorSampleArgs& args, std::ostream& log);
void cmd_report(const ReportArgs& args, std::ostream& log);

// Full command-line entry point. Returns 0 on success, 2 on usage errors and
// 1 on data, config or runtime failures (diagnostic written to err).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace efdmp::cli
