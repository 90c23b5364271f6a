#pragma once
#include <optional>
#include <string>
#include <vector>

#include "mgpo/config.hpp"
#include "mgpo/metrics.hpp"

namespace mgpo {

struct StepRow {
  long step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double g_bar = 0.0;
  double perturb_norm = 0.0;
  int grad_evals = 0;
  double lr = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<StepRow> rows;
  StabilitySummary summary;
  bool diverged = false;
  double wall_seconds = 0.0;
};

struct RunOptions {
  int jobs = 1;
  bool plot = true;
  bool resume = false;
  std::optional<std::uint64_t> seed_override;
};

// Exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitAllDiverged = 3;
inline constexpr int kExitIoError = 4;

MlpModel build_model(const ExperimentConfig& cfg, std::uint64_t seed);

// One seeded training run. run_dir may be empty (no files written).
RunResult train_one(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& run_dir,
                    bool resume = false);

int cmd_run(const ExperimentConfig& cfg, const RunOptions& opts);
int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir, bool plot);
int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, const RunOptions& opts);

// Telemetry CSV helpers (also used by compare and the tests).
std::vector<StepRow> read_telemetry(const std::string& path);
std::string summary_csv_header();
std::string summary_csv_row(const ExperimentConfig& cfg, const std::string& label,
                            const RunResult& result);

}  // namespace mgpo
