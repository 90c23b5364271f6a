#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mgpo/optim.hpp"
#include "mgpo/tasks.hpp"

namespace mgpo {

enum class OptimizerKind { kAdamW, kMgpo, kMgpoNoApn, kSam, kNoise };

std::string optimizer_name(OptimizerKind kind);

struct ExperimentConfig {
  TaskSpec task;

  std::size_t rank = 8;
  double alpha = 8.0;
  std::vector<std::size_t> hidden_dims;  // empty = single linear layer
  bool zero_base = true;                 // w0 = 0 (adapter carries the map)

  OptimizerKind optimizer = OptimizerKind::kMgpo;
  double lr = 1e-3;
  ScheduleKind schedule = ScheduleKind::kConstant;
  double warmup_ratio = 0.03;
  long steps = 500;
  std::size_t batch_size = 32;
  double rho = 0.05;
  double mu = 0.9;       // AdamW beta1 / momentum decay
  double ema_beta = 0.9; // APN EMA decay
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  MomentumRule momentum_rule = MomentumRule::kOptimizerMoment;

  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir = "mgpo_out";
  long checkpoint_every = 0;  // 0 = final only
  int smooth_window = 25;
  bool export_dataset = false;

  bool rank_alpha_tied() const { return alpha == static_cast<double>(rank); }
};

// Flat key=value text, dotted section prefixes, '#' comments. Unknown keys
// are rejected with a nearest-key suggestion; every constraint is validated.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

std::string canonical_config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Named preset configs (the shipped defaults for the stability experiments).
// Returns config text, parseable by parse_config_text.
std::string preset_text(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace mgpo
