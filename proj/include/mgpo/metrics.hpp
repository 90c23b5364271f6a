#pragma once
#include <vector>

#include "mgpo/lora.hpp"
#include "mgpo/rng.hpp"
#include "mgpo/tasks.hpp"

namespace mgpo {

struct LossCurve {
  std::vector<double> losses;
  int smoothing_window = 1;
};

// Centered moving average; windows truncate at the edges.
LossCurve smooth(const LossCurve& curve, int window);

// Severity of the transient-divergence phase: the largest rise of the curve
// above its running minimum, normalized by the initial-to-best drop.
// 0 for monotone non-increasing or flat curves.
double rebound_metric(const LossCurve& curve);
double rebound_metric_raw(const LossCurve& curve);

struct SharpnessResult {
  double value = 0.0;
  int excluded_samples = 0;  // non-finite perturbed losses, dropped
};

// Mean loss increase over k random unit directions at radius rho_eval.
// The model is restored bitwise afterward.
SharpnessResult sharpness_proxy(MlpModel& model, const Dataset& data, double rho_eval,
                                int k_samples, Rng& rng);

struct StabilitySummary {
  double rebound = 0.0;
  double rebound_raw = 0.0;
  double final_loss = 0.0;
  double best_loss = 0.0;
  long steps_to_best = 0;
  double sharpness = 0.0;
};

struct SummaryConfig {
  int smooth_window = 25;
  double sharpness_rho = 0.05;
  int sharpness_samples = 20;
  std::uint64_t sharpness_seed = 0;
};

StabilitySummary summarize(const LossCurve& curve, MlpModel& model, const Dataset& data,
                           const SummaryConfig& cfg);

}  // namespace mgpo
