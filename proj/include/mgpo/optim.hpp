#pragma once
#include <cstdint>

#include "mgpo/lora.hpp"
#include "mgpo/rng.hpp"

namespace mgpo {

// Eq. 4 of the method writes the heavy-ball form m <- mu*m + g; AdamW's own
// first moment uses the convex form m <- mu*m + (1-mu)*g. Both are offered;
// the optimizer convention is the default.
enum class MomentumRule { kOptimizerMoment, kPaperLiteral };

struct AdamWState {
  ParamBuffer m;
  ParamBuffer v;
  long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  MomentumRule momentum_rule = MomentumRule::kOptimizerMoment;
};

AdamWState make_adamw(const ParamVector& params, double lr);

// EMA of the global gradient L2-norm; the perturbation denominator.
// Seeded from the first observed gradient norm. frozen=true pins g_bar at 1
// after init (the perturbation-only ablation arm).
struct ApnState {
  double g_bar = 0.0;
  double beta = 0.9;
  bool initialized = false;
  bool frozen = false;
};

struct MgpoConfig {
  double rho = 0.05;
  MomentumRule momentum_rule = MomentumRule::kOptimizerMoment;
  double min_momentum_norm = 1e-12;
  double min_g_bar = 1e-12;
};

struct StepReport {
  double loss = 0.0;
  double grad_norm = 0.0;
  double g_bar = 0.0;
  double perturb_norm = 0.0;
  int grad_evals = 0;
  bool perturbed = false;
};

// One AdamW update with decoupled weight decay and bias correction.
// Throws NumericError on non-finite gradients, leaving state untouched.
void adamw_apply(AdamWState& state, const ParamVector& params, const ParamBuffer& grads);

struct Perturbation {
  ParamBuffer epsilon;
  double norm = 0.0;
  bool applied = false;
};

// epsilon = rho * m/||m|| * 1/max(g_bar, clamp); degenerate momentum or an
// uninitialized g_bar yields applied=false and a zero buffer.
Perturbation compute_perturbation(const MgpoConfig& cfg, const ParamBuffer& momentum,
                                  const ApnState& apn);

void apn_update(ApnState& apn, double grad_norm);

StepReport adamw_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw);

// Two-stage update: perturb along the previous first moment, take one
// gradient at the perturbed point, restore, update at the original point.
StepReport mgpo_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw,
                     ApnState& apn, const MgpoConfig& cfg);

StepReport sam_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw,
                    double rho, double min_grad_norm = 1e-12);

StepReport noise_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw,
                      double rho, Rng& rng);

enum class ScheduleKind { kConstant, kCosineWarmup };

struct Schedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double base_lr = 1e-3;
  double warmup_ratio = 0.03;
  long total_steps = 1;

  double lr_at(long step) const;  // step in [0, total_steps)
};

}  // namespace mgpo
