#include "mgpo/optim.hpp"

#include <cmath>
#include <numbers>

namespace mgpo {

AdamWState make_adamw(const ParamVector& params, double lr) {
  AdamWState state;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  state.lr = lr;
  return state;
}

void adamw_apply(AdamWState& state, const ParamVector& params, const ParamBuffer& grads) {
  if (grads.size() != params.size()) throw UsageError("adamw_apply: misaligned gradient buffer");
  for (const Matrix& g : grads) {
    if (!g.all_finite()) throw NumericError("adamw_apply: non-finite gradient");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const bool literal = state.momentum_rule == MomentumRule::kPaperLiteral;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i].tensor;
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    const Matrix& g = grads[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      if (literal) {
        m.data[j] = state.beta1 * m.data[j] + g.data[j];
      } else {
        m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g.data[j];
      }
      v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g.data[j] * g.data[j];
      // No beta1 bias correction in the heavy-ball form; the unscaled sum
      // already has full magnitude from step one.
      const double m_hat = literal ? m.data[j] : m.data[j] / bc1;
      const double v_hat = v.data[j] / bc2;
      p.data[j] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) +
                               state.weight_decay * p.data[j]);
    }
  }
}

Perturbation compute_perturbation(const MgpoConfig& cfg, const ParamBuffer& momentum,
                                  const ApnState& apn) {
  Perturbation out;
  out.epsilon = momentum;
  for (Matrix& m : out.epsilon)
    for (double& x : m.data) x = 0.0;
  if (!apn.initialized || cfg.rho <= 0.0) return out;
  const double m_norm = global_l2_norm(momentum);
  if (m_norm < cfg.min_momentum_norm) return out;
  const double denom = std::max(apn.g_bar, cfg.min_g_bar);
  const double scale = cfg.rho / (m_norm * denom);
  for (std::size_t i = 0; i < momentum.size(); ++i)
    for (std::size_t j = 0; j < momentum[i].data.size(); ++j)
      out.epsilon[i].data[j] = scale * momentum[i].data[j];
  out.norm = cfg.rho / denom;
  out.applied = true;
  return out;
}

void apn_update(ApnState& apn, double grad_norm) {
  if (!std::isfinite(grad_norm) || grad_norm < 0.0) {
    throw NumericError("apn_update: invalid gradient norm");
  }
  if (apn.frozen) {
    apn.g_bar = 1.0;
    apn.initialized = true;
    return;
  }
  if (!apn.initialized) {
    apn.g_bar = grad_norm;
    apn.initialized = true;
  } else {
    apn.g_bar = apn.beta * apn.g_bar + (1.0 - apn.beta) * grad_norm;
  }
}

StepReport adamw_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw) {
  ForwardCache cache = forward_loss(model, batch, kind);
  ParamBuffer grads = backward(model, cache);
  ParamVector params = trainable_params(model);
  adamw_apply(adamw, params, grads);
  StepReport report;
  report.loss = cache.loss;
  report.grad_norm = global_l2_norm(grads);
  report.grad_evals = 1;
  return report;
}

StepReport mgpo_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw,
                     ApnState& apn, const MgpoConfig& cfg) {
  ParamVector params = trainable_params(model);
  Perturbation pert = compute_perturbation(cfg, adamw.m, apn);

  ParamBuffer saved;
  if (pert.applied) {
    saved = snapshot_params(params);
    param_axpy(params, pert.epsilon, 1.0);
  }

  ForwardCache cache;
  ParamBuffer grads;
  try {
    cache = forward_loss(model, batch, kind);
    grads = backward(model, cache);
  } catch (...) {
    if (pert.applied) restore_params(params, saved);
    throw;
  }
  if (pert.applied) restore_params(params, saved);

  const double grad_norm = global_l2_norm(grads);
  apn_update(apn, grad_norm);
  adamw_apply(adamw, params, grads);

  StepReport report;
  report.loss = cache.loss;
  report.grad_norm = grad_norm;
  report.g_bar = apn.g_bar;
  report.perturb_norm = pert.applied ? pert.norm : 0.0;
  report.grad_evals = 1;
  report.perturbed = pert.applied;
  return report;
}

StepReport sam_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw,
                    double rho, double min_grad_norm) {
  if (rho <= 0.0) throw UsageError("sam_step: rho must be positive");
  ParamVector params = trainable_params(model);

  ForwardCache cache1 = forward_loss(model, batch, kind);
  ParamBuffer g1 = backward(model, cache1);
  const double g1_norm = global_l2_norm(g1);

  StepReport report;
  report.loss = cache1.loss;
  if (g1_norm < min_grad_norm) {
    adamw_apply(adamw, params, g1);
    report.grad_norm = g1_norm;
    report.grad_evals = 1;
    return report;
  }

  ParamBuffer saved = snapshot_params(params);
  param_axpy(params, g1, rho / g1_norm);
  ParamBuffer g2;
  try {
    ForwardCache cache2 = forward_loss(model, batch, kind);
    g2 = backward(model, cache2);
  } catch (...) {
    restore_params(params, saved);
    throw;
  }
  restore_params(params, saved);
  adamw_apply(adamw, params, g2);

  report.grad_norm = global_l2_norm(g2);
  report.perturb_norm = rho;
  report.grad_evals = 2;
  report.perturbed = true;
  return report;
}

StepReport noise_step(MlpModel& model, const Batch& batch, LossKind kind, AdamWState& adamw,
                      double rho, Rng& rng) {
  if (rho <= 0.0) throw UsageError("noise_step: rho must be positive");
  ParamVector params = trainable_params(model);
  std::vector<Matrix> dir = unit_gaussian_direction(rng, param_shapes(params));

  ParamBuffer saved = snapshot_params(params);
  param_axpy(params, dir, rho);
  ForwardCache cache;
  ParamBuffer grads;
  try {
    cache = forward_loss(model, batch, kind);
    grads = backward(model, cache);
  } catch (...) {
    restore_params(params, saved);
    throw;
  }
  restore_params(params, saved);
  adamw_apply(adamw, params, grads);

  StepReport report;
  report.loss = cache.loss;
  report.grad_norm = global_l2_norm(grads);
  report.perturb_norm = rho;
  report.grad_evals = 1;
  report.perturbed = true;
  return report;
}

double Schedule::lr_at(long step) const {
  if (kind == ScheduleKind::kConstant) return base_lr;
  const long warmup = static_cast<long>(warmup_ratio * static_cast<double>(total_steps));
  if (warmup > 0 && step < warmup) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(std::max<long>(1, total_steps - warmup));
  const double progress = static_cast<double>(step - warmup) / span;
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace mgpo
