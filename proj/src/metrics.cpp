#include "mgpo/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mgpo {

LossCurve smooth(const LossCurve& curve, int window) {
  if (window < 1) throw UsageError("smooth: window must be >= 1");
  const long n = static_cast<long>(curve.losses.size());
  if (window > n) throw UsageError("smooth: window exceeds curve length");
  LossCurve out;
  out.smoothing_window = window;
  out.losses.resize(n);
  const long half = window / 2;
  for (long i = 0; i < n; ++i) {
    const long lo = std::max<long>(0, i - half);
    const long hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (long j = lo; j <= hi; ++j) sum += curve.losses[j];
    out.losses[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double rebound_metric_raw(const LossCurve& curve) {
  if (curve.losses.size() < 2) throw UsageError("rebound_metric: curve too short");
  double running_min = curve.losses[0];
  double max_rise = 0.0;
  for (double l : curve.losses) {
    running_min = std::min(running_min, l);
    max_rise = std::max(max_rise, l - running_min);
  }
  return max_rise;
}

double rebound_metric(const LossCurve& curve) {
  const double raw = rebound_metric_raw(curve);
  const double overall_min = *std::min_element(curve.losses.begin(), curve.losses.end());
  const double drop = curve.losses.front() - overall_min;
  if (drop <= 0.0) return 0.0;  // flat or never-improving curve
  return raw / drop;
}

SharpnessResult sharpness_proxy(MlpModel& model, const Dataset& data, double rho_eval,
                                int k_samples, Rng& rng) {
  if (rho_eval <= 0.0) throw UsageError("sharpness_proxy: rho_eval must be positive");
  if (k_samples < 1) throw UsageError("sharpness_proxy: k_samples must be >= 1");
  ParamVector params = trainable_params(model);
  const ParamBuffer saved = snapshot_params(params);
  const Batch full{data.inputs, data.targets};
  const double base_loss = forward_loss(model, full, data.loss).loss;

  SharpnessResult result;
  double sum = 0.0;
  int counted = 0;
  for (int k = 0; k < k_samples; ++k) {
    std::vector<Matrix> dir = unit_gaussian_direction(rng, param_shapes(params));
    param_axpy(params, dir, rho_eval);
    double perturbed = std::numeric_limits<double>::quiet_NaN();
    try {
      perturbed = forward_loss(model, full, data.loss).loss;
    } catch (const NumericError&) {
    }
    restore_params(params, saved);
    if (std::isfinite(perturbed)) {
      sum += perturbed - base_loss;
      ++counted;
    } else {
      ++result.excluded_samples;
    }
  }
  result.value = counted > 0 ? sum / counted : 0.0;
  return result;
}

StabilitySummary summarize(const LossCurve& curve, MlpModel& model, const Dataset& data,
                           const SummaryConfig& cfg) {
  if (curve.losses.empty()) throw UsageError("summarize: empty curve");
  const int window = std::min<int>(cfg.smooth_window, static_cast<int>(curve.losses.size()));
  const LossCurve smoothed = smooth(curve, window);

  StabilitySummary s;
  if (smoothed.losses.size() >= 2) {
    s.rebound = rebound_metric(smoothed);
    s.rebound_raw = rebound_metric_raw(smoothed);
  }
  s.final_loss = smoothed.losses.back();
  auto best = std::min_element(smoothed.losses.begin(), smoothed.losses.end());
  s.best_loss = *best;
  s.steps_to_best = static_cast<long>(best - smoothed.losses.begin());
  Rng rng(cfg.sharpness_seed);
  s.sharpness = sharpness_proxy(model, data, cfg.sharpness_rho, cfg.sharpness_samples, rng).value;
  return s;
}

}  // namespace mgpo
