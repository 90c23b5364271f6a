// Acceptance suite: one pass/fail line per criterion, exit 0 iff all
// hard criteria pass (criterion 8 is soft; a violation is reported with
// curves attached but does not fail the binary).
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mgpo/checkpoint.hpp"
#include "mgpo/lora.hpp"
#include "mgpo/metrics.hpp"
#include "mgpo/optim.hpp"
#include "mgpo/plot.hpp"
#include "mgpo/runner.hpp"
#include "mgpo/tasks.hpp"

namespace fs = std::filesystem;
using namespace mgpo;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
              detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return std::string(buf);
}

// ---- shared helpers -------------------------------------------------------

struct Instance {
  MlpModel model;
  Batch batch;
  LossKind loss;
};

Instance random_instance(Rng& rng) {
  Instance inst;
  const int n_layers = 1 + static_cast<int>(rng.next_u64() % 3);
  std::vector<std::size_t> dims;
  dims.push_back(2 + rng.next_u64() % 15);
  for (int l = 0; l < n_layers; ++l) dims.push_back(2 + rng.next_u64() % 15);
  for (int l = 0; l < n_layers; ++l) {
    const std::size_t out = dims[l + 1], in = dims[l];
    const std::size_t max_rank = std::min<std::size_t>(4, std::min(out, in));
    const std::size_t rank = 1 + rng.next_u64() % max_rank;
    LoraLinear layer = lora_init(rng, out, in, rank, static_cast<double>(rank));
    // Randomize B so gradients flow into A as well.
    for (double& v : layer.b.data) v = 0.3 * rng.normal();
    for (double& v : layer.bias) v = 0.1 * rng.normal();
    inst.model.layers.push_back(std::move(layer));
  }
  const std::size_t n = 2 + rng.next_u64() % 4;
  inst.batch.inputs = normal_fill(rng, n, dims.front(), 0.0, 1.0);
  inst.loss = (rng.next_u64() % 2 == 0) ? LossKind::kMse : LossKind::kSoftmaxCrossEntropy;
  if (inst.loss == LossKind::kMse) {
    inst.batch.targets = normal_fill(rng, n, dims.back(), 0.0, 1.0);
  } else {
    inst.batch.targets = Matrix(n, dims.back());
    for (std::size_t i = 0; i < n; ++i)
      inst.batch.targets(i, rng.next_u64() % dims.back()) = 1.0;
  }
  return inst;
}

ParamBuffer fd_gradients(MlpModel& model, const Batch& batch, LossKind loss, double h) {
  ParamVector params = trainable_params(model);
  ParamBuffer grads = zeros_like(params);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix* mat = params[p].tensor;
    for (std::size_t i = 0; i < mat->data.size(); ++i) {
      const double orig = mat->data[i];
      mat->data[i] = orig + h;
      ForwardCache plus = forward_loss(model, batch, loss);
      mat->data[i] = orig - h;
      ForwardCache minus = forward_loss(model, batch, loss);
      mat->data[i] = orig;
      grads[p].data[i] = (plus.loss - minus.loss) / (2.0 * h);
    }
  }
  return grads;
}

struct SeedOutcome {
  double rebound = 0.0;
  double final_loss = 0.0;
  std::vector<double> curve;
};

SeedOutcome run_preset(ExperimentConfig cfg, OptimizerKind opt, std::uint64_t seed,
                       const std::string& dir) {
  cfg.optimizer = opt;
  RunResult r = train_one(cfg, seed, dir);
  SeedOutcome out;
  LossCurve raw;
  for (const StepRow& row : r.rows) raw.losses.push_back(row.loss);
  LossCurve smoothed = smooth(raw, cfg.smooth_window);
  out.curve = smoothed.losses;
  out.rebound = rebound_metric(smoothed);
  out.final_loss = out.curve.back();
  return out;
}

}  // namespace

// ---- criteria -------------------------------------------------------------

static void criterion_1() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    Instance inst = random_instance(rng);
    ForwardCache cache = forward_loss(inst.model, inst.batch, inst.loss);
    ParamBuffer analytic = backward(inst.model, cache);
    ParamBuffer numeric = fd_gradients(inst.model, inst.batch, inst.loss, 1e-5);
    for (std::size_t p = 0; p < analytic.size(); ++p)
      for (std::size_t i = 0; i < analytic[p].data.size(); ++i) {
        const double f = numeric[p].data[i];
        const double rel = std::abs(analytic[p].data[i] - f) / std::max(1.0, std::abs(f));
        worst = std::max(worst, rel);
      }
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", worst < 1e-5 && secs < 10.0,
         fmt("max relative error %.3e over 20 instances in %.2f s", worst, secs));
}

static void criterion_2() {
  const auto t0 = Clock::now();
  Rng rng(7);
  TaskData task = make_task({TaskKind::kLowrankRecovery, 12, 12, 0, 3, 0.01, 64, 64, 7});
  Rng model_rng_a(99), model_rng_b(99);
  MlpModel mgpo_model, adamw_model;
  mgpo_model.layers.push_back(lora_init(model_rng_a, 12, 12, 4, 4.0));
  adamw_model.layers.push_back(lora_init(model_rng_b, 12, 12, 4, 4.0));
  AdamWState opt_m = make_adamw(trainable_params(mgpo_model), 0.01);
  AdamWState opt_a = make_adamw(trainable_params(adamw_model), 0.01);
  ApnState apn;
  MgpoConfig mcfg;
  mcfg.rho = 0.0;
  Batch batch{task.train.inputs, task.train.targets};
  bool bitwise = true;
  for (int step = 0; step < 100; ++step) {
    mgpo_step(mgpo_model, batch, task.train.loss, opt_m, apn, mcfg);
    adamw_step(adamw_model, batch, task.train.loss, opt_a);
    if (!(mgpo_model.layers[0].a == adamw_model.layers[0].a &&
          mgpo_model.layers[0].b == adamw_model.layers[0].b && opt_m.m == opt_a.m &&
          opt_m.v == opt_a.v))
      bitwise = false;
  }
  const double secs = seconds_since(t0);
  report(2, "rho=0 equivalence", bitwise && secs < 5.0,
         fmt("100 steps %s bitwise in %.2f s", bitwise ? "matched" : "DIVERGED", secs));
}

static void criterion_3() {
  TaskData task = make_task({TaskKind::kLowrankRecovery, 16, 16, 0, 4, 0.02, 128, 64, 31});
  Rng model_rng(5);
  MlpModel model;
  model.layers.push_back(lora_init(model_rng, 16, 16, 8, 8.0));
  AdamWState opt = make_adamw(trainable_params(model), 0.02);
  ApnState apn;
  MgpoConfig mcfg;
  mcfg.rho = 0.05;
  Rng batch_rng(77);
  int perturbed = 0;
  double worst_norm = 0.0, worst_cos = 0.0;
  int step = 0;
  while (perturbed < 1000 && step < 4000) {
    ++step;
    // Recompute the perturbation the step is about to take from the same
    // pre-step state, so epsilon's direction is directly observable.
    Perturbation pre = compute_perturbation(mcfg, opt.m, apn);
    const ParamBuffer m_prev = opt.m;
    const double g_bar_prev = apn.initialized ? apn.g_bar : 0.0;
    Batch batch;
    const std::size_t bs = 16;
    batch.inputs = Matrix(bs, 16);
    batch.targets = Matrix(bs, 16);
    for (std::size_t i = 0; i < bs; ++i) {
      const std::size_t row = batch_rng.next_u64() % task.train.inputs.rows;
      for (std::size_t j = 0; j < 16; ++j) {
        batch.inputs(i, j) = task.train.inputs(row, j);
        batch.targets(i, j) = task.train.targets(row, j);
      }
    }
    StepReport rep = mgpo_step(model, batch, task.train.loss, opt, apn, mcfg);
    if (!rep.perturbed) continue;
    ++perturbed;
    const double expected = mcfg.rho / std::max(g_bar_prev, mcfg.min_g_bar);
    worst_norm = std::max(worst_norm, std::abs(rep.perturb_norm - expected));
    const double m_norm = global_l2_norm(m_prev);
    const double cosv = param_dot(pre.epsilon, m_prev) / (pre.norm * m_norm);
    worst_cos = std::max(worst_cos, std::abs(cosv - 1.0));
  }
  report(3, "perturbation law",
         perturbed >= 1000 && worst_norm < 1e-12 && worst_cos < 1e-12,
         fmt("%d perturbed steps, max |norm err| %.2e, max |cos-1| %.2e", perturbed,
             worst_norm, worst_cos));
}

static void criterion_4() {
  Rng rng(404);
  bool ok = true;
  for (int seq = 0; seq < 10000 && ok; ++seq) {
    ApnState st;
    const double beta = rng.uniform();
    st.beta = beta;
    // Independent scalar oracle.
    double oracle = 0.0;
    bool seeded = false;
    const int len = 1 + static_cast<int>(rng.next_u64() % 12);
    for (int t = 0; t < len; ++t) {
      const double gn = std::abs(rng.normal()) + 1e-6;
      apn_update(st, gn);
      if (!seeded) {
        oracle = gn;  // first-step seeding rule
        seeded = true;
      } else {
        oracle = beta * oracle + (1.0 - beta) * gn;
      }
      if (st.g_bar != oracle) ok = false;
    }
  }
  report(4, "APN arithmetic", ok, ok ? "10000 sequences matched the scalar EMA oracle exactly"
                                     : "mismatch against scalar EMA oracle");
}

static void criterion_5(const ExperimentConfig& preset, const std::string& scratch) {
  ExperimentConfig cfg = preset;
  cfg.steps = 300;
  cfg.seeds = {1};
  // Eval-count contract from telemetry.
  RunResult mgpo_r = train_one([&] {
    ExperimentConfig c = cfg;
    c.optimizer = OptimizerKind::kMgpo;
    return c;
  }(), 1, scratch + "/c5_mgpo");
  RunResult sam_r = train_one([&] {
    ExperimentConfig c = cfg;
    c.optimizer = OptimizerKind::kSam;
    return c;
  }(), 1, scratch + "/c5_sam");
  bool evals_ok = true;
  for (const StepRow& r : mgpo_r.rows) evals_ok = evals_ok && r.grad_evals == 1;
  for (const StepRow& r : sam_r.rows) evals_ok = evals_ok && r.grad_evals == 2;

  // Wall overhead: best of 3 repetitions each to damp scheduler noise.
  auto time_run = [&](OptimizerKind opt, const std::string& dir) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      ExperimentConfig c = cfg;
      c.optimizer = opt;
      const auto t0 = Clock::now();
      train_one(c, 1, dir);
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };
  const double adamw_t = time_run(OptimizerKind::kAdamW, scratch + "/c5_time_a");
  const double mgpo_t = time_run(OptimizerKind::kMgpo, scratch + "/c5_time_m");
  const double overhead = (mgpo_t - adamw_t) / adamw_t;
  report(5, "cost contract", evals_ok && overhead < 0.35,
         fmt("grad_evals mgpo=1 sam=2 %s; mgpo wall overhead %.1f%% (adamw %.3fs, mgpo %.3fs)",
             evals_ok ? "ok" : "VIOLATED", 100.0 * overhead, adamw_t, mgpo_t));
}

static void criterion_6() {
  Rng rng(606);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    // Random gradient state over a random shape set.
    const std::size_t n_mats = 1 + rng.next_u64() % 3;
    ParamBuffer grad;
    for (std::size_t i = 0; i < n_mats; ++i) {
      Matrix g(2 + rng.next_u64() % 6, 2 + rng.next_u64() % 6);
      for (double& v : g.data) v = rng.normal();
      grad.push_back(std::move(g));
    }
    const double rho = 0.01 + rng.uniform();
    // MGPO perturbation with m := g and g_bar := 1.
    ApnState st{1.0, 0.9, true, false};
    MgpoConfig pc;
    pc.rho = rho;
    Perturbation mgpo_p = compute_perturbation(pc, grad, st);
    // SAM first stage: rho * g / ||g||.
    const double gn = global_l2_norm(grad);
    double worst_here = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i)
      for (std::size_t j = 0; j < grad[i].data.size(); ++j) {
        const double sam = rho * grad[i].data[j] / gn;
        worst_here = std::max(worst_here, std::abs(mgpo_p.epsilon[i].data[j] - sam));
      }
    worst = std::max(worst, worst_here);
  }
  report(6, "SAM-reduction cross-check", worst < 1e-12,
         fmt("max elementwise |mgpo - sam| = %.2e over 100 states", worst));
}

struct PresetOutcomes {
  std::vector<double> adamw_rebound, mgpo_rebound, noapn_rebound;
  std::vector<double> adamw_final, mgpo_final;
  std::vector<PlotSeries> curves;
};

static PresetOutcomes run_preset_matrix(const ExperimentConfig& preset,
                                        const std::string& scratch) {
  PresetOutcomes out;
  for (std::uint64_t seed : preset.seeds) {
    SeedOutcome a = run_preset(preset, OptimizerKind::kAdamW, seed,
                               scratch + "/c7_adamw_s" + std::to_string(seed));
    SeedOutcome m = run_preset(preset, OptimizerKind::kMgpo, seed,
                               scratch + "/c7_mgpo_s" + std::to_string(seed));
    SeedOutcome n = run_preset(preset, OptimizerKind::kMgpoNoApn, seed,
                               scratch + "/c7_noapn_s" + std::to_string(seed));
    out.adamw_rebound.push_back(a.rebound);
    out.mgpo_rebound.push_back(m.rebound);
    out.noapn_rebound.push_back(n.rebound);
    out.adamw_final.push_back(a.final_loss);
    out.mgpo_final.push_back(m.final_loss);
    auto to_series = [&](const char* name, const SeedOutcome& s) {
      PlotSeries ps;
      ps.name = std::string(name) + " seed " + std::to_string(seed);
      for (std::size_t i = 0; i < s.curve.size(); ++i) {
        ps.xs.push_back(static_cast<double>(i));
        ps.ys.push_back(s.curve[i]);
      }
      return ps;
    };
    out.curves.push_back(to_series("adamw", a));
    out.curves.push_back(to_series("mgpo", m));
    out.curves.push_back(to_series("mgpo-no-apn", n));
  }
  return out;
}

static double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

static void criterion_7_and_8(const ExperimentConfig& preset, const std::string& scratch) {
  PresetOutcomes oc = run_preset_matrix(preset, scratch);
  const double a_reb = mean(oc.adamw_rebound);
  const double m_reb = mean(oc.mgpo_rebound);
  const double n_reb = mean(oc.noapn_rebound);
  const double a_fin = mean(oc.adamw_final);
  const double m_fin = mean(oc.mgpo_final);

  const bool instability = a_reb > 0.0;
  const bool stabilized = m_reb <= a_reb;
  const bool quality = m_fin <= 1.05 * a_fin;
  report(7, "stability demonstration", instability && stabilized && quality,
         fmt("mean rebound adamw=%.4f mgpo=%.4f; mean final loss adamw=%.6g mgpo=%.6g",
             a_reb, m_reb, a_fin, m_fin));

  const bool ordering = m_reb <= n_reb && n_reb <= a_reb;
  const std::string svg_path = scratch + "/ablation_curves.svg";
  write_loss_svg(svg_path, "ablation smoothed loss curves", oc.curves);
  // Soft criterion: report ordering either way, with curves attached.
  std::printf("[%s] criterion 8: ablation ordering (soft) — mean rebound mgpo=%.4f "
              "no-apn=%.4f adamw=%.4f; curves: %s\n",
              ordering ? "PASS" : "PASS*", m_reb, n_reb, a_reb, svg_path.c_str());
  if (!ordering)
    std::printf("    note: ordering violated at synthetic scale; reported per contract, "
                "not a hard failure\n");
}

static void criterion_9() {
  Rng noise_rng(909);
  Rng m_rng(910);
  double sum_abs_cos = 0.0;
  const int steps = 1000;
  std::vector<std::pair<std::size_t, std::size_t>> shapes{{8, 8}, {4, 8}};
  for (int t = 0; t < steps; ++t) {
    ParamBuffer m;
    for (auto [r, c] : shapes) {
      Matrix mm(r, c);
      for (double& v : mm.data) v = m_rng.normal();
      m.push_back(std::move(mm));
    }
    ParamBuffer dir = unit_gaussian_direction(noise_rng, shapes);
    const double cosv = param_dot(dir, m) / global_l2_norm(m);
    sum_abs_cos += std::abs(cosv);
  }
  const double mean_abs = sum_abs_cos / steps;
  report(9, "noise baseline isotropy", mean_abs < 0.1,
         fmt("mean |cosine(noise, momentum)| = %.4f over %d draws", mean_abs, steps));
}

static void criterion_10(const ExperimentConfig& preset, const std::string& scratch) {
  ExperimentConfig cfg = preset;
  cfg.steps = 120;
  cfg.checkpoint_every = 40;
  auto read_all = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  train_one(cfg, 2, scratch + "/c10_a");
  train_one(cfg, 2, scratch + "/c10_b");
  const bool identical = read_all(scratch + "/c10_a/telemetry.csv") ==
                         read_all(scratch + "/c10_b/telemetry.csv");

  ExperimentConfig part = cfg;
  part.steps = 40;
  train_one(part, 2, scratch + "/c10_r");
  part.steps = 80;
  train_one(part, 2, scratch + "/c10_r", /*resume=*/true);
  part.steps = 120;
  train_one(part, 2, scratch + "/c10_r", /*resume=*/true);
  // The interruption is simulated by shrinking cfg.steps, which changes the
  // config hash in the header comment; compare everything after that line.
  auto drop_header = [](std::string s) { return s.substr(s.find('\n') + 1); };
  const bool resume_ok = drop_header(read_all(scratch + "/c10_r/telemetry.csv")) ==
                         drop_header(read_all(scratch + "/c10_a/telemetry.csv"));
  report(10, "determinism & resume", identical && resume_ok,
         fmt("repeat run %s; twice-resumed run %s", identical ? "byte-identical" : "DIFFERS",
             resume_ok ? "byte-identical" : "DIFFERS"));
}

int main() {
  const std::string scratch = (fs::temp_directory_path() / "mgpo_acceptance").string();
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  ExperimentConfig preset = parse_config_text(preset_text("lowrank-default"));

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5(preset, scratch);
  criterion_6();
  criterion_7_and_8(preset, scratch);
  criterion_9();
  criterion_10(preset, scratch);

  std::printf("%s (%d failed)\n", g_failures == 0 ? "ALL ACCEPTANCE CRITERIA PASSED"
                                                  : "ACCEPTANCE FAILURES PRESENT",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
