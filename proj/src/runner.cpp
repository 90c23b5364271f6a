#include "mgpo/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "mgpo/checkpoint.hpp"
#include "mgpo/plot.hpp"

namespace fs = std::filesystem;

namespace mgpo {

namespace {

constexpr double kDivergenceLossLimit = 1e6;
constexpr int kDivergenceStreak = 5;

std::string fmt_f64(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::pair<std::size_t, std::size_t> task_io_dims(const TaskSpec& spec) {
  if (spec.kind == TaskKind::kTwoMoons) return {2, 2};
  return {spec.in_dim, spec.out_dim};
}

std::uint64_t model_stream(std::uint64_t seed) { return Rng(seed).split(0).seed(); }

}  // namespace

MlpModel build_model(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto [in_dim, out_dim] = task_io_dims(cfg.task);
  std::vector<std::size_t> dims;
  dims.push_back(in_dim);
  for (std::size_t h : cfg.hidden_dims) dims.push_back(h);
  dims.push_back(out_dim);

  Rng rng(model_stream(seed));
  MlpModel model;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t n = dims[i], m = dims[i + 1];
    if (cfg.zero_base) {
      const Matrix zero = Matrix::zeros(m, n);
      model.layers.push_back(lora_init(rng, m, n, cfg.rank, cfg.alpha, &zero));
    } else {
      model.layers.push_back(lora_init(rng, m, n, cfg.rank, cfg.alpha));
    }
  }
  return model;
}

RunResult train_one(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& run_dir,
                    bool resume) {
  const auto t_start = std::chrono::steady_clock::now();
  const TaskData task = make_task(cfg.task);
  const std::size_t bpe =
      (task.train.inputs.rows + cfg.batch_size - 1) / cfg.batch_size;  // batches per epoch

  MlpModel model;
  AdamWState adamw;
  ApnState apn;
  Rng noise_rng = Rng(seed).split(1);
  long start_step = 0;

  const std::string ckpt_path = run_dir.empty() ? "" : run_dir + "/checkpoint.txt";
  bool resumed = false;
  if (resume && !ckpt_path.empty() && fs::exists(ckpt_path)) {
    TrainCheckpoint ckpt = load_checkpoint(ckpt_path);
    model = std::move(ckpt.model);
    adamw = std::move(ckpt.adamw);
    apn = ckpt.apn;
    noise_rng.restore(ckpt.rng_state, ckpt.rng_has_spare, ckpt.rng_spare);
    start_step = ckpt.step;
    resumed = true;
  } else {
    model = build_model(cfg, seed);
    ParamVector params = trainable_params(model);
    adamw = make_adamw(params, cfg.lr);
    adamw.beta1 = cfg.mu;
    adamw.beta2 = cfg.beta2;
    adamw.eps = cfg.eps;
    adamw.weight_decay = cfg.weight_decay;
    adamw.momentum_rule = cfg.momentum_rule;
    apn.beta = cfg.ema_beta;
    apn.frozen = cfg.optimizer == OptimizerKind::kMgpoNoApn;
  }

  const Schedule schedule{cfg.schedule, cfg.lr, cfg.warmup_ratio, cfg.steps};
  const MgpoConfig mgpo_cfg{cfg.rho, cfg.momentum_rule, 1e-12, 1e-12};

  std::ofstream telemetry;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    telemetry.open(run_dir + "/telemetry.csv", resumed ? std::ios::app : std::ios::trunc);
    if (!telemetry) throw UsageError("train_one: cannot open telemetry in " + run_dir);
    if (!resumed) {
      char head[128];
      std::snprintf(head, sizeof head, "# mgpo-telemetry v1 config=%016llx seed=%llu\n",
                    static_cast<unsigned long long>(config_hash(cfg)),
                    static_cast<unsigned long long>(seed));
      telemetry << head << "step,loss,grad_norm,g_bar,perturb_norm,grad_evals,lr\n";
    }
    if (cfg.export_dataset && !resumed) {
      dataset_to_csv(task.train, run_dir + "/train.csv");
      dataset_to_csv(task.eval, run_dir + "/eval.csv");
    }
  }

  RunResult result;
  result.seed = seed;
  ParamVector params = trainable_params(model);

  std::vector<Batch> batches;
  std::size_t batches_epoch = static_cast<std::size_t>(-1);
  int bad_streak = 0;

  auto save_ckpt = [&](long step) {
    if (ckpt_path.empty()) return;
    TrainCheckpoint ckpt;
    ckpt.step = step;
    ckpt.model = model;
    ckpt.adamw = adamw;
    ckpt.apn = apn;
    ckpt.rng_state = noise_rng.state();
    ckpt.rng_has_spare = noise_rng.has_spare();
    ckpt.rng_spare = noise_rng.spare();
    ckpt.run_seed = seed;
    save_checkpoint(ckpt, ckpt_path);
  };

  for (long step = start_step; step < cfg.steps; ++step) {
    const std::size_t epoch = static_cast<std::size_t>(step) / bpe;
    if (epoch != batches_epoch) {
      Rng epoch_rng = Rng(seed).split(2 + epoch);
      batches = epoch_batches(task.train, cfg.batch_size, epoch_rng);
      batches_epoch = epoch;
    }
    const Batch& batch = batches[static_cast<std::size_t>(step) % bpe];

    adamw.lr = schedule.lr_at(step);
    StepRow row;
    row.step = step;
    row.lr = adamw.lr;
    bool bad = false;
    try {
      StepReport report;
      switch (cfg.optimizer) {
        case OptimizerKind::kAdamW:
          report = adamw_step(model, batch, task.train.loss, adamw);
          break;
        case OptimizerKind::kMgpo:
        case OptimizerKind::kMgpoNoApn:
          report = mgpo_step(model, batch, task.train.loss, adamw, apn, mgpo_cfg);
          break;
        case OptimizerKind::kSam:
          report = sam_step(model, batch, task.train.loss, adamw, cfg.rho);
          break;
        case OptimizerKind::kNoise:
          report = noise_step(model, batch, task.train.loss, adamw, cfg.rho, noise_rng);
          break;
      }
      row.loss = report.loss;
      row.grad_norm = report.grad_norm;
      row.g_bar = report.g_bar;
      row.perturb_norm = report.perturb_norm;
      row.grad_evals = report.grad_evals;
      bad = !(report.loss <= kDivergenceLossLimit);
    } catch (const NumericError&) {
      row.loss = std::nan("");
      row.grad_norm = std::nan("");
      row.grad_evals = 0;
      bad = true;
    }

    result.rows.push_back(row);
    if (telemetry.is_open()) {
      telemetry << row.step << "," << fmt_f64(row.loss) << "," << fmt_f64(row.grad_norm) << ","
                << fmt_f64(row.g_bar) << "," << fmt_f64(row.perturb_norm) << ","
                << row.grad_evals << "," << fmt_f64(row.lr) << "\n";
    }

    bad_streak = bad ? bad_streak + 1 : 0;
    if (bad_streak >= kDivergenceStreak) {
      result.diverged = true;
      break;
    }
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      save_ckpt(step + 1);
    }
  }

  if (!result.diverged && !result.rows.empty()) {
    LossCurve curve;
    for (const StepRow& r : result.rows) curve.losses.push_back(r.loss);
    SummaryConfig scfg;
    scfg.smooth_window = cfg.smooth_window;
    scfg.sharpness_rho = cfg.rho > 0 ? cfg.rho : 0.05;
    scfg.sharpness_seed = seed;
    result.summary = summarize(curve, model, task.train, scfg);
  }

  if (!run_dir.empty()) {
    if (!result.diverged) save_ckpt(cfg.steps);
    save_model(model, run_dir + "/model.txt");
    std::ofstream sum(run_dir + "/summary.csv");
    sum << summary_csv_header();
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    sum << summary_csv_row(cfg, "seed_" + std::to_string(seed), result);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

std::string summary_csv_header() {
  return "run,seed,optimizer,rank,lr,steps,diverged,rebound,rebound_raw,final_loss,best_loss,"
         "steps_to_best,sharpness,wall_seconds\n";
}

std::string summary_csv_row(const ExperimentConfig& cfg, const std::string& label,
                            const RunResult& r) {
  std::ostringstream out;
  out << label << "," << r.seed << "," << optimizer_name(cfg.optimizer) << "," << cfg.rank << ","
      << fmt_f64(cfg.lr) << "," << r.rows.size() << "," << (r.diverged ? 1 : 0) << ","
      << fmt_f64(r.summary.rebound) << "," << fmt_f64(r.summary.rebound_raw) << ","
      << fmt_f64(r.summary.final_loss) << "," << fmt_f64(r.summary.best_loss) << ","
      << r.summary.steps_to_best << "," << fmt_f64(r.summary.sharpness) << ","
      << fmt_f64(r.wall_seconds) << "\n";
  return out.str();
}

namespace {

std::vector<RunResult> run_all_seeds(const ExperimentConfig& cfg,
                                     const std::vector<std::uint64_t>& seeds,
                                     const RunOptions& opts) {
  std::vector<RunResult> results(seeds.size());
  const int jobs = std::max(1, opts.jobs);
  std::vector<std::future<RunResult>> futures(seeds.size());
  std::size_t next = 0, launched = 0, done = 0;
  // Bounded pool: at most `jobs` seeds in flight.
  while (done < seeds.size()) {
    while (launched - done < static_cast<std::size_t>(jobs) && next < seeds.size()) {
      const std::uint64_t seed = seeds[next];
      const std::string dir = cfg.out_dir + "/seed_" + std::to_string(seed);
      futures[next] = std::async(std::launch::async, [&cfg, seed, dir, &opts] {
        return train_one(cfg, seed, dir, opts.resume);
      });
      ++next;
      ++launched;
    }
    results[done] = futures[done].get();
    ++done;
  }
  return results;
}

void write_aggregate_summary(const ExperimentConfig& cfg, const std::vector<RunResult>& results) {
  std::ofstream sum(cfg.out_dir + "/summary.csv");
  char head[128];
  std::snprintf(head, sizeof head, "# mgpo-summary v1 config=%016llx\n",
                static_cast<unsigned long long>(config_hash(cfg)));
  sum << head << summary_csv_header();
  std::vector<double> rebounds, finals;
  for (const RunResult& r : results) {
    std::ostringstream label;
    label << optimizer_name(cfg.optimizer) << "_seed_" << r.seed;
    sum << summary_csv_row(cfg, label.str(), r);
    if (!r.diverged) {
      rebounds.push_back(r.summary.rebound);
      finals.push_back(r.summary.final_loss);
    }
  }
  auto mean_std = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair<double, double>{std::nan(""), std::nan("")};
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::pair<double, double>{mean, std::sqrt(var)};
  };
  const auto [rb_mean, rb_std] = mean_std(rebounds);
  const auto [fl_mean, fl_std] = mean_std(finals);
  sum << "# aggregate over " << rebounds.size() << " converged seeds\n";
  sum << "# rebound_mean=" << fmt_f64(rb_mean) << " rebound_std=" << fmt_f64(rb_std)
      << " final_loss_mean=" << fmt_f64(fl_mean) << " final_loss_std=" << fmt_f64(fl_std) << "\n";
}

void plot_run(const ExperimentConfig& cfg, const std::vector<RunResult>& results) {
  std::vector<PlotSeries> series;
  for (const RunResult& r : results) {
    if (r.rows.size() < 2) continue;
    LossCurve curve;
    for (const StepRow& row : r.rows) curve.losses.push_back(row.loss);
    const int window = std::min<int>(cfg.smooth_window, static_cast<int>(curve.losses.size()));
    const LossCurve sm = smooth(curve, window);
    PlotSeries s;
    s.name = optimizer_name(cfg.optimizer) + " seed " + std::to_string(r.seed);
    for (std::size_t i = 0; i < sm.losses.size(); ++i) {
      s.xs.push_back(static_cast<double>(r.rows[i].step));
      s.ys.push_back(sm.losses[i]);
    }
    series.push_back(std::move(s));
  }
  if (!series.empty()) {
    write_loss_svg(cfg.out_dir + "/run.svg", "smoothed training loss (" +
                   optimizer_name(cfg.optimizer) + ")", series);
  }
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg_in, const RunOptions& opts) {
  ExperimentConfig cfg = cfg_in;
  if (opts.seed_override) cfg.seeds = {*opts.seed_override};
  if (cfg.rank_alpha_tied()) {
    std::cerr << "note: rank == alpha (figure convention r = alpha)\n";
  }
  try {
    fs::create_directories(cfg.out_dir);
    const std::vector<RunResult> results = run_all_seeds(cfg, cfg.seeds, opts);
    write_aggregate_summary(cfg, results);
    if (opts.plot) plot_run(cfg, results);
    std::size_t diverged = 0;
    for (const RunResult& r : results) diverged += r.diverged ? 1 : 0;
    if (diverged == results.size()) return kExitAllDiverged;
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIoError;
  }
}

std::vector<StepRow> read_telemetry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("read_telemetry: cannot open " + path);
  std::vector<StepRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
    StepRow row;
    std::stringstream ss(line);
    std::string field;
    auto next = [&] {
      if (!std::getline(ss, field, ',')) throw FormatError("telemetry: short row in " + path);
      return field;
    };
    row.step = std::stol(next());
    row.loss = std::stod(next());
    row.grad_norm = std::stod(next());
    row.g_bar = std::stod(next());
    row.perturb_norm = std::stod(next());
    row.grad_evals = std::stoi(next());
    row.lr = std::stod(next());
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct LoadedRun {
  std::string name;
  std::vector<PlotSeries> seed_series;  // smoothed, per seed
  std::vector<std::string> summary_rows;
  double mean_rebound = 0.0;
  long min_step = 0, max_step = 0;
};

LoadedRun load_run_dir(const std::string& dir) {
  LoadedRun run;
  run.name = fs::path(dir).filename().string();
  if (run.name.empty()) run.name = dir;
  bool first = true;
  double rebound_sum = 0.0;
  int rebound_count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string sub = entry.path().filename().string();
    if (sub.rfind("seed_", 0) != 0) continue;
    const std::string telem = entry.path().string() + "/telemetry.csv";
    if (!fs::exists(telem)) continue;
    std::vector<StepRow> rows = read_telemetry(telem);
    if (rows.size() < 2) continue;
    LossCurve curve;
    for (const StepRow& r : rows) curve.losses.push_back(r.loss);
    const int window = std::min<int>(25, static_cast<int>(curve.losses.size()));
    const LossCurve sm = smooth(curve, window);
    PlotSeries s;
    s.name = run.name + "/" + sub;
    for (std::size_t i = 0; i < sm.losses.size(); ++i) {
      s.xs.push_back(static_cast<double>(rows[i].step));
      s.ys.push_back(sm.losses[i]);
    }
    if (first) {
      run.min_step = rows.front().step;
      run.max_step = rows.back().step;
      first = false;
    } else {
      run.min_step = std::min(run.min_step, rows.front().step);
      run.max_step = std::max(run.max_step, rows.back().step);
    }
    run.seed_series.push_back(std::move(s));

    const std::string sum_path = entry.path().string() + "/summary.csv";
    if (fs::exists(sum_path)) {
      std::ifstream sin(sum_path);
      std::string line;
      std::getline(sin, line);  // header
      while (std::getline(sin, line)) {
        if (!line.empty() && line[0] != '#') {
          run.summary_rows.push_back(run.name + "/" + line);
          // rebound is column 8 (0-based 7)
          std::stringstream ss(line);
          std::string field;
          for (int i = 0; i <= 7 && std::getline(ss, field, ','); ++i) {
          }
          try {
            rebound_sum += std::stod(field);
            ++rebound_count;
          } catch (const std::exception&) {
          }
        }
      }
    }
  }
  if (run.seed_series.empty()) throw UsageError("compare: no completed runs in " + dir);
  run.mean_rebound = rebound_count > 0 ? rebound_sum / rebound_count : 0.0;
  return run;
}

}  // namespace

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir, bool plot) {
  if (run_dirs.size() < 2) {
    std::cerr << "compare: need at least two run directories\n";
    return kExitConfigError;
  }
  try {
    std::vector<LoadedRun> runs;
    for (const std::string& dir : run_dirs) runs.push_back(load_run_dir(dir));

    long lo = runs[0].min_step, hi = runs[0].max_step;
    for (const LoadedRun& r : runs) {
      lo = std::max(lo, r.min_step);
      hi = std::min(hi, r.max_step);
    }
    if (lo > hi) {
      std::cerr << "compare: step ranges are disjoint\n";
      return kExitConfigError;
    }

    fs::create_directories(out_dir);
    std::sort(runs.begin(), runs.end(),
              [](const LoadedRun& a, const LoadedRun& b) { return a.mean_rebound < b.mean_rebound; });
    std::ofstream table(out_dir + "/comparison.csv");
    table << summary_csv_header();
    for (const LoadedRun& r : runs)
      for (const std::string& row : r.summary_rows) table << row << "\n";

    if (plot) {
      std::vector<PlotSeries> all;
      for (const LoadedRun& r : runs)
        for (const PlotSeries& s : r.seed_series) all.push_back(s);
      write_loss_svg(out_dir + "/comparison.svg", "smoothed training loss", all);
    }
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIoError;
  }
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, const RunOptions& opts) {
  if (axis != "rank" && axis != "lr") {
    std::cerr << "sweep: axis must be rank or lr\n";
    return kExitConfigError;
  }
  if (values.empty()) {
    std::cerr << "sweep: no axis values\n";
    return kExitConfigError;
  }
  for (double v : values) {
    if (v <= 0 || (axis == "rank" && v != std::floor(v))) {
      std::cerr << "sweep: invalid " << axis << " value " << v << "\n";
      return kExitConfigError;
    }
  }
  try {
    fs::create_directories(cfg.out_dir);
    std::ofstream table(cfg.out_dir + "/sweep.csv");
    table << axis << ",seeds,converged,rebound_mean,final_loss_mean\n";
    for (double v : values) {
      ExperimentConfig sub = cfg;
      std::ostringstream name;
      if (axis == "rank") {
        sub.rank = static_cast<std::size_t>(v);
        if (cfg.rank_alpha_tied()) sub.alpha = v;  // keep the r = alpha convention
        name << "rank_" << sub.rank;
      } else {
        sub.lr = v;
        name << "lr_" << v;
      }
      sub.out_dir = cfg.out_dir + "/" + name.str();
      if (opts.seed_override) sub.seeds = {*opts.seed_override};
      fs::create_directories(sub.out_dir);
      const std::vector<RunResult> results = run_all_seeds(sub, sub.seeds, opts);
      write_aggregate_summary(sub, results);
      if (opts.plot) plot_run(sub, results);
      double rb = 0, fl = 0;
      int ok = 0;
      for (const RunResult& r : results) {
        if (r.diverged) continue;
        rb += r.summary.rebound;
        fl += r.summary.final_loss;
        ++ok;
      }
      table << (axis == "rank" ? fmt_f64(std::floor(v)) : fmt_f64(v)) << ","
            << results.size() << "," << ok << ","
            << (ok ? fmt_f64(rb / ok) : "nan") << "," << (ok ? fmt_f64(fl / ok) : "nan") << "\n";
    }
    return kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIoError;
  }
}

}  // namespace mgpo
