#include "mgpo/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

namespace mgpo {

static Matrix gaussian_inputs(Rng& rng, std::size_t n, std::size_t dim) {
  return normal_fill(rng, n, dim, 0.0, 1.0);
}

static void add_noise(Matrix& targets, Rng& rng, double noise_std) {
  if (noise_std <= 0.0) return;
  for (double& x : targets.data) x += noise_std * rng.normal();
}

TaskData make_teacher_regression(const TaskSpec& spec) {
  Rng rng(spec.seed);
  MlpModel teacher;
  teacher.layers.push_back(lora_init(rng, spec.hidden, spec.in_dim, 1, 1.0));
  teacher.layers.push_back(lora_init(rng, spec.out_dim, spec.hidden, 1, 1.0));

  TaskData task;
  task.teacher = teacher;
  for (Dataset* split : {&task.train, &task.eval}) {
    const std::size_t n = split == &task.train ? spec.n_train : spec.n_eval;
    split->inputs = gaussian_inputs(rng, n, spec.in_dim);
    split->targets = model_forward(teacher, split->inputs);
    add_noise(split->targets, rng, spec.noise_std);
    split->loss = LossKind::kMse;
  }
  return task;
}

TaskData make_lowrank_recovery(const TaskSpec& spec) {
  if (spec.true_rank > std::min(spec.in_dim, spec.out_dim)) {
    throw UsageError("make_lowrank_recovery: true_rank exceeds min(dims)");
  }
  Rng rng(spec.seed);
  // Rank-k map, factors scaled so targets stay O(1).
  const Matrix u = normal_fill(rng, spec.out_dim, spec.true_rank, 0.0,
                               1.0 / std::sqrt(static_cast<double>(spec.true_rank)));
  const Matrix v = normal_fill(rng, spec.true_rank, spec.in_dim, 0.0,
                               1.0 / std::sqrt(static_cast<double>(spec.in_dim)));
  TaskData task;
  task.true_map = matmul(u, v);  // out_dim x in_dim
  task.true_rank = spec.true_rank;
  for (Dataset* split : {&task.train, &task.eval}) {
    const std::size_t n = split == &task.train ? spec.n_train : spec.n_eval;
    split->inputs = gaussian_inputs(rng, n, spec.in_dim);
    split->targets = matmul(split->inputs, transpose(task.true_map));
    add_noise(split->targets, rng, spec.noise_std);
    split->loss = LossKind::kMse;
  }
  return task;
}

TaskData make_two_moons(const TaskSpec& spec) {
  if (spec.n_train % 2 != 0) throw UsageError("make_two_moons: n_train must be even");
  Rng rng(spec.seed);
  TaskData task;
  for (Dataset* split : {&task.train, &task.eval}) {
    std::size_t n = split == &task.train ? spec.n_train : spec.n_eval;
    if (n % 2 != 0) n += 1;
    split->inputs = Matrix(n, 2);
    split->targets = Matrix(n, 2);  // one-hot
    for (std::size_t i = 0; i < n; ++i) {
      const double t = std::numbers::pi * rng.uniform();
      double x, y;
      if (i % 2 == 0) {
        x = std::cos(t);
        y = std::sin(t);
        split->targets(i, 0) = 1.0;
      } else {
        x = 1.0 - std::cos(t);
        y = 0.5 - std::sin(t);
        split->targets(i, 1) = 1.0;
      }
      split->inputs(i, 0) = x + spec.noise_std * rng.normal();
      split->inputs(i, 1) = y + spec.noise_std * rng.normal();
    }
    split->loss = LossKind::kSoftmaxCrossEntropy;
  }
  return task;
}

TaskData make_task(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::kTeacherRegression: return make_teacher_regression(spec);
    case TaskKind::kLowrankRecovery: return make_lowrank_recovery(spec);
    case TaskKind::kTwoMoons: return make_two_moons(spec);
  }
  throw UsageError("make_task: unknown task kind");
}

std::vector<Batch> epoch_batches(const Dataset& data, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw UsageError("epoch_batches: batch_size must be >= 1");
  const std::size_t n = data.inputs.rows;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the portable generator.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    Batch b;
    b.inputs = Matrix(count, data.inputs.cols);
    b.targets = Matrix(count, data.targets.cols);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t src = order[start + i];
      for (std::size_t j = 0; j < data.inputs.cols; ++j) b.inputs(i, j) = data.inputs(src, j);
      for (std::size_t j = 0; j < data.targets.cols; ++j) b.targets(i, j) = data.targets(src, j);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void dataset_to_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("dataset_to_csv: cannot open " + path);
  for (std::size_t j = 0; j < data.inputs.cols; ++j) out << "x" << j << ",";
  for (std::size_t j = 0; j < data.targets.cols; ++j) {
    out << "y" << j << (j + 1 < data.targets.cols ? "," : "\n");
  }
  char buf[32];
  for (std::size_t i = 0; i < data.inputs.rows; ++i) {
    for (std::size_t j = 0; j < data.inputs.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.inputs(i, j));
      out << buf << ",";
    }
    for (std::size_t j = 0; j < data.targets.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.targets(i, j));
      out << buf << (j + 1 < data.targets.cols ? "," : "\n");
    }
  }
}

}  // namespace mgpo
