#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgpo/lora.hpp"

namespace mgpo {

enum class TaskKind { kTeacherRegression, kTwoMoons, kLowrankRecovery };

struct TaskSpec {
  TaskKind kind = TaskKind::kLowrankRecovery;
  std::size_t in_dim = 32;
  std::size_t out_dim = 32;
  std::size_t hidden = 16;     // teacher-regression only
  std::size_t true_rank = 4;   // lowrank-recovery only
  double noise_std = 0.0;
  std::size_t n_train = 256;
  std::size_t n_eval = 256;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix inputs;
  Matrix targets;
  LossKind loss = LossKind::kMse;
};

struct TaskData {
  Dataset train;
  Dataset eval;
  std::optional<MlpModel> teacher;  // teacher-regression
  Matrix true_map;                  // lowrank-recovery: the rank-k weight
  std::size_t true_rank = 0;
};

TaskData make_teacher_regression(const TaskSpec& spec);
TaskData make_lowrank_recovery(const TaskSpec& spec);
TaskData make_two_moons(const TaskSpec& spec);
TaskData make_task(const TaskSpec& spec);

// One epoch of seeded shuffled batches; the last partial batch is kept.
std::vector<Batch> epoch_batches(const Dataset& data, std::size_t batch_size, Rng& rng);

void dataset_to_csv(const Dataset& data, const std::string& path);

}  // namespace mgpo
