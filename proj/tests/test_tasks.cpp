#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#ifdef MGPO_HAVE_EIGEN
#include <Eigen/SVD>
#endif

#include "mgpo/optim.hpp"
#include "mgpo/tasks.hpp"

using namespace mgpo;

TEST_CASE("teacher regression: realizable at zero noise, deterministic") {
  TaskSpec spec;
  spec.kind = TaskKind::kTeacherRegression;
  spec.in_dim = 4;
  spec.out_dim = 3;
  spec.hidden = 6;
  spec.noise_std = 0.0;
  spec.n_train = 32;
  spec.n_eval = 32;
  spec.seed = 5;
  TaskData task = make_teacher_regression(spec);
  // The teacher itself reaches train loss 0.
  Batch full{task.train.inputs, task.train.targets};
  CHECK(forward_loss(*task.teacher, full, LossKind::kMse).loss == 0.0);

  TaskData again = make_teacher_regression(spec);
  CHECK(task.train.inputs == again.train.inputs);
  CHECK(task.eval.targets == again.eval.targets);
}

TEST_CASE("teacher regression: eval loss of the teacher equals the noise variance") {
  TaskSpec spec;
  spec.kind = TaskKind::kTeacherRegression;
  spec.in_dim = 4;
  spec.out_dim = 1;  // one target column: mean row loss == noise_std^2
  spec.hidden = 6;
  spec.noise_std = 0.3;
  spec.n_train = 16;
  spec.n_eval = 10000;
  spec.seed = 21;
  TaskData task = make_teacher_regression(spec);
  Batch full{task.eval.inputs, task.eval.targets};
  const double loss = forward_loss(*task.teacher, full, LossKind::kMse).loss;
  CHECK(loss == doctest::Approx(spec.noise_std * spec.noise_std).epsilon(0.10));
}

TEST_CASE("lowrank recovery: exact fit at matching rank") {
  TaskSpec spec;
  spec.kind = TaskKind::kLowrankRecovery;
  spec.in_dim = 8;
  spec.out_dim = 8;
  spec.true_rank = 3;
  spec.noise_std = 0.0;
  spec.n_train = 64;
  spec.seed = 9;
  TaskData task = make_lowrank_recovery(spec);
  CHECK(task.true_rank == 3);
  // Noiseless targets are exactly the rank-3 map, so a rank-3 adapter
  // carrying the generator's own factors reaches loss 0.
  Matrix expect = matmul(task.train.inputs, transpose(task.true_map));
  CHECK(expect == task.train.targets);

  TaskSpec bad = spec;
  bad.true_rank = 9;
  CHECK_THROWS_AS(make_lowrank_recovery(bad), UsageError);
}

#ifdef MGPO_HAVE_EIGEN
TEST_CASE("lowrank recovery: under-ranked floor from the SVD oracle") {
  TaskSpec spec;
  spec.kind = TaskKind::kLowrankRecovery;
  spec.in_dim = 10;
  spec.out_dim = 10;
  spec.true_rank = 4;
  spec.noise_std = 0.0;
  spec.n_train = 128;
  spec.seed = 13;
  TaskData task = make_lowrank_recovery(spec);
  const std::size_t adapter_rank = 2;  // below true rank

  // Empirical loss of a rank-r predictor W-hat:
  //   (1/N) ||X (W_true - W_hat)^T||_F^2,  minimized over rank-r W-hat.
  // With X = QR, the minimum is (1/N) * sum_{i>r} sigma_i(R W_true^T)^2.
  const std::size_t n = task.train.inputs.rows;
  Eigen::MatrixXd x(n, spec.in_dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < spec.in_dim; ++j) x(i, j) = task.train.inputs(i, j);
  Eigen::MatrixXd w(spec.out_dim, spec.in_dim);
  for (std::size_t i = 0; i < spec.out_dim; ++i)
    for (std::size_t j = 0; j < spec.in_dim; ++j) w(i, j) = task.true_map(i, j);

  Eigen::MatrixXd target = x * w.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(target);
  double floor = 0.0;
  for (Eigen::Index i = adapter_rank; i < svd.singularValues().size(); ++i) {
    floor += svd.singularValues()(i) * svd.singularValues()(i);
  }
  floor /= static_cast<double>(n);
  CHECK(floor > 0.0);  // Eckart-Young residual is strictly positive below true rank

  // Train an under-ranked adapter hard; it must not beat the floor.
  Rng rng(2);
  const Matrix zero = Matrix::zeros(spec.out_dim, spec.in_dim);
  MlpModel model;
  model.layers.push_back(
      lora_init(rng, spec.out_dim, spec.in_dim, adapter_rank, static_cast<double>(adapter_rank), &zero));
  ParamVector params = trainable_params(model);
  AdamWState st = make_adamw(params, 0.02);
  Batch full{task.train.inputs, task.train.targets};
  double last = 0.0;
  for (int step = 0; step < 3000; ++step) last = adamw_step(model, full, LossKind::kMse, st).loss;
  CHECK(last >= floor * (1.0 - 1e-9));
  CHECK(last <= floor * 1.10);  // and it gets close after long training
}
#endif

TEST_CASE("two moons: exact label balance and reproducibility") {
  TaskSpec spec;
  spec.kind = TaskKind::kTwoMoons;
  spec.noise_std = 0.1;
  spec.n_train = 200;
  spec.n_eval = 100;
  spec.seed = 3;
  TaskData task = make_two_moons(spec);
  std::size_t class0 = 0;
  for (std::size_t i = 0; i < task.train.targets.rows; ++i) {
    class0 += task.train.targets(i, 0) == 1.0 ? 1 : 0;
  }
  CHECK(class0 == task.train.targets.rows / 2);
  CHECK(task.train.loss == LossKind::kSoftmaxCrossEntropy);

  TaskData again = make_two_moons(spec);
  CHECK(task.train.inputs == again.train.inputs);

  TaskSpec odd = spec;
  odd.n_train = 7;
  CHECK_THROWS_AS(make_two_moons(odd), UsageError);
}

TEST_CASE("two moons: an over-provisioned mlp separates the classes") {
  TaskSpec spec;
  spec.kind = TaskKind::kTwoMoons;
  spec.noise_std = 0.1;
  spec.n_train = 400;
  spec.n_eval = 400;
  spec.seed = 17;
  TaskData task = make_two_moons(spec);

  Rng rng(1);
  MlpModel model;
  model.layers.push_back(lora_init(rng, 16, 2, 2, 2.0));
  model.layers.push_back(lora_init(rng, 16, 16, 2, 2.0));
  model.layers.push_back(lora_init(rng, 2, 16, 2, 2.0));
  ParamVector params = trainable_params(model);
  AdamWState st = make_adamw(params, 0.02);
  for (int epoch = 0; epoch < 60; ++epoch) {
    Rng erng = Rng(spec.seed).split(100 + epoch);
    for (const Batch& b : epoch_batches(task.train, 32, erng)) {
      adamw_step(model, b, LossKind::kSoftmaxCrossEntropy, st);
    }
  }
  const Matrix logits = model_forward(model, task.eval.inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int pred = logits(i, 0) >= logits(i, 1) ? 0 : 1;
    const int truth = task.eval.targets(i, 0) == 1.0 ? 0 : 1;
    correct += pred == truth ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(logits.rows) > 0.95);
}

TEST_CASE("epoch_batches: permutation properties") {
  Dataset data;
  data.inputs = Matrix(10, 1);
  data.targets = Matrix(10, 1);
  for (int i = 0; i < 10; ++i) {
    data.inputs(i, 0) = i;
    data.targets(i, 0) = 10 + i;
  }

  Rng rng(4);
  auto one = epoch_batches(data, 10, rng);
  CHECK(one.size() == 1);
  CHECK(one[0].inputs.rows == 10);

  Rng rng2(4);
  auto batches = epoch_batches(data, 3, rng2);
  CHECK(batches.size() == 4);  // 3+3+3+1, partial batch kept
  CHECK(batches.back().inputs.rows == 1);
  std::multiset<double> seen;
  for (const Batch& b : batches) {
    for (std::size_t i = 0; i < b.inputs.rows; ++i) {
      seen.insert(b.inputs(i, 0));
      CHECK(b.targets(i, 0) == b.inputs(i, 0) + 10);  // rows stay paired
    }
  }
  CHECK(seen.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(seen.count(i) == 1);

  Rng ra(6), rb(6);
  auto ba = epoch_batches(data, 3, ra);
  auto bb = epoch_batches(data, 3, rb);
  for (std::size_t i = 0; i < ba.size(); ++i) CHECK(ba[i].inputs == bb[i].inputs);

  CHECK_THROWS_AS(epoch_batches(data, 0, rng), UsageError);
}

TEST_CASE("dataset csv export") {
  Dataset data;
  data.inputs = Matrix(2, 2, {1, 2, 3, 4});
  data.targets = Matrix(2, 1, {5, 6});
  const std::string path = "test_dataset.csv";
  dataset_to_csv(data, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,y0");
  std::string row;
  std::getline(in, row);
  CHECK(row == "1,2,5");
  std::remove(path.c_str());
}
