#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "mgpo/matrix.hpp"
#include "mgpo/rng.hpp"

namespace mgpo {

// One linear layer y = x * (w0 + (alpha/rank) * b * a)^T + bias.
// w0 and bias are frozen; only the low-rank factors a and b train.
struct LoraLinear {
  Matrix w0;                  // m x n, frozen
  Matrix a;                   // rank x n, trainable
  Matrix b;                   // m x rank, trainable, zero at init
  std::size_t rank = 1;
  double alpha = 1.0;
  std::vector<double> bias;   // length m or empty, frozen

  std::size_t in_dim() const { return w0.cols; }
  std::size_t out_dim() const { return w0.rows; }
  double scaling() const { return alpha / static_cast<double>(rank); }
};

// a ~ N(0, sqrt(2/n)) (Kaiming, fan-in), b = 0, so the fresh adapter is a
// no-op and the layer matches its base. Pass base == nullptr to draw w0
// from N(0, 1/sqrt(n)).
LoraLinear lora_init(Rng& rng, std::size_t m, std::size_t n, std::size_t rank, double alpha,
                     const Matrix* base = nullptr);

Matrix lora_forward(const LoraLinear& layer, const Matrix& x);

// w0 + (alpha/rank) * b * a, the weights used for unperturbed inference.
Matrix merge_weights(const LoraLinear& layer);

enum class LossKind { kMse, kSoftmaxCrossEntropy };

// Stack of LoRA linear layers with tanh between them (none after the last).
struct MlpModel {
  std::vector<LoraLinear> layers;
};

MlpModel clone_model(const MlpModel& model);

// Ordered view over the trainable factors: layer index ascending, a before b.
// Optimizer buffers align with this order and stay valid across steps.
struct ParamRef {
  std::size_t layer;
  char factor;  // 'a' or 'b'
  Matrix* tensor;
};
using ParamVector = std::vector<ParamRef>;

ParamVector trainable_params(MlpModel& model);

// Owning buffer aligned with a ParamVector (gradients, moments, directions).
using ParamBuffer = std::vector<Matrix>;

ParamBuffer zeros_like(const ParamVector& params);
std::vector<std::pair<std::size_t, std::size_t>> param_shapes(const ParamVector& params);
double param_dot(const ParamBuffer& a, const ParamBuffer& b);

// params += scale * direction, in place.
void param_axpy(const ParamVector& params, const ParamBuffer& direction, double scale);

ParamBuffer snapshot_params(const ParamVector& params);
void restore_params(const ParamVector& params, const ParamBuffer& saved);

struct Batch {
  Matrix inputs;
  Matrix targets;
};

struct ForwardCache {
  const MlpModel* model = nullptr;
  double loss = 0.0;
  LossKind kind = LossKind::kMse;
  Matrix inputs;
  std::vector<Matrix> activations;  // input to each layer (post-tanh of previous)
  Matrix outputs;                   // last layer pre-activation
  Matrix targets;
};

// Mean loss over batch rows; cache retains what backward needs.
ForwardCache forward_loss(const MlpModel& model, const Batch& batch, LossKind kind);

Matrix model_forward(const MlpModel& model, const Matrix& x);

// Exact gradients w.r.t. every a and b, in canonical ParamVector order.
ParamBuffer backward(const MlpModel& model, const ForwardCache& cache);

}  // namespace mgpo
