#include "mgpo/lora.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgpo {

LoraLinear lora_init(Rng& rng, std::size_t m, std::size_t n, std::size_t rank, double alpha,
                     const Matrix* base) {
  if (rank < 1 || rank > std::min(m, n)) {
    throw UsageError("lora_init: rank " + std::to_string(rank) + " out of range for " +
                     std::to_string(m) + "x" + std::to_string(n));
  }
  if (alpha <= 0.0) throw UsageError("lora_init: alpha must be positive");
  LoraLinear layer;
  if (base != nullptr) {
    if (base->rows != m || base->cols != n) throw ShapeError("lora_init: base shape mismatch");
    layer.w0 = *base;
  } else {
    layer.w0 = normal_fill(rng, m, n, 0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  }
  // Kaiming, fan-in convention.
  layer.a = normal_fill(rng, rank, n, 0.0, std::sqrt(2.0 / static_cast<double>(n)));
  layer.b = Matrix::zeros(m, rank);
  layer.rank = rank;
  layer.alpha = alpha;
  return layer;
}

Matrix lora_forward(const LoraLinear& layer, const Matrix& x) {
  if (x.cols != layer.in_dim()) {
    throw ShapeError("lora_forward: input cols " + std::to_string(x.cols) + " != layer in_dim " +
                     std::to_string(layer.in_dim()));
  }
  Matrix y = matmul(x, transpose(layer.w0));
  const Matrix xa = matmul(x, transpose(layer.a));
  const Matrix delta = matmul(xa, transpose(layer.b));
  const double s = layer.scaling();
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s * delta.data[i];
  if (!layer.bias.empty()) {
    for (std::size_t i = 0; i < y.rows; ++i)
      for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += layer.bias[j];
  }
  return y;
}

Matrix merge_weights(const LoraLinear& layer) {
  return add(layer.w0, scale(matmul(layer.b, layer.a), layer.scaling()));
}

MlpModel clone_model(const MlpModel& model) { return model; }

ParamVector trainable_params(MlpModel& model) {
  ParamVector params;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    params.push_back({i, 'a', &model.layers[i].a});
    params.push_back({i, 'b', &model.layers[i].b});
  }
  return params;
}

ParamBuffer zeros_like(const ParamVector& params) {
  ParamBuffer buf;
  buf.reserve(params.size());
  for (const ParamRef& p : params) buf.push_back(Matrix::zeros(p.tensor->rows, p.tensor->cols));
  return buf;
}

std::vector<std::pair<std::size_t, std::size_t>> param_shapes(const ParamVector& params) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (const ParamRef& p : params) shapes.emplace_back(p.tensor->rows, p.tensor->cols);
  return shapes;
}

double param_dot(const ParamBuffer& a, const ParamBuffer& b) {
  if (a.size() != b.size()) throw UsageError("param_dot: buffer length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) throw UsageError("param_dot: tensor shape mismatch");
    for (std::size_t j = 0; j < a[i].data.size(); ++j) sum += a[i].data[j] * b[i].data[j];
  }
  return sum;
}

void param_axpy(const ParamVector& params, const ParamBuffer& direction, double scale) {
  if (params.size() != direction.size()) throw UsageError("param_axpy: misaligned buffers");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& t = *params[i].tensor;
    if (!t.same_shape(direction[i])) throw UsageError("param_axpy: tensor shape mismatch");
    for (std::size_t j = 0; j < t.data.size(); ++j) t.data[j] += scale * direction[i].data[j];
  }
}

ParamBuffer snapshot_params(const ParamVector& params) {
  ParamBuffer buf;
  buf.reserve(params.size());
  for (const ParamRef& p : params) buf.push_back(*p.tensor);
  return buf;
}

void restore_params(const ParamVector& params, const ParamBuffer& saved) {
  if (params.size() != saved.size()) throw UsageError("restore_params: misaligned buffers");
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = saved[i];
}

ForwardCache forward_loss(const MlpModel& model, const Batch& batch, LossKind kind) {
  if (model.layers.empty()) throw UsageError("forward_loss: empty model");
  ForwardCache cache;
  cache.model = &model;
  cache.kind = kind;
  cache.inputs = batch.inputs;
  cache.targets = batch.targets;

  Matrix h = batch.inputs;
  const std::size_t n_layers = model.layers.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    cache.activations.push_back(h);
    Matrix z = lora_forward(model.layers[i], h);
    if (!z.all_finite()) {
      throw NumericError("forward_loss: non-finite activation at layer " + std::to_string(i));
    }
    if (i + 1 < n_layers) {
      h = z;
      for (double& x : h.data) x = std::tanh(x);
    } else {
      cache.outputs = std::move(z);
    }
  }

  const Matrix& out = cache.outputs;
  if (!out.same_shape(batch.targets)) {
    throw ShapeError("forward_loss: output " + std::to_string(out.rows) + "x" +
                     std::to_string(out.cols) + " vs targets " + std::to_string(batch.targets.rows) +
                     "x" + std::to_string(batch.targets.cols));
  }
  const double n = static_cast<double>(out.rows);
  double loss = 0.0;
  if (kind == LossKind::kMse) {
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double d = out.data[i] - batch.targets.data[i];
      loss += d * d;
    }
    loss /= n;
  } else {
    for (std::size_t i = 0; i < out.rows; ++i) {
      double max_z = out(i, 0);
      for (std::size_t j = 1; j < out.cols; ++j) max_z = std::max(max_z, out(i, j));
      double sum_exp = 0.0;
      for (std::size_t j = 0; j < out.cols; ++j) sum_exp += std::exp(out(i, j) - max_z);
      const double log_z = max_z + std::log(sum_exp);
      for (std::size_t j = 0; j < out.cols; ++j) {
        loss -= batch.targets(i, j) * (out(i, j) - log_z);
      }
    }
    loss /= n;
  }
  if (!std::isfinite(loss)) throw NumericError("forward_loss: non-finite loss");
  cache.loss = loss;
  return cache;
}

Matrix model_forward(const MlpModel& model, const Matrix& x) {
  Matrix h = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    h = lora_forward(model.layers[i], h);
    if (i + 1 < model.layers.size()) {
      for (double& v : h.data) v = std::tanh(v);
    }
  }
  return h;
}

ParamBuffer backward(const MlpModel& model, const ForwardCache& cache) {
  if (cache.model != &model) throw UsageError("backward: cache does not belong to this model");
  const std::size_t n_layers = model.layers.size();
  const double n = static_cast<double>(cache.outputs.rows);

  // dL/d(last pre-activation)
  Matrix gz(cache.outputs.rows, cache.outputs.cols);
  if (cache.kind == LossKind::kMse) {
    for (std::size_t i = 0; i < gz.data.size(); ++i) {
      gz.data[i] = 2.0 / n * (cache.outputs.data[i] - cache.targets.data[i]);
    }
  } else {
    for (std::size_t i = 0; i < gz.rows; ++i) {
      double max_z = cache.outputs(i, 0);
      for (std::size_t j = 1; j < gz.cols; ++j) max_z = std::max(max_z, cache.outputs(i, j));
      double sum_exp = 0.0;
      for (std::size_t j = 0; j < gz.cols; ++j) sum_exp += std::exp(cache.outputs(i, j) - max_z);
      for (std::size_t j = 0; j < gz.cols; ++j) {
        const double p = std::exp(cache.outputs(i, j) - max_z) / sum_exp;
        gz(i, j) = (p - cache.targets(i, j)) / n;
      }
    }
  }

  ParamBuffer grads(2 * n_layers);
  for (std::size_t li = n_layers; li-- > 0;) {
    const LoraLinear& layer = model.layers[li];
    const Matrix& x_in = cache.activations[li];
    // dL/dW for the merged weight, then chain into the factors.
    const Matrix dw = matmul(transpose(gz), x_in);  // m x n
    const double s = layer.scaling();
    grads[2 * li] = scale(matmul(transpose(layer.b), dw), s);      // a: rank x n
    grads[2 * li + 1] = scale(matmul(dw, transpose(layer.a)), s);  // b: m x rank
    if (li > 0) {
      Matrix dx = matmul(gz, merge_weights(layer));  // batch x n
      // Through tanh: x_in == tanh(previous pre-activation).
      gz = Matrix(dx.rows, dx.cols);
      for (std::size_t i = 0; i < dx.data.size(); ++i) {
        const double h = x_in.data[i];
        gz.data[i] = dx.data[i] * (1.0 - h * h);
      }
    }
  }
  return grads;
}

}  // namespace mgpo
