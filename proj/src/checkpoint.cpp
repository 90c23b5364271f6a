#include "mgpo/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace mgpo {

namespace {

void write_f64(std::ostream& out, double x) {
  out << std::hex << std::bit_cast<std::uint64_t>(x) << std::dec;
}

double read_f64(std::istream& in) {
  std::uint64_t bits;
  in >> std::hex >> bits >> std::dec;
  if (!in) throw FormatError("checkpoint: truncated float field");
  return std::bit_cast<double>(bits);
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << " " << m.rows << " " << m.cols << "\n";
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    write_f64(out, m.data[i]);
    out << (i + 1 == m.data.size() || (i + 1) % 8 == 0 ? "\n" : " ");
  }
}

Matrix read_matrix(std::istream& in, const std::string& expect_name) {
  std::string tok, name;
  std::size_t rows, cols;
  in >> tok >> name >> rows >> cols;
  if (!in || tok != "tensor" || name != expect_name) {
    throw FormatError("checkpoint: expected tensor " + expect_name);
  }
  Matrix m(rows, cols);
  for (double& x : m.data) x = read_f64(in);
  return m;
}

void write_layer(std::ostream& out, const LoraLinear& layer) {
  out << "layer rank " << layer.rank << " alpha ";
  write_f64(out, layer.alpha);
  out << " bias " << layer.bias.size() << "\n";
  for (double b : layer.bias) {
    write_f64(out, b);
    out << "\n";
  }
  write_matrix(out, "w0", layer.w0);
  write_matrix(out, "a", layer.a);
  write_matrix(out, "b", layer.b);
}

LoraLinear read_layer(std::istream& in) {
  std::string tok;
  LoraLinear layer;
  std::size_t bias_len;
  in >> tok;
  if (tok != "layer") throw FormatError("checkpoint: expected layer record");
  in >> tok >> layer.rank >> tok;
  layer.alpha = read_f64(in);
  in >> tok >> bias_len;
  if (!in) throw FormatError("checkpoint: malformed layer header");
  layer.bias.resize(bias_len);
  for (double& b : layer.bias) b = read_f64(in);
  layer.w0 = read_matrix(in, "w0");
  layer.a = read_matrix(in, "a");
  layer.b = read_matrix(in, "b");
  return layer;
}

void write_model_body(std::ostream& out, const MlpModel& model) {
  out << "layers " << model.layers.size() << "\n";
  for (const LoraLinear& layer : model.layers) write_layer(out, layer);
}

MlpModel read_model_body(std::istream& in) {
  std::string tok;
  std::size_t n_layers;
  in >> tok >> n_layers;
  if (!in || tok != "layers") throw FormatError("checkpoint: expected layer count");
  MlpModel model;
  for (std::size_t i = 0; i < n_layers; ++i) model.layers.push_back(read_layer(in));
  return model;
}

}  // namespace

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("save_model: cannot open " + path);
  out << "mgpo-model v1\n";
  write_model_body(out, model);
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("load_model: cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "mgpo-model" || version != "v1") {
    throw FormatError("load_model: unsupported container header in " + path);
  }
  return read_model_body(in);
}

void save_checkpoint(const TrainCheckpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("save_checkpoint: cannot open " + path);
  out << "mgpo-checkpoint v1\n";
  out << "step " << ckpt.step << "\n";
  out << "run_seed " << ckpt.run_seed << "\n";
  write_model_body(out, ckpt.model);

  out << "adamw t " << ckpt.adamw.t << " rule "
      << (ckpt.adamw.momentum_rule == MomentumRule::kPaperLiteral ? "paper-literal"
                                                                  : "optimizer-moment")
      << "\n";
  out << "hyper ";
  for (double h : {ckpt.adamw.lr, ckpt.adamw.beta1, ckpt.adamw.beta2, ckpt.adamw.eps,
                   ckpt.adamw.weight_decay}) {
    write_f64(out, h);
    out << " ";
  }
  out << "\n";
  out << "moments " << ckpt.adamw.m.size() << "\n";
  for (std::size_t i = 0; i < ckpt.adamw.m.size(); ++i) {
    write_matrix(out, "m", ckpt.adamw.m[i]);
    write_matrix(out, "v", ckpt.adamw.v[i]);
  }

  out << "apn ";
  write_f64(out, ckpt.apn.g_bar);
  out << " ";
  write_f64(out, ckpt.apn.beta);
  out << " " << (ckpt.apn.initialized ? 1 : 0) << " " << (ckpt.apn.frozen ? 1 : 0) << "\n";

  out << "rng";
  for (std::uint64_t w : ckpt.rng_state) out << " " << std::hex << w << std::dec;
  out << " " << (ckpt.rng_has_spare ? 1 : 0) << " ";
  write_f64(out, ckpt.rng_spare);
  out << "\n";
}

TrainCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("load_checkpoint: cannot open " + path);
  std::string magic, version, tok;
  in >> magic >> version;
  if (magic != "mgpo-checkpoint" || version != "v1") {
    throw FormatError("load_checkpoint: unsupported container header in " + path);
  }
  TrainCheckpoint ckpt;
  in >> tok >> ckpt.step;
  if (tok != "step") throw FormatError("load_checkpoint: expected step");
  in >> tok >> ckpt.run_seed;
  if (tok != "run_seed") throw FormatError("load_checkpoint: expected run_seed");
  ckpt.model = read_model_body(in);

  // "adamw t <t> rule <rule>"
  std::string rule;
  in >> tok >> tok >> ckpt.adamw.t;
  in >> tok >> rule;
  if (tok != "rule") throw FormatError("load_checkpoint: expected adamw rule");
  ckpt.adamw.momentum_rule =
      rule == "paper-literal" ? MomentumRule::kPaperLiteral : MomentumRule::kOptimizerMoment;
  in >> tok;
  if (tok != "hyper") throw FormatError("load_checkpoint: expected hyper");
  ckpt.adamw.lr = read_f64(in);
  ckpt.adamw.beta1 = read_f64(in);
  ckpt.adamw.beta2 = read_f64(in);
  ckpt.adamw.eps = read_f64(in);
  ckpt.adamw.weight_decay = read_f64(in);

  std::size_t n_moments;
  in >> tok >> n_moments;
  if (tok != "moments") throw FormatError("load_checkpoint: expected moments");
  for (std::size_t i = 0; i < n_moments; ++i) {
    ckpt.adamw.m.push_back(read_matrix(in, "m"));
    ckpt.adamw.v.push_back(read_matrix(in, "v"));
  }

  in >> tok;
  if (tok != "apn") throw FormatError("load_checkpoint: expected apn");
  ckpt.apn.g_bar = read_f64(in);
  ckpt.apn.beta = read_f64(in);
  int flag;
  in >> flag;
  ckpt.apn.initialized = flag != 0;
  in >> flag;
  ckpt.apn.frozen = flag != 0;

  in >> tok;
  if (tok != "rng") throw FormatError("load_checkpoint: expected rng");
  for (std::uint64_t& w : ckpt.rng_state) in >> std::hex >> w >> std::dec;
  in >> flag;
  ckpt.rng_has_spare = flag != 0;
  ckpt.rng_spare = read_f64(in);
  if (!in) throw FormatError("load_checkpoint: truncated file " + path);
  return ckpt;
}

}  // namespace mgpo
