#include "pssl/models.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pssl::models {

namespace {

LayerParams init_layer(int fan_in, int fan_out, RngStream& stream) {
  const double r = std::sqrt(6.0 / (fan_in + fan_out));
  LayerParams layer;
  layer.weight.resize(fan_in, fan_out);
  for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      layer.weight(i, j) = stream.uniform(-r, r);
  layer.bias = Matrix::Zero(1, fan_out);
  return layer;
}

std::vector<LayerParams> init_block(const std::vector<int>& widths, RngStream& stream) {
  std::vector<LayerParams> block;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    block.push_back(init_layer(widths[i], widths[i + 1], stream));
  return block;
}

// Linear stack with ReLU between layers and a linear final layer.
Matrix run_block(const std::vector<LayerParams>& block, Matrix h) {
  for (std::size_t i = 0; i < block.size(); ++i) {
    h = (h * block[i].weight).rowwise() + block[i].bias.row(0);
    if (i + 1 < block.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

ad::Var run_block(const std::vector<LayerVars>& block, ad::Var h) {
  for (std::size_t i = 0; i < block.size(); ++i) {
    h = ad::linear(h, block[i].weight, block[i].bias);
    if (i + 1 < block.size()) h = ad::relu(h);
  }
  return h;
}

void check_matched(const ParameterSet& a, const ParameterSet& b, const char* op) {
  auto fa = flatten(a);
  auto fb = flatten(b);
  check_arg(fa.size() == fb.size(), std::string(op) + ": parameter sets differ in layout");
  for (std::size_t i = 0; i < fa.size(); ++i)
    check_arg(fa[i]->rows() == fb[i]->rows() && fa[i]->cols() == fb[i]->cols(),
              std::string(op) + ": parameter shapes differ");
}

}  // namespace

void NetworkSpec::validate() const {
  check_arg(encoder_widths.size() >= 2, "encoder needs an input width and at least one layer");
  for (int w : encoder_widths) check_arg(w > 0, "encoder widths must be positive");
  for (int w : projector_widths) check_arg(w > 0, "projector widths must be positive");
  if (predictor_widths)
    for (int w : *predictor_widths) check_arg(w > 0, "predictor widths must be positive");
  check_arg(classifier_classes >= 0, "classifier class count must be non-negative");
}

ParameterSet init_params(const NetworkSpec& spec, RngStream& stream) {
  spec.validate();
  ParameterSet params;
  params.encoder = init_block(spec.encoder_widths, stream);
  std::vector<int> proj{spec.encoder_widths.back(), spec.projector_widths[0],
                        spec.projector_widths[1], spec.projector_widths[2]};
  params.projector = init_block(proj, stream);
  if (spec.predictor_widths) {
    std::vector<int> pred{spec.projector_widths[2], (*spec.predictor_widths)[0],
                          (*spec.predictor_widths)[1]};
    params.predictor = init_block(pred, stream);
  }
  if (spec.classifier_classes > 0)
    params.classifier = init_classifier(spec.projector_widths[2], spec.classifier_classes, stream);
  return params;
}

LayerParams init_classifier(int in_width, int classes, RngStream& stream) {
  check_arg(in_width > 0 && classes > 0, "classifier dimensions must be positive");
  return init_layer(in_width, classes, stream);
}

std::vector<Matrix*> flatten(ParameterSet& params) {
  std::vector<Matrix*> out;
  auto push = [&out](std::vector<LayerParams>& block) {
    for (LayerParams& l : block) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  };
  push(params.encoder);
  push(params.projector);
  push(params.predictor);
  if (params.classifier) {
    out.push_back(&params.classifier->weight);
    out.push_back(&params.classifier->bias);
  }
  return out;
}

std::vector<const Matrix*> flatten(const ParameterSet& params) {
  auto mut = flatten(const_cast<ParameterSet&>(params));
  return {mut.begin(), mut.end()};
}

Matrix forward_embed(const ParameterSet& params, const Matrix& batch, Stage stage) {
  check_arg(!params.encoder.empty(), "forward_embed: empty encoder");
  check_arg(batch.cols() == params.encoder.front().weight.rows(),
            "forward_embed: batch width does not match encoder input");
  check_finite(batch, "forward_embed");
  Matrix h = run_block(params.encoder, batch);
  if (stage == Stage::Encoder) return h;
  h = run_block(params.projector, std::move(h));
  if (stage == Stage::Projector) return h;
  check_arg(params.classifier.has_value(), "forward_embed: classifier head not attached");
  return (h * params.classifier->weight).rowwise() + params.classifier->bias.row(0);
}

ParameterSet ema_update(const ParameterSet& online, const ParameterSet& target,
                        double momentum) {
  check_arg(momentum >= 0.0 && momentum <= 1.0, "ema momentum must be in [0, 1]");
  check_matched(online, target, "ema_update");
  ParameterSet out = target;
  auto fo = flatten(online);
  auto ft = flatten(out);
  for (std::size_t i = 0; i < fo.size(); ++i)
    *ft[i] = momentum * (*ft[i]) + (1.0 - momentum) * (*fo[i]);
  return out;
}

AdamState AdamState::init(const ParameterSet& params, double lr, double weight_decay) {
  check_arg(lr > 0.0, "adam: lr must be positive");
  check_arg(weight_decay >= 0.0, "adam: weight decay must be non-negative");
  AdamState state;
  state.lr = lr;
  state.weight_decay = weight_decay;
  for (const Matrix* p : flatten(params)) {
    state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
    state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return state;
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  check_matched(params, grads, "adam_step");
  auto fp = flatten(params);
  auto fg = flatten(grads);
  check_arg(state.m.size() == fp.size(), "adam_step: state does not match parameters");
  for (const Matrix* g : fg)
    if (!g->allFinite())
      throw std::runtime_error("adam_step: non-finite gradient; aborting run");
  ++state.step;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < fp.size(); ++i) {
    Matrix& p = *fp[i];
    const Matrix& g = *fg[i];
    if (state.weight_decay > 0.0) p *= (1.0 - state.lr * state.weight_decay);
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * g;
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
    const Matrix m_hat = state.m[i] / bc1;
    const Matrix v_hat = state.v[i] / bc2;
    p.array() -= state.lr * m_hat.array() / (v_hat.array().sqrt() + kEps);
  }
}

ModelVars make_vars(const ParameterSet& params) {
  ModelVars vars;
  auto lift = [](const std::vector<LayerParams>& block) {
    std::vector<LayerVars> out;
    for (const LayerParams& l : block)
      out.push_back({ad::leaf(l.weight), ad::leaf(l.bias)});
    return out;
  };
  vars.encoder = lift(params.encoder);
  vars.projector = lift(params.projector);
  vars.predictor = lift(params.predictor);
  if (params.classifier)
    vars.classifier = LayerVars{ad::leaf(params.classifier->weight),
                                ad::leaf(params.classifier->bias)};
  return vars;
}

ad::Var forward_embed(const ModelVars& vars, const ad::Var& batch, Stage stage) {
  ad::Var h = run_block(vars.encoder, batch);
  if (stage == Stage::Encoder) return h;
  h = run_block(vars.projector, h);
  if (stage == Stage::Projector) return h;
  check_arg(vars.classifier.has_value(), "forward_embed: classifier head not attached");
  return ad::linear(h, vars.classifier->weight, vars.classifier->bias);
}

ad::Var predictor_forward(const ModelVars& vars, const ad::Var& projected) {
  check_arg(!vars.predictor.empty(), "predictor_forward: no predictor in this network");
  return run_block(vars.predictor, projected);
}

ParameterSet collect_grads(const ModelVars& vars) {
  ParameterSet grads;
  auto lower = [](const std::vector<LayerVars>& block) {
    std::vector<LayerParams> out;
    for (const LayerVars& l : block) out.push_back({l.weight.grad(), l.bias.grad()});
    return out;
  };
  grads.encoder = lower(vars.encoder);
  grads.projector = lower(vars.projector);
  grads.predictor = lower(vars.predictor);
  if (vars.classifier)
    grads.classifier = LayerParams{vars.classifier->weight.grad(), vars.classifier->bias.grad()};
  return grads;
}

// --- checkpoint i/o ---

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t x) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint truncated");
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint truncated");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string get_string(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint truncated");
  return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  put_string(out, name);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

Matrix get_tensor(std::istream& in, std::string& name) {
  name = get_string(in);
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = get_f64(in);
  return m;
}

void put_param_set(std::ostream& out, const std::string& prefix, const ParameterSet& params) {
  auto flat = flatten(params);
  put_u32(out, static_cast<std::uint32_t>(flat.size()));
  auto emit_block = [&](const char* block, const std::vector<LayerParams>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      put_tensor(out, prefix + block + "." + std::to_string(i) + ".weight", layers[i].weight);
      put_tensor(out, prefix + block + "." + std::to_string(i) + ".bias", layers[i].bias);
    }
  };
  emit_block("encoder", params.encoder);
  emit_block("projector", params.projector);
  emit_block("predictor", params.predictor);
  if (params.classifier) {
    put_tensor(out, prefix + "classifier.weight", params.classifier->weight);
    put_tensor(out, prefix + "classifier.bias", params.classifier->bias);
  }
}

ParameterSet get_param_set(std::istream& in, const NetworkSpec& spec) {
  const std::uint32_t count = get_u32(in);
  ParameterSet params;
  std::string name;
  const std::size_t enc_layers = spec.encoder_widths.size() - 1;
  std::size_t expect = enc_layers * 2 + 3 * 2 + (spec.predictor_widths ? 2 * 2 : 0) +
                       (spec.classifier_classes > 0 ? 2 : 0);
  if (count != expect) throw std::runtime_error("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < enc_layers; ++i) {
    Matrix w = get_tensor(in, name), b = get_tensor(in, name);
    params.encoder.push_back({std::move(w), std::move(b)});
  }
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix w = get_tensor(in, name), b = get_tensor(in, name);
    params.projector.push_back({std::move(w), std::move(b)});
  }
  if (spec.predictor_widths) {
    for (std::size_t i = 0; i < 2; ++i) {
      Matrix w = get_tensor(in, name), b = get_tensor(in, name);
      params.predictor.push_back({std::move(w), std::move(b)});
    }
  }
  if (spec.classifier_classes > 0) {
    Matrix w = get_tensor(in, name), b = get_tensor(in, name);
    params.classifier = LayerParams{std::move(w), std::move(b)};
  }
  return params;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write("PSSL", 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.spec.encoder_widths.size()));
  for (int w : ckpt.spec.encoder_widths) put_u32(out, static_cast<std::uint32_t>(w));
  for (int w : ckpt.spec.projector_widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, ckpt.spec.predictor_widths ? 1 : 0);
  if (ckpt.spec.predictor_widths)
    for (int w : *ckpt.spec.predictor_widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, static_cast<std::uint32_t>(ckpt.spec.classifier_classes));
  put_u32(out, 0);  // activation tag: rectified-linear
  put_u64(out, ckpt.seed);
  put_string(out, ckpt.config_echo);
  put_param_set(out, "", ckpt.params);
  put_u32(out, ckpt.target ? 1 : 0);
  if (ckpt.target) put_param_set(out, "target.", *ckpt.target);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PSSL", 4) != 0)
    throw std::runtime_error("not a PSSL checkpoint: " + path);
  if (get_u32(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ckpt;
  const std::uint32_t enc = get_u32(in);
  for (std::uint32_t i = 0; i < enc; ++i)
    ckpt.spec.encoder_widths.push_back(static_cast<int>(get_u32(in)));
  for (int& w : ckpt.spec.projector_widths) w = static_cast<int>(get_u32(in));
  if (get_u32(in) != 0) {
    std::array<int, 2> pred{};
    for (int& w : pred) w = static_cast<int>(get_u32(in));
    ckpt.spec.predictor_widths = pred;
  }
  ckpt.spec.classifier_classes = static_cast<int>(get_u32(in));
  get_u32(in);  // activation tag
  ckpt.seed = get_u64(in);
  ckpt.config_echo = get_string(in);
  ckpt.spec.validate();
  ckpt.params = get_param_set(in, ckpt.spec);
  if (get_u32(in) != 0) {
    NetworkSpec tspec = ckpt.spec;
    tspec.classifier_classes = 0;
    tspec.predictor_widths.reset();
    ckpt.target = get_param_set(in, tspec);
  }
  return ckpt;
}

}  // namespace pssl::models
