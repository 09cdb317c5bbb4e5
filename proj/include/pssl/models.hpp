#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pssl/autodiff.hpp"
#include "pssl/matrix.hpp"
#include "pssl/rng.hpp"

namespace pssl::models {

enum class Stage { Encoder, Projector, Classifier };

// Hidden layers are rectified-linear; the final layer of every block is
// linear. The classifier is a single linear layer over projector output
// (softmax lives inside the cross-entropy loss).
struct NetworkSpec {
  std::vector<int> encoder_widths;  // input dim first, then layer outputs
  std::array<int, 3> projector_widths{64, 64, 32};
  std::optional<std::array<int, 2>> predictor_widths;  // byol only
  int classifier_classes = 0;                          // 0 = no head yet
  void validate() const;
};

struct LayerParams {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

struct ParameterSet {
  std::vector<LayerParams> encoder;
  std::vector<LayerParams> projector;
  std::vector<LayerParams> predictor;  // empty unless predictor_widths set
  std::optional<LayerParams> classifier;
};

// Glorot-uniform weights (zero biases), drawn layer by layer in declaration
// order from the given stream.
ParameterSet init_params(const NetworkSpec& spec, RngStream& stream);
LayerParams init_classifier(int in_width, int classes, RngStream& stream);

// Flattened view in fixed order (encoder, projector, predictor, classifier;
// weight then bias per layer). The same order everywhere: Adam moments,
// gradients and checkpoints all align with it.
std::vector<Matrix*> flatten(ParameterSet& params);
std::vector<const Matrix*> flatten(const ParameterSet& params);

Matrix forward_embed(const ParameterSet& params, const Matrix& batch, Stage stage);

// target <- momentum * target + (1 - momentum) * online, entrywise.
ParameterSet ema_update(const ParameterSet& online, const ParameterSet& target,
                        double momentum);

struct AdamState {
  double lr = 1e-3;
  double weight_decay = 0.0;
  long step = 0;
  std::vector<Matrix> m, v;  // aligned with flatten() order

  static AdamState init(const ParameterSet& params, double lr, double weight_decay);
};

// Decoupled weight decay (params *= 1 - lr*wd) followed by a bias-corrected
// Adam update (beta1 0.9, beta2 0.999, eps 1e-8). Throws std::runtime_error
// on non-finite gradients.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

// --- autodiff forward ---

struct LayerVars {
  ad::Var weight, bias;
};

struct ModelVars {
  std::vector<LayerVars> encoder, projector, predictor;
  std::optional<LayerVars> classifier;
};

ModelVars make_vars(const ParameterSet& params);
ad::Var forward_embed(const ModelVars& vars, const ad::Var& batch, Stage stage);
ad::Var predictor_forward(const ModelVars& vars, const ad::Var& projected);
// Gradients accumulated by the last backward(), shaped like the ParameterSet.
ParameterSet collect_grads(const ModelVars& vars);

// --- checkpoints ---
// Binary format: magic "PSSL", format version, NetworkSpec, master seed,
// config echo, then named parameter tensors as little-endian doubles with
// explicit shapes. Round-trips bit-exactly.

struct Checkpoint {
  NetworkSpec spec;
  ParameterSet params;
  std::optional<ParameterSet> target;  // byol EMA network
  std::uint64_t seed = 0;
  std::string config_echo;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pssl::models
