#include "pssl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pssl/config.hpp"
#include "pssl/report.hpp"

namespace pssl::trainer {

namespace {

Vector image_row(const augment::Image& img) {
  Vector v(static_cast<Eigen::Index>(img.pixels.size()));
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = img.pixels[i];
  return v;
}

// Two augmented views per sample, assembled in batch order from one stream.
void build_views(const data::Dataset& dataset, const std::vector<int>& indices,
                 std::size_t start, int batch_size, const augment::AugmentationPolicy& policy,
                 RngStream& stream, Matrix& v1, Matrix& v2) {
  v1.resize(batch_size, dataset.feature_dim());
  v2.resize(batch_size, dataset.feature_dim());
  for (int j = 0; j < batch_size; ++j) {
    const int idx = indices[start + static_cast<std::size_t>(j)];
    if (policy.kind == augment::DataKind::Image && dataset.image_mode) {
      auto [a, b] = augment::make_views(dataset.image(idx), policy.img, stream);
      v1.row(j) = image_row(a).transpose();
      v2.row(j) = image_row(b).transpose();
    } else {
      Vector sample = dataset.features.row(idx).transpose();
      auto [a, b] = augment::make_views(sample, policy.vec, stream);
      v1.row(j) = a.transpose();
      v2.row(j) = b.transpose();
    }
  }
}

struct EpochStats {
  double total = 0.0, ssl = 0.0, ps = 0.0;
  int batches = 0;
};

models::ParameterSet encoder_projector_of(const models::ParameterSet& params) {
  models::ParameterSet out;
  out.encoder = params.encoder;
  out.projector = params.projector;
  return out;
}

// One optimization epoch, shared by both phases; alpha == 0 runs the pure
// SSL path (no classifier forward, no head update).
EpochStats run_epoch(const RunConfig& config, const data::Dataset& dataset,
                     TrainerState& state, int epoch, double alpha) {
  const double lr = config.lr_at(epoch);
  state.model_opt.lr = lr;
  if (state.head_opt) state.head_opt->lr = lr;

  std::vector<int> indices(static_cast<std::size_t>(dataset.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
  RngStream shuffle_stream(config.seed, stream_purpose::kShuffle,
                           static_cast<std::uint64_t>(epoch));
  shuffle_stream.shuffle(indices);

  const bool use_ce = alpha > 0.0 && state.labels.has_value() && state.head.has_value();
  EpochStats stats;
  Matrix v1, v2;
  for (std::size_t start = 0; start + static_cast<std::size_t>(config.batch_size) <= indices.size();
       start += static_cast<std::size_t>(config.batch_size)) {
    build_views(dataset, indices, start, config.batch_size, config.policy, state.aug_stream, v1,
                v2);
    models::ModelVars vars = models::make_vars(state.params);
    ad::Var x1 = ad::constant(v1);
    ad::Var x2 = ad::constant(v2);
    ad::Var z1 = models::forward_embed(vars, x1, models::Stage::Projector);
    ad::Var z2 = models::forward_embed(vars, x2, models::Stage::Projector);

    ad::Var ssl;
    switch (config.loss.kind) {
      case losses::LossKind::NtXent:
        ssl = losses::nt_xent(z1, z2, config.loss.temperature);
        break;
      case losses::LossKind::Wmse2:
        ssl = losses::wmse_loss(z1, z2, config.loss.epsilon);
        break;
      case losses::LossKind::Barlow:
        ssl = losses::barlow_loss(z1, z2, config.loss.lambda);
        break;
      case losses::LossKind::Byol: {
        ad::Var p1 = models::predictor_forward(vars, z1);
        ad::Var p2 = models::predictor_forward(vars, z2);
        const Matrix t1 = models::forward_embed(*state.target, v1, models::Stage::Projector);
        const Matrix t2 = models::forward_embed(*state.target, v2, models::Stage::Projector);
        ssl = losses::byol_loss(p1, ad::constant(t2), p2, ad::constant(t1));
        break;
      }
    }

    ad::Var total = ssl;
    double ps_value = 0.0;
    ad::Var head_w, head_b;
    if (use_ce) {
      std::vector<int> batch_labels(static_cast<std::size_t>(config.batch_size));
      for (int j = 0; j < config.batch_size; ++j)
        batch_labels[static_cast<std::size_t>(j)] =
            state.labels->labels[static_cast<std::size_t>(
                indices[start + static_cast<std::size_t>(j)])];
      head_w = ad::leaf(state.head->classifier->weight);
      head_b = ad::leaf(state.head->classifier->bias);
      ad::Var ce1 = losses::pseudo_label_ce(ad::linear(z1, head_w, head_b), batch_labels);
      ad::Var ce2 = losses::pseudo_label_ce(ad::linear(z2, head_w, head_b), batch_labels);
      total = losses::total_loss(ssl, ce1, ce2, alpha);
      ps_value = ce1.scalar() + ce2.scalar();
    }
    if (!std::isfinite(total.scalar()))
      throw std::runtime_error("training aborted: non-finite loss at epoch " +
                               std::to_string(epoch));

    ad::backward(total);
    models::ParameterSet grads = models::collect_grads(vars);
    models::adam_step(state.params, grads, state.model_opt);
    if (use_ce) {
      models::ParameterSet head_grads;
      head_grads.classifier = models::LayerParams{head_w.grad(), head_b.grad()};
      models::adam_step(*state.head, head_grads, *state.head_opt);
    }
    if (config.loss.kind == losses::LossKind::Byol)
      state.target = models::ema_update(encoder_projector_of(state.params), *state.target,
                                        config.ema_momentum);

    stats.total += total.scalar();
    stats.ssl += ssl.scalar();
    stats.ps += ps_value;
    ++stats.batches;
  }
  return stats;
}

EpochRecord record_epoch(const RunConfig& config, int epoch, double alpha,
                         const EpochStats& stats, int round) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.phase = epoch <= config.initial_epochs ? "initial" : "progressive";
  rec.lr = config.lr_at(epoch);
  rec.alpha = alpha;
  const double n = std::max(1, stats.batches);
  rec.loss_total = stats.total / n;
  rec.loss_ssl = stats.ssl / n;
  rec.loss_ps = stats.ps / n;
  rec.round = round;
  return rec;
}

}  // namespace

void AlphaSchedule::validate() const {
  int prev_end = 0;
  for (const AlphaBand& band : bands) {
    check_arg(band.start_epoch >= 1 && band.end_epoch >= band.start_epoch,
              "alpha band epochs must be ordered and >= 1");
    check_arg(band.start_epoch > prev_end, "alpha bands must be non-overlapping and ascending");
    check_arg(band.alpha >= 0.0, "alpha must be non-negative");
    prev_end = band.end_epoch;
  }
}

double alpha_at(const AlphaSchedule& schedule, int epoch) {
  check_arg(epoch >= 1, "alpha_at: epoch must be >= 1");
  for (const AlphaBand& band : schedule.bands)
    if (epoch >= band.start_epoch && epoch <= band.end_epoch) return band.alpha;
  return 0.0;
}

void RunConfig::validate() const {
  loss.validate();
  network.validate();
  policy.validate();
  alpha.validate();
  check_arg(initial_epochs >= 0, "initial_epochs must be non-negative");
  check_arg(initial_epochs < total_epochs, "initial_epochs must be less than total_epochs");
  check_arg(recluster_interval > 0, "recluster_interval must be positive");
  check_arg(cluster_count >= 0, "cluster_count must be non-negative");
  check_arg(batch_size >= 2, "batch_size must be at least 2");
  check_arg(weight_decay >= 0.0, "weight_decay must be non-negative");
  check_arg(ema_momentum >= 0.0 && ema_momentum <= 1.0, "ema_momentum must be in [0, 1]");
  check_arg(!warm_start, "warm_start=true is not supported; rounds reseed from scratch");
  if (loss.kind == losses::LossKind::Byol) {
    check_arg(network.predictor_widths.has_value(), "byol needs network.predictor_widths");
    check_arg((*network.predictor_widths)[1] == network.projector_widths[2],
              "predictor output width must match projector output width");
  }
  check_arg(!lr_schedule.empty(), "lr schedule must have at least one band");
  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    bool covered = false;
    for (const LrBand& band : lr_schedule) {
      check_arg(band.lr > 0.0, "lr must be positive");
      if (epoch >= band.start_epoch && epoch <= band.end_epoch) {
        check_arg(!covered, "lr bands overlap at epoch " + std::to_string(epoch));
        covered = true;
      }
    }
    check_arg(covered, "lr schedule does not cover epoch " + std::to_string(epoch));
  }
  eval.validate();
}

double RunConfig::lr_at(int epoch) const {
  for (const LrBand& band : lr_schedule)
    if (epoch >= band.start_epoch && epoch <= band.end_epoch) return band.lr;
  throw std::invalid_argument("lr schedule does not cover epoch " + std::to_string(epoch));
}

int RunConfig::resolved_cluster_count(const data::Dataset& dataset) const {
  if (cluster_count > 0) return cluster_count;
  check_arg(dataset.class_count > 0,
            "cluster_count = 0 requires a dataset with a known class count");
  return dataset.class_count;
}

TrainerState::TrainerState(const RunConfig& config, const data::Dataset& dataset)
    : model_opt(), aug_stream(config.seed, stream_purpose::kAugment) {
  config.validate();
  dataset.validate();
  check_arg(dataset.feature_dim() == config.network.encoder_widths.front(),
            "dataset feature width does not match encoder input width");
  check_arg(dataset.size() >= config.batch_size,
            "dataset smaller than one batch; nothing to train on");
  models::NetworkSpec spec = config.network;
  spec.classifier_classes = 0;  // the head is attached at pseudo-labeling time
  if (config.loss.kind != losses::LossKind::Byol) spec.predictor_widths.reset();
  RngStream init_stream(config.seed, stream_purpose::kInit);
  params = models::init_params(spec, init_stream);
  model_opt = models::AdamState::init(params, config.lr_at(1), config.weight_decay);
  if (config.loss.kind == losses::LossKind::Byol) target = encoder_projector_of(params);
}

void initial_training(const RunConfig& config, const data::Dataset& dataset,
                      TrainerState& state) {
  for (int epoch = 1; epoch <= config.initial_epochs; ++epoch) {
    const EpochStats stats = run_epoch(config, dataset, state, epoch, 0.0);
    state.metrics.push_back(record_epoch(config, epoch, 0.0, stats, state.round));
  }
}

clustering::PseudoLabelSet pseudo_label_round(const RunConfig& config,
                                              const data::Dataset& dataset,
                                              TrainerState& state, int round) {
  const int k = config.resolved_cluster_count(dataset);
  check_arg(k <= dataset.size(), "cluster count exceeds sample count");
  const Matrix embeddings =
      models::forward_embed(state.params, dataset.features, models::Stage::Projector);
  RngStream cluster_stream(config.seed, stream_purpose::kCluster,
                           static_cast<std::uint64_t>(round));
  clustering::PseudoLabelSet labels =
      clustering::assign_pseudo_labels(embeddings, k, cluster_stream);
  labels.round = round;
  if (state.labels && state.labels->k == k) {
    labels = clustering::align_labels(*state.labels, labels);
  } else {
    // First round, or K changed: (re)initialize the classifier head.
    RngStream head_stream(config.seed, stream_purpose::kHead,
                          static_cast<std::uint64_t>(round));
    models::ParameterSet head_set;
    head_set.classifier =
        models::init_classifier(config.network.projector_widths[2], k, head_stream);
    state.head = std::move(head_set);
    state.head_opt = models::AdamState::init(*state.head, config.lr_at(1), config.weight_decay);
  }
  if (dataset.labeled()) {
    const double p = clustering::purity(labels, dataset.labels);
    if (state.round_purities.size() <= static_cast<std::size_t>(round))
      state.round_purities.resize(static_cast<std::size_t>(round) + 1, 0.0);
    state.round_purities[static_cast<std::size_t>(round)] = p;
  }
  return labels;
}

void progressive_training(const RunConfig& config, const data::Dataset& dataset,
                          TrainerState& state) {
  check_arg(config.control_mode || state.labels.has_value(),
            "progressive_training: pseudo-labels must cover the dataset");
  for (int epoch = config.initial_epochs + 1; epoch <= config.total_epochs; ++epoch) {
    const double alpha = config.control_mode ? 0.0 : alpha_at(config.alpha, epoch);
    const EpochStats stats = run_epoch(config, dataset, state, epoch, alpha);
    EpochRecord rec = record_epoch(config, epoch, alpha, stats, state.round);
    const int phase_epoch = epoch - config.initial_epochs;
    if (!config.control_mode && phase_epoch % config.recluster_interval == 0) {
      ++state.round;
      state.labels = pseudo_label_round(config, dataset, state, state.round);
      if (dataset.labeled()) rec.purity = state.round_purities[static_cast<std::size_t>(state.round)];
      rec.round = state.round;
    }
    state.metrics.push_back(std::move(rec));
  }
}

RunReport run_pipeline(const RunConfig& config, const data::Dataset& dataset,
                       const std::string& out_dir) {
  config.validate();
  dataset.validate();
  std::filesystem::create_directories(out_dir);

  RunReport report;
  report.config_echo = config.config_echo;
  report.seed = config.seed;
  report.loss_kind = losses::to_string(config.loss.kind);
  report.control_mode = config.control_mode;
  report.initial_epochs = config.initial_epochs;
  report.total_epochs = config.total_epochs;
  report.cluster_count = config.control_mode ? 0 : config.resolved_cluster_count(dataset);

  TrainerState state(config, dataset);
  try {
    initial_training(config, dataset, state);
    if (!config.control_mode) {
      state.labels = pseudo_label_round(config, dataset, state, 0);
      if (dataset.labeled() && !state.metrics.empty())
        state.metrics.back().purity = state.round_purities[0];
    }
    progressive_training(config, dataset, state);

    if (dataset.labeled()) {
      std::vector<int> order(static_cast<std::size_t>(dataset.size()));
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      RngStream split_stream(config.seed, stream_purpose::kEvalSplit);
      split_stream.shuffle(order);
      const auto n_train = static_cast<std::size_t>(
          std::clamp<double>(std::floor(config.eval.train_fraction * dataset.size()), 1.0,
                             dataset.size() - 1.0));
      Matrix train_x(static_cast<Eigen::Index>(n_train), dataset.feature_dim());
      Matrix test_x(static_cast<Eigen::Index>(order.size() - n_train), dataset.feature_dim());
      std::vector<int> train_y(n_train), test_y(order.size() - n_train);
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_train) {
          train_x.row(static_cast<Eigen::Index>(i)) = dataset.features.row(order[i]);
          train_y[i] = dataset.labels[static_cast<std::size_t>(order[i])];
        } else {
          test_x.row(static_cast<Eigen::Index>(i - n_train)) = dataset.features.row(order[i]);
          test_y[i - n_train] = dataset.labels[static_cast<std::size_t>(order[i])];
        }
      }
      const Matrix train_emb =
          models::forward_embed(state.params, train_x, models::Stage::Encoder);
      const Matrix test_emb = models::forward_embed(state.params, test_x, models::Stage::Encoder);
      report.knn_accuracy = eval::knn_eval(train_emb, train_y, test_emb, test_y,
                                           std::min(config.eval.knn_k, static_cast<int>(n_train)));
      report.probe_accuracy =
          eval::linear_probe(state.params, train_x, train_y, test_x, test_y,
                             dataset.class_count, config.eval, config.seed);
    }
    report.completed = true;
  } catch (const std::exception& e) {
    report.completed = false;
    report.failure = e.what();
  }

  report.metrics = state.metrics;
  report.round_purities = state.round_purities;

  models::Checkpoint ckpt;
  ckpt.spec = config.network;
  if (config.loss.kind != losses::LossKind::Byol) ckpt.spec.predictor_widths.reset();
  ckpt.spec.classifier_classes =
      state.head ? static_cast<int>(state.head->classifier->weight.cols()) : 0;
  ckpt.params = state.params;
  if (state.head) ckpt.params.classifier = state.head->classifier;
  ckpt.target = state.target;
  ckpt.seed = config.seed;
  ckpt.config_echo = config.config_echo;
  report.checkpoint_path =
      (std::filesystem::path(out_dir) / "checkpoint.pssl").string();
  models::save_checkpoint(report.checkpoint_path, ckpt);
  report::write_metrics_jsonl((std::filesystem::path(out_dir) / "metrics.jsonl").string(),
                              report);
  report::write_report_json((std::filesystem::path(out_dir) / "report.json").string(), report);
  return report;
}

RunConfig parse_run_config(const std::string& toml_text) {
  config::Table table = config::parse_toml(toml_text);
  config::KeyTracker keys(table);
  RunConfig cfg;
  cfg.config_echo = toml_text;

  auto get_int = [&keys](const std::string& key, std::optional<std::int64_t> fallback =
                             std::nullopt) -> std::int64_t {
    if (!keys.has(key) && fallback) return *fallback;
    return keys.get(key).as_int(key);
  };
  auto get_double = [&keys](const std::string& key,
                            std::optional<double> fallback = std::nullopt) -> double {
    if (!keys.has(key) && fallback) return *fallback;
    return keys.get(key).as_double(key);
  };
  auto get_bool = [&keys](const std::string& key, bool fallback) -> bool {
    if (!keys.has(key)) return fallback;
    return keys.get(key).as_bool(key);
  };

  cfg.seed = static_cast<std::uint64_t>(get_int("run.seed"));
  cfg.loss.kind = losses::loss_kind_from_string(keys.get("run.loss").as_string("run.loss"));
  cfg.batch_size = static_cast<int>(get_int("run.batch_size", 64));
  cfg.initial_epochs = static_cast<int>(get_int("run.initial_epochs"));
  cfg.total_epochs = static_cast<int>(get_int("run.total_epochs"));
  cfg.recluster_interval = static_cast<int>(get_int("run.recluster_interval"));
  cfg.cluster_count = static_cast<int>(get_int("run.cluster_count", 0));
  cfg.control_mode = get_bool("run.control_mode", false);
  cfg.warm_start = get_bool("run.warm_start", false);

  cfg.loss.temperature = get_double("loss_params.temperature", 0.1);
  cfg.loss.lambda = get_double("loss_params.lambda", 5e-3);
  cfg.loss.epsilon = get_double("loss_params.epsilon", 1e-6);

  {
    const auto& widths = keys.get("network.encoder_widths").as_array("network.encoder_widths");
    for (const config::Value& w : widths)
      cfg.network.encoder_widths.push_back(static_cast<int>(w.as_int("network.encoder_widths")));
    const auto& proj =
        keys.get("network.projector_widths").as_array("network.projector_widths");
    check_arg(proj.size() == 3, "network.projector_widths must have exactly 3 entries");
    for (std::size_t i = 0; i < 3; ++i)
      cfg.network.projector_widths[i] =
          static_cast<int>(proj[i].as_int("network.projector_widths"));
    if (keys.has("network.predictor_widths")) {
      const auto& pred =
          keys.get("network.predictor_widths").as_array("network.predictor_widths");
      check_arg(pred.size() == 2, "network.predictor_widths must have exactly 2 entries");
      cfg.network.predictor_widths = {
          static_cast<int>(pred[0].as_int("network.predictor_widths")),
          static_cast<int>(pred[1].as_int("network.predictor_widths"))};
    } else if (cfg.loss.kind == losses::LossKind::Byol) {
      cfg.network.predictor_widths = {cfg.network.projector_widths[2],
                                      cfg.network.projector_widths[2]};
    }
    cfg.ema_momentum = get_double("network.ema_momentum", 0.99);
  }

  {
    const std::string kind =
        keys.has("augmentation.kind")
            ? keys.get("augmentation.kind").as_string("augmentation.kind")
            : "vector";
    if (kind == "vector") {
      cfg.policy.kind = augment::DataKind::Vector;
    } else if (kind == "image") {
      cfg.policy.kind = augment::DataKind::Image;
    } else {
      throw std::invalid_argument("augmentation.kind must be 'vector' or 'image'");
    }
    cfg.policy.vec.noise_sigma = get_double("augmentation.noise_sigma", 0.0);
    cfg.policy.vec.mask_prob = get_double("augmentation.mask_prob", 0.0);
    cfg.policy.vec.scale_lo = get_double("augmentation.scale_lo", 1.0);
    cfg.policy.vec.scale_hi = get_double("augmentation.scale_hi", 1.0);
    cfg.policy.img.crop_lo = get_double("augmentation.crop_lo", 0.6);
    cfg.policy.img.crop_hi = get_double("augmentation.crop_hi", 1.0);
    cfg.policy.img.flip_prob = get_double("augmentation.flip_prob", 0.5);
    cfg.policy.img.jitter_strength = get_double("augmentation.jitter_strength", 0.4);
    cfg.policy.img.grayscale_prob = get_double("augmentation.grayscale_prob", 0.2);
    cfg.policy.img.blur_lo = get_double("augmentation.blur_lo", 0.0);
    cfg.policy.img.blur_hi = get_double("augmentation.blur_hi", 1.0);
  }

  cfg.weight_decay = get_double("optimizer.weight_decay", 1e-6);
  {
    const auto& bands = keys.get("optimizer.lr_bands").as_array("optimizer.lr_bands");
    for (const config::Value& band : bands) {
      const auto& triple = band.as_array("optimizer.lr_bands");
      check_arg(triple.size() == 3, "optimizer.lr_bands entries must be [start, end, lr]");
      cfg.lr_schedule.push_back({static_cast<int>(triple[0].as_int("optimizer.lr_bands")),
                                 static_cast<int>(triple[1].as_int("optimizer.lr_bands")),
                                 triple[2].as_double("optimizer.lr_bands")});
    }
  }
  if (keys.has("alpha.bands")) {
    const auto& bands = keys.get("alpha.bands").as_array("alpha.bands");
    for (const config::Value& band : bands) {
      const auto& triple = band.as_array("alpha.bands");
      check_arg(triple.size() == 3, "alpha.bands entries must be [start, end, alpha]");
      cfg.alpha.bands.push_back({static_cast<int>(triple[0].as_int("alpha.bands")),
                                 static_cast<int>(triple[1].as_int("alpha.bands")),
                                 triple[2].as_double("alpha.bands")});
    }
  }

  cfg.eval.knn_k = static_cast<int>(get_int("eval.knn_k", 5));
  cfg.eval.probe_epochs = static_cast<int>(get_int("eval.probe_epochs", 100));
  cfg.eval.probe_lr = get_double("eval.probe_lr", 1e-3);
  cfg.eval.probe_batch = static_cast<int>(get_int("eval.probe_batch", 64));
  cfg.eval.train_fraction = get_double("eval.train_fraction", 0.8);
  cfg.eval.bins = static_cast<int>(get_int("eval.bins", 8));

  keys.reject_unknown();
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace pssl::trainer
