#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pssl/augmentation.hpp"
#include "pssl/clustering.hpp"
#include "pssl/dataset.hpp"
#include "pssl/evaluation.hpp"
#include "pssl/losses.hpp"
#include "pssl/models.hpp"

namespace pssl::trainer {

struct AlphaBand {
  int start_epoch = 0;  // inclusive, 1-based
  int end_epoch = 0;    // inclusive
  double alpha = 0.0;
};

// Alpha is zero before the first band and outside every band.
struct AlphaSchedule {
  std::vector<AlphaBand> bands;  // non-overlapping, ascending
  void validate() const;
};

double alpha_at(const AlphaSchedule& schedule, int epoch);

struct LrBand {
  int start_epoch = 0;
  int end_epoch = 0;
  double lr = 0.0;
};

struct RunConfig {
  losses::LossParams loss;
  models::NetworkSpec network;
  double ema_momentum = 0.99;  // byol target network
  augment::AugmentationPolicy policy;
  int initial_epochs = 20;
  int total_epochs = 100;
  int recluster_interval = 10;
  int cluster_count = 0;  // 0 = use the dataset's class count
  AlphaSchedule alpha;
  std::vector<LrBand> lr_schedule;
  double weight_decay = 1e-6;
  int batch_size = 64;
  std::uint64_t seed = 1;
  bool control_mode = false;  // forces alpha == 0 and skips pseudo-labeling
  bool warm_start = false;    // reserved; only false is supported
  eval::EvalConfig eval;
  std::string config_echo;  // raw config text, embedded in artifacts

  void validate() const;
  double lr_at(int epoch) const;
  int resolved_cluster_count(const data::Dataset& dataset) const;
};

RunConfig parse_run_config(const std::string& toml_text);
RunConfig parse_run_config_file(const std::string& path);

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "initial" or "progressive"
  double lr = 0.0;
  double alpha = 0.0;
  double loss_total = 0.0;
  double loss_ssl = 0.0;
  double loss_ps = 0.0;
  int round = 0;
  std::optional<double> purity;  // only on re-cluster epochs of labeled data
};

struct RunReport {
  std::string config_echo;
  std::uint64_t seed = 0;
  std::string loss_kind;
  bool control_mode = false;
  int initial_epochs = 0;
  int total_epochs = 0;
  int cluster_count = 0;
  std::vector<EpochRecord> metrics;
  std::vector<double> round_purities;  // indexed by round
  std::optional<double> knn_accuracy;
  std::optional<double> probe_accuracy;
  std::string checkpoint_path;
  bool completed = false;
  std::string failure;
};

// Mutable training state threaded through the phases. The classifier head
// lives in its own parameter set so the model optimizer's state stays aligned
// when the head is attached at pseudo-labeling time.
struct TrainerState {
  models::ParameterSet params;                 // encoder + projector (+ predictor)
  std::optional<models::ParameterSet> head;    // classifier only
  std::optional<models::ParameterSet> target;  // byol EMA network
  models::AdamState model_opt;
  std::optional<models::AdamState> head_opt;
  std::optional<clustering::PseudoLabelSet> labels;
  RngStream aug_stream;
  std::vector<EpochRecord> metrics;
  std::vector<double> round_purities;
  int round = 0;

  TrainerState(const RunConfig& config, const data::Dataset& dataset);
};

// Phase 1: SSL-only epochs 1..initial_epochs.
void initial_training(const RunConfig& config, const data::Dataset& dataset,
                      TrainerState& state);

// Forwards the un-augmented samples through encoder+projector with weights
// fixed, clusters them, aligns ids with the previous round when K matches.
clustering::PseudoLabelSet pseudo_label_round(const RunConfig& config,
                                              const data::Dataset& dataset,
                                              TrainerState& state, int round);

// Phase 3: epochs initial_epochs+1..total_epochs with the combined loss and
// periodic re-clustering.
void progressive_training(const RunConfig& config, const data::Dataset& dataset,
                          TrainerState& state);

// initial_training -> pseudo-labeling -> progressive_training -> evaluation;
// persists metrics.jsonl, report.json and checkpoint.pssl under out_dir.
RunReport run_pipeline(const RunConfig& config, const data::Dataset& dataset,
                       const std::string& out_dir);

}  // namespace pssl::trainer
