#include "pssl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pssl/dataset.hpp"
#include "pssl/evaluation.hpp"
#include "pssl/pid.hpp"
#include "pssl/report.hpp"
#include "pssl/trainer.hpp"

namespace pssl::cli {

namespace {

using nlohmann::json;

// Input ingestion problems are usage errors (exit 2); anything thrown past
// them is a runtime failure (exit 3).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

data::Dataset load_dataset(const std::string& path, const std::string& labels_path) {
  try {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".idx")
      return data::load_idx(path, labels_path);
    return data::load_csv(path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

trainer::RunConfig load_config(const std::string& path) {
  try {
    return trainer::parse_run_config_file(path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

json pid_to_json(const pid::PidResult& r) {
  return json{{"joint_mi", r.joint_mi}, {"redundancy", r.redundancy},
              {"unique1", r.unique1},   {"unique2", r.unique2},
              {"synergy", r.synergy}};
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_decompose(const std::string& pmf_path, const std::string& out_path,
                  const std::string& invocation) {
  pid::JointPmf pmf;
  try {
    pmf = pid::load_pmf_csv(pmf_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const pid::PidResult result = pid::decompose(pmf);
  json j = pid_to_json(result);
  j["config_echo"] = invocation;
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json_file(out_path, j);
  }
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& labels_path, const std::string& out_dir) {
  const trainer::RunConfig config = load_config(config_path);
  const data::Dataset dataset = load_dataset(data_path, labels_path);
  const trainer::RunReport report = trainer::run_pipeline(config, dataset, out_dir);
  if (!report.completed) throw std::runtime_error("run failed: " + report.failure);
  std::cout << "run complete: knn=";
  if (report.knn_accuracy)
    std::cout << *report.knn_accuracy;
  else
    std::cout << "n/a";
  std::cout << " probe=";
  if (report.probe_accuracy)
    std::cout << *report.probe_accuracy;
  else
    std::cout << "n/a";
  std::cout << " artifacts=" << out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& data_path, const std::string& labels_path,
             const std::string& out_path, const std::string& invocation) {
  const trainer::RunConfig config = load_config(config_path);
  const data::Dataset dataset = load_dataset(data_path, labels_path);
  if (!dataset.labeled()) throw UsageError("eval requires a labeled dataset");
  models::Checkpoint ckpt;
  try {
    ckpt = models::load_checkpoint(checkpoint_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  check_arg(dataset.feature_dim() == ckpt.spec.encoder_widths.front(),
            "dataset feature width does not match checkpoint encoder input");

  std::vector<int> order(static_cast<std::size_t>(dataset.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  RngStream split_stream(config.seed, stream_purpose::kEvalSplit);
  split_stream.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::clamp<double>(
      std::floor(config.eval.train_fraction * dataset.size()), 1.0, dataset.size() - 1.0));
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

  const Matrix train_emb = models::forward_embed(ckpt.params, train_x, models::Stage::Encoder);
  const Matrix test_emb = models::forward_embed(ckpt.params, test_x, models::Stage::Encoder);
  const double knn =
      eval::knn_eval(train_emb, train_y, test_emb, test_y,
                     std::min(config.eval.knn_k, static_cast<int>(n_train)));
  const double probe = eval::linear_probe(ckpt.params, train_x, train_y, test_x, test_y,
                                          dataset.class_count, config.eval, config.seed);

  // Embedding diagnostics over two augmented views of the test split.
  RngStream diag_stream(config.seed, stream_purpose::kAugment, 0xd1a6);
  Matrix v1(test_x.rows(), test_x.cols()), v2(test_x.rows(), test_x.cols());
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    Vector sample = test_x.row(i).transpose();
    auto [a, b] = augment::make_views(sample, config.policy.vec, diag_stream);
    v1.row(i) = a.transpose();
    v2.row(i) = b.transpose();
  }
  const Matrix z1 = models::forward_embed(ckpt.params, v1, models::Stage::Encoder);
  const Matrix z2 = models::forward_embed(ckpt.params, v2, models::Stage::Encoder);
  const eval::RedundancyProxy proxy = eval::redundancy_proxy(z1, z2);
  const pid::PidResult diag = eval::pid_diagnostic_mean(z1, z2, test_y, config.eval.bins);

  json j;
  j["knn_accuracy"] = knn;
  j["probe_accuracy"] = probe;
  j["redundancy_proxy"] = {{"mean_abs_offdiag", proxy.mean_abs_offdiag},
                           {"mean_diag", proxy.mean_diag}};
  j["pid_diagnostic_mean"] = pid_to_json(diag);
  j["config_echo"] = config.config_echo;
  j["seed"] = config.seed;
  j["checkpoint"] = checkpoint_path;
  j["invocation"] = invocation;
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json_file(out_path, j);
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& report_paths, const std::string& csv_path,
               const std::string& invocation) {
  std::vector<report::NamedReport> runs;
  for (const std::string& path : report_paths) {
    try {
      runs.emplace_back(std::filesystem::path(path).parent_path().filename().string() + "/" +
                            std::filesystem::path(path).filename().string(),
                        report::read_report_json(path));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  std::cout << report::comparison_table(runs);
  if (!csv_path.empty()) report::write_plot_csv(csv_path, runs, invocation);
  return kExitOk;
}

int cmd_synth(int n, int d, int k, double separation, double sigma, std::uint64_t seed,
              bool unlabeled, const std::string& out_path, const std::string& invocation) {
  data::Dataset dataset;
  try {
    dataset = data::make_blobs(n, d, k, separation, sigma, seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (unlabeled) {
    dataset.labels.clear();
    dataset.class_count = 0;
  }
  data::write_csv(dataset, out_path, invocation + " seed=" + std::to_string(seed));
  std::cout << "wrote " << dataset.size() << " samples to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"progressive self-supervision pipeline and PID toolkit"};
  app.require_subcommand(1);

  std::string invocation = "pssl";
  for (const std::string& a : args) invocation += " " + a;

  // decompose
  auto* decompose = app.add_subcommand("decompose", "decompose a pmf csv into PID components");
  std::string pmf_path, decompose_out;
  decompose->add_option("--pmf", pmf_path, "joint pmf csv (header s1,s2,t,p)")->required();
  decompose->add_option("--out", decompose_out, "output json path (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "run the training pipeline");
  std::string config_path, data_path, labels_path, out_dir;
  train->add_option("--config", config_path, "run config (toml)")->required();
  train->add_option("--data", data_path, "dataset csv or idx file")->required();
  train->add_option("--labels", labels_path, "labels idx file (image datasets)");
  train->add_option("--out-dir", out_dir, "artifact directory")->required();

  // eval
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_config, eval_ckpt, eval_data, eval_labels, eval_out;
  evalc->add_option("--config", eval_config, "run config (toml)")->required();
  evalc->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  evalc->add_option("--data", eval_data, "labeled dataset csv or idx file")->required();
  evalc->add_option("--labels", eval_labels, "labels idx file (image datasets)");
  evalc->add_option("--out", eval_out, "output json path (default stdout)");

  // report
  auto* reportc = app.add_subcommand("report", "compare run reports");
  std::vector<std::string> report_paths;
  std::string plot_csv;
  reportc->add_option("reports", report_paths, "report.json files")->required();
  reportc->add_option("--plot-csv", plot_csv, "write per-epoch series csv");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic blob dataset");
  int n = 2000, d = 32, k = 10;
  double separation = 5.0, sigma = 1.0;
  std::uint64_t seed = 1;
  bool unlabeled = false;
  std::string synth_out;
  synth->add_option("--n", n, "sample count");
  synth->add_option("--d", d, "feature dimension");
  synth->add_option("--k", k, "blob count");
  synth->add_option("--sep", separation, "center separation (radius)");
  synth->add_option("--sigma", sigma, "per-axis noise");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_flag("--unlabeled", unlabeled, "drop labels from the output");
  synth->add_option("--out", synth_out, "output csv path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (decompose->parsed()) return cmd_decompose(pmf_path, decompose_out, invocation);
    if (train->parsed()) return cmd_train(config_path, data_path, labels_path, out_dir);
    if (evalc->parsed())
      return cmd_eval(eval_config, eval_ckpt, eval_data, eval_labels, eval_out, invocation);
    if (reportc->parsed()) return cmd_report(report_paths, plot_csv, invocation);
    if (synth->parsed())
      return cmd_synth(n, d, k, separation, sigma, seed, unlabeled, synth_out, invocation);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

}  // namespace pssl::cli
