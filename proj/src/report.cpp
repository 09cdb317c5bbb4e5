#include "pssl/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace pssl::report {

namespace {

using nlohmann::json;

json record_to_json(const trainer::EpochRecord& r, std::uint64_t seed) {
  json j{{"epoch", r.epoch},     {"phase", r.phase},
         {"lr", r.lr},           {"alpha", r.alpha},
         {"loss_total", r.loss_total}, {"loss_ssl", r.loss_ssl},
         {"loss_ps", r.loss_ps}, {"round", r.round},
         {"seed", seed}};
  if (r.purity) j["purity"] = *r.purity;
  return j;
}

trainer::EpochRecord record_from_json(const json& j) {
  trainer::EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.phase = j.at("phase").get<std::string>();
  r.lr = j.at("lr").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.loss_total = j.at("loss_total").get<double>();
  r.loss_ssl = j.at("loss_ssl").get<double>();
  r.loss_ps = j.at("loss_ps").get<double>();
  r.round = j.at("round").get<int>();
  if (j.contains("purity")) r.purity = j.at("purity").get<double>();
  return r;
}

}  // namespace

void write_metrics_jsonl(const std::string& path, const trainer::RunReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open metrics file: " + path);
  out << json{{"config_echo", report.config_echo}, {"seed", report.seed}}.dump() << "\n";
  for (const trainer::EpochRecord& r : report.metrics)
    out << record_to_json(r, report.seed).dump() << "\n";
  if (!out) throw std::runtime_error("metrics write failed: " + path);
}

void write_report_json(const std::string& path, const trainer::RunReport& report) {
  json j;
  j["config_echo"] = report.config_echo;
  j["seed"] = report.seed;
  j["loss_kind"] = report.loss_kind;
  j["control_mode"] = report.control_mode;
  j["initial_epochs"] = report.initial_epochs;
  j["total_epochs"] = report.total_epochs;
  j["cluster_count"] = report.cluster_count;
  j["round_purities"] = report.round_purities;
  j["knn_accuracy"] = report.knn_accuracy ? json(*report.knn_accuracy) : json(nullptr);
  j["probe_accuracy"] = report.probe_accuracy ? json(*report.probe_accuracy) : json(nullptr);
  j["checkpoint_path"] = report.checkpoint_path;
  j["completed"] = report.completed;
  j["failure"] = report.failure;
  j["metrics"] = json::array();
  for (const trainer::EpochRecord& r : report.metrics)
    j["metrics"].push_back(record_to_json(r, report.seed));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open report file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("report write failed: " + path);
}

trainer::RunReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open report: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed report " + path + ": " + e.what());
  }
  trainer::RunReport r;
  r.config_echo = j.at("config_echo").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.loss_kind = j.at("loss_kind").get<std::string>();
  r.control_mode = j.at("control_mode").get<bool>();
  r.initial_epochs = j.at("initial_epochs").get<int>();
  r.total_epochs = j.at("total_epochs").get<int>();
  r.cluster_count = j.at("cluster_count").get<int>();
  r.round_purities = j.at("round_purities").get<std::vector<double>>();
  if (!j.at("knn_accuracy").is_null()) r.knn_accuracy = j.at("knn_accuracy").get<double>();
  if (!j.at("probe_accuracy").is_null()) r.probe_accuracy = j.at("probe_accuracy").get<double>();
  r.checkpoint_path = j.at("checkpoint_path").get<std::string>();
  r.completed = j.at("completed").get<bool>();
  r.failure = j.at("failure").get<std::string>();
  for (const json& rec : j.at("metrics")) r.metrics.push_back(record_from_json(rec));
  return r;
}

std::string comparison_table(const std::vector<NamedReport>& runs) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "run" << std::setw(8) << "loss" << std::setw(8)
      << "epochs" << std::setw(8) << "rounds" << std::setw(8) << "alpha" << std::setw(14)
      << "final_purity" << std::setw(10) << "knn" << std::setw(10) << "probe"
      << "status\n";
  for (const auto& [name, r] : runs) {
    const double final_alpha = r.metrics.empty() ? 0.0 : r.metrics.back().alpha;
    out << std::left << std::setw(28) << name << std::setw(8) << r.loss_kind << std::setw(8)
        << r.total_epochs << std::setw(8) << r.round_purities.size() << std::setw(8)
        << final_alpha;
    out << std::setw(14);
    if (r.round_purities.empty())
      out << "-";
    else
      out << std::setprecision(4) << r.round_purities.back();
    auto acc = [&out](const std::optional<double>& a) {
      out << std::setw(10);
      if (a)
        out << std::setprecision(4) << *a;
      else
        out << "-";
    };
    acc(r.knn_accuracy);
    acc(r.probe_accuracy);
    out << (r.completed ? "ok" : "failed") << "\n";
  }
  return out.str();
}

void write_plot_csv(const std::string& path, const std::vector<NamedReport>& runs,
                    const std::string& provenance) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open plot csv: " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";
  out << "run,epoch,phase,lr,alpha,loss_total,loss_ssl,loss_ps,round,purity,knn_accuracy,"
         "probe_accuracy\n";
  char buf[64];
  auto num = [&buf](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& [name, r] : runs) {
    for (const trainer::EpochRecord& m : r.metrics) {
      out << name << "," << m.epoch << "," << m.phase << "," << num(m.lr) << ","
          << num(m.alpha) << "," << num(m.loss_total) << "," << num(m.loss_ssl) << ","
          << num(m.loss_ps) << "," << m.round << ",";
      if (m.purity) out << num(*m.purity);
      out << ",";
      const bool last = m.epoch == r.total_epochs;
      if (last && r.knn_accuracy) out << num(*r.knn_accuracy);
      out << ",";
      if (last && r.probe_accuracy) out << num(*r.probe_accuracy);
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("plot csv write failed: " + path);
}

}  // namespace pssl::report
