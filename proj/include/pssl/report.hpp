#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pssl/trainer.hpp"

namespace pssl::report {

// One JSON object per line: a leading provenance record carrying the config
// echo and seed, then one record per epoch.
void write_metrics_jsonl(const std::string& path, const trainer::RunReport& report);

void write_report_json(const std::string& path, const trainer::RunReport& report);
trainer::RunReport read_report_json(const std::string& path);

using NamedReport = std::pair<std::string, trainer::RunReport>;

// Plain-text comparison table, one row per run.
std::string comparison_table(const std::vector<NamedReport>& runs);

// Long-format CSV of loss / alpha / purity / accuracy versus epoch for every
// run, for external plotting.
void write_plot_csv(const std::string& path, const std::vector<NamedReport>& runs,
                    const std::string& provenance);

}  // namespace pssl::report
