#pragma once

#include <string>
#include <vector>

#include "fedprune/experiment.hpp"

namespace fedprune {

// Canonical serialization: key order fixed, wall clock excluded, so equal
// runs produce byte-identical files.
std::string result_to_json(const ExperimentResult& result);
std::string rounds_to_csv(const ExperimentResult& result);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

std::string data_fingerprint(const DataConfig& data);

// Per-method summary loaded back from result files.
struct MethodSummary {
  std::string method;
  int runs = 0;
  double mean_rmse = 0, rmse_std = 0;
  double mean_sparsity = 0;
  double comm_mb = 0;       // idealized, per-client average
  double model_kb = 0;      // idealized, final average client model
  double saved_pct = 0;     // vs fedavg
  double improvement_pct = 0;
  bool has_baseline = false;
  std::string fingerprint;
};

std::vector<MethodSummary> summarize_results(const std::vector<std::string>& files);
std::string comparison_text(const std::vector<MethodSummary>& rows);
std::string comparison_csv(const std::vector<MethodSummary>& rows);

struct RunFiles {
  std::string result_json;
  std::string rounds_csv;
  std::string meta_json;
  std::string model_dir;  // final models as sparse blobs
};

RunFiles write_result_files(const ExperimentResult& result, const std::string& out_dir);
void write_aggregate(const std::vector<ExperimentResult>& results, const std::string& out_dir);

}  // namespace fedprune
