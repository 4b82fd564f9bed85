#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedprune/data.hpp"
#include "fedprune/federation.hpp"
#include "fedprune/schedule.hpp"

namespace fedprune {

enum class Method {
  Centralized,
  LocalOnly,
  FedAvg,
  FedPruning,
  FedPruningLT,
  OneShot,
  OneShotLT,
};

const char* to_string(Method m);
Method method_from_string(const std::string& s);
ScheduleVariant variant_for(Method m);

struct ModelConfig {
  Index conv_channels = 4;
  Index conv_kernel = 3;
  Index conv_stride = 2;
  std::vector<Index> hidden = {128, 64};
  bool batchnorm = true;
};

struct CsvSource {
  std::string path;
  CsvSchema schema;
  std::vector<Index> temporal_groups;  // leading feature columns fed to conv
};

struct DataConfig {
  bool synthetic = true;
  SyntheticConfig synth;
  CsvSource csv;
};

struct ExperimentConfig {
  int version = 1;
  Method method = Method::FedAvg;
  int rounds = 40;
  int local_epochs = 5;
  int recovery_epochs = -1;  // -1: same as local_epochs
  int batch_size = 32;
  double learning_rate = 5e-3;
  std::vector<int> lr_decay_rounds = {25, 34};
  double lr_decay_factor = 0.2;
  double weight_decay = 1e-4;
  int early_stop_patience = 3;
  PruneSchedule schedule;
  ModelConfig model;
  DataConfig data;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string out_dir = "results";

  int effective_recovery_epochs() const {
    return recovery_epochs > 0 ? recovery_epochs : local_epochs;
  }
  void validate() const;
};

// Rounds/epochs and the pruning schedule a method runs with unless the
// config overrides them.
ExperimentConfig default_config(Method m);

struct ExperimentResult {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::string data_fingerprint;

  std::vector<RoundMetrics> rounds;
  std::vector<Model<Real>> final_models;  // one per client (one total for
  std::vector<Mask> final_masks;          // centralized/fedavg-style methods)
  std::vector<double> final_rmse;
  std::vector<double> final_sparsity;
  double final_mean_rmse = 0;
  double final_mean_sparsity = 0;

  std::uint64_t total_ideal = 0, total_wire = 0;
  double per_client_mb_ideal = 0, per_client_mb_wire = 0;
  double avg_model_kb_ideal = 0, avg_model_kb_wire = 0;
  double dense_model_kb = 0;

  double wall_seconds = 0;  // never part of the canonical serialization
};

std::vector<LayerSpec> build_layer_stack(const ModelConfig& mc,
                                         const std::vector<Index>& temporal_groups,
                                         Index static_features);

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed);

// CLI entry points; return process exit codes (0 ok, 1 runtime, 2 config).
int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::vector<std::uint64_t>& seed_override,
            const std::string& method_override, bool quiet);
int cmd_compare(const std::vector<std::string>& result_files, const std::string& out_csv,
                bool quiet);
int cmd_gen_data(const std::string& config_path, const std::string& out_path, bool per_silo,
                 bool quiet);

}  // namespace fedprune
