#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fedprune/report.hpp"

namespace fedprune {

namespace {

void say(bool quiet, const std::string& msg) {
  if (!quiet) std::fputs((msg + "\n").c_str(), stdout);
}

}  // namespace

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::vector<std::uint64_t>& seed_override,
            const std::string& method_override, bool quiet) {
  ExperimentConfig config = load_config_file(config_path);
  if (!method_override.empty()) {
    const Method m = method_from_string(method_override);
    ExperimentConfig fresh = default_config(m);
    // method override swaps rounds/epochs/schedule to that method's defaults
    config.method = m;
    config.rounds = fresh.rounds;
    config.local_epochs = fresh.local_epochs;
    config.schedule = fresh.schedule;
  }
  if (!seed_override.empty()) config.seeds = seed_override;
  if (!out_override.empty()) config.out_dir = out_override;
  config.validate();

  std::vector<ExperimentResult> results;
  for (std::uint64_t seed : config.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult r = run_experiment(config, seed);
    r.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    RunFiles files = write_result_files(r, config.out_dir);
    say(quiet, to_string(config.method) + std::string(" seed ") + std::to_string(seed) +
                   ": rmse " + std::to_string(r.final_mean_rmse) + ", sparsity " +
                   std::to_string(r.final_mean_sparsity) + " -> " + files.result_json);
    results.push_back(std::move(r));
  }
  if (results.size() > 1) write_aggregate(results, config.out_dir);
  return 0;
}

int cmd_compare(const std::vector<std::string>& result_files, const std::string& out_csv,
                bool quiet) {
  std::vector<MethodSummary> rows = summarize_results(result_files);
  const std::string text = comparison_text(rows);
  if (!quiet) std::fputs(text.c_str(), stdout);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw DataError("cannot write " + out_csv);
    out << comparison_csv(rows);
  }
  return 0;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path, bool per_silo,
                 bool quiet) {
  ExperimentConfig config = load_config_file(config_path);
  if (!config.data.synthetic) throw ConfigError("gen-data needs a synthetic data source");
  std::vector<Silo> silos = gen_synthetic_silos(config.data.synth);
  CsvSchema schema = schema_for_dim(config.data.synth.feature_dim());

  namespace fs = std::filesystem;
  if (per_silo) {
    fs::create_directories(out_path);
    for (const Silo& s : silos) {
      const std::string file = (fs::path(out_path) / (s.id + ".csv")).string();
      save_csv(file, {s}, schema);
      say(quiet, "wrote " + file);
    }
  } else {
    if (fs::path(out_path).has_parent_path())
      fs::create_directories(fs::path(out_path).parent_path());
    save_csv(out_path, silos, schema);
    say(quiet, "wrote " + out_path);
  }
  return 0;
}

}  // namespace fedprune
