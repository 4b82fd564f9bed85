#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedprune/errors.hpp"
#include "fedprune/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"federated pruning experiment runner"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::string run_config, run_out, run_method;
  std::vector<std::uint64_t> run_seeds;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", run_config, "experiment config (JSON)")->required();
  run->add_option("--out", run_out, "output directory (overrides config)");
  run->add_option("--seeds", run_seeds, "seeds to run (overrides config)");
  run->add_option("--method", run_method, "method override");

  std::vector<std::string> cmp_files;
  std::string cmp_out;
  CLI::App* cmp = app.add_subcommand("compare", "tabulate result files side by side");
  cmp->add_option("files", cmp_files, "result_*.json files")->required();
  cmp->add_option("--out", cmp_out, "also write the table as CSV");

  std::string gen_config, gen_out;
  bool gen_per_silo = false;
  CLI::App* gen = app.add_subcommand("gen-data", "materialize synthetic silos as CSV");
  gen->add_option("--config", gen_config, "config with a synthetic data block")->required();
  gen->add_option("--out", gen_out, "output CSV path (or directory with --per-silo)")
      ->required();
  gen->add_flag("--per-silo", gen_per_silo, "one file per silo instead of a silo_id column");

  try {
    app.parse(argc, argv);
    if (run->parsed())
      return fedprune::cmd_run(run_config, run_out, run_seeds, run_method, quiet);
    if (cmp->parsed()) return fedprune::cmd_compare(cmp_files, cmp_out, quiet);
    if (gen->parsed()) return fedprune::cmd_gen_data(gen_config, gen_out, gen_per_silo, quiet);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const fedprune::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
