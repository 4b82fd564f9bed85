#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedprune/report.hpp"

namespace fedprune {

using json = nlohmann::ordered_json;

namespace {

json schedule_to_json(const PruneSchedule& s) {
  json j;
  j["variant"] = to_string(s.variant);
  j["rate"] = s.rate;
  j["target_sparsity"] = s.target_sparsity;
  j["warmup_rounds"] = s.warmup_rounds;
  j["final_freeze"] = s.final_freeze;
  j["min_recovery_rounds"] = s.min_recovery_rounds;
  j["recovery_factor"] = s.recovery_factor;
  j["lth_reset"] = s.lth_reset;
  j["synchronized"] = s.synchronized_prune;
  return j;
}

void schedule_from_json(const json& j, PruneSchedule& s) {
  if (j.contains("rate")) s.rate = j["rate"].get<double>();
  if (j.contains("target_sparsity")) s.target_sparsity = j["target_sparsity"].get<double>();
  if (j.contains("warmup_rounds")) s.warmup_rounds = j["warmup_rounds"].get<int>();
  if (j.contains("final_freeze")) s.final_freeze = j["final_freeze"].get<int>();
  if (j.contains("min_recovery_rounds"))
    s.min_recovery_rounds = j["min_recovery_rounds"].get<int>();
  if (j.contains("recovery_factor")) s.recovery_factor = j["recovery_factor"].get<double>();
  if (j.contains("lth_reset")) s.lth_reset = j["lth_reset"].get<bool>();
  if (j.contains("synchronized")) s.synchronized_prune = j["synchronized"].get<bool>();
}

json synth_to_json(const SyntheticConfig& s) {
  json j;
  j["num_silos"] = s.num_silos;
  j["min_samples"] = s.min_samples;
  j["max_samples"] = s.max_samples;
  j["temporal_groups"] = s.temporal_groups;
  j["static_features"] = s.static_features;
  j["years"] = s.years;
  j["label_shift"] = s.label_shift;
  j["gain_spread"] = s.gain_spread;
  j["feature_rotation"] = s.feature_rotation;
  j["noise_scale"] = s.noise_scale;
  j["seed"] = s.seed;
  return j;
}

void synth_from_json(const json& j, SyntheticConfig& s) {
  if (j.contains("num_silos")) s.num_silos = j["num_silos"].get<int>();
  if (j.contains("min_samples")) s.min_samples = j["min_samples"].get<int>();
  if (j.contains("max_samples")) s.max_samples = j["max_samples"].get<int>();
  if (j.contains("temporal_groups"))
    s.temporal_groups = j["temporal_groups"].get<std::vector<Index>>();
  if (j.contains("static_features")) s.static_features = j["static_features"].get<Index>();
  if (j.contains("years")) s.years = j["years"].get<int>();
  if (j.contains("label_shift")) s.label_shift = j["label_shift"].get<double>();
  if (j.contains("gain_spread")) s.gain_spread = j["gain_spread"].get<double>();
  if (j.contains("feature_rotation"))
    s.feature_rotation = j["feature_rotation"].get<double>();
  if (j.contains("noise_scale")) s.noise_scale = j["noise_scale"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
}

json csv_to_json(const CsvSource& c) {
  json j;
  j["path"] = c.path;
  j["silo_col"] = c.schema.silo_col;
  j["year_col"] = c.schema.year_col;
  j["feature_cols"] = c.schema.feature_cols;
  j["target_col"] = c.schema.target_col;
  j["temporal_groups"] = c.temporal_groups;
  return j;
}

void csv_from_json(const json& j, CsvSource& c) {
  if (j.contains("path")) c.path = j["path"].get<std::string>();
  if (j.contains("silo_col")) c.schema.silo_col = j["silo_col"].get<std::string>();
  if (j.contains("year_col")) c.schema.year_col = j["year_col"].get<std::string>();
  if (j.contains("feature_cols"))
    c.schema.feature_cols = j["feature_cols"].get<std::vector<std::string>>();
  if (j.contains("target_col")) c.schema.target_col = j["target_col"].get<std::string>();
  if (j.contains("temporal_groups"))
    c.temporal_groups = j["temporal_groups"].get<std::vector<Index>>();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = c.version;
  j["method"] = to_string(c.method);
  j["rounds"] = c.rounds;
  j["local_epochs"] = c.local_epochs;
  j["recovery_epochs"] = c.recovery_epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay_rounds"] = c.lr_decay_rounds;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["weight_decay"] = c.weight_decay;
  j["early_stop_patience"] = c.early_stop_patience;
  j["schedule"] = schedule_to_json(c.schedule);
  j["model"] = {{"conv_channels", c.model.conv_channels},
                {"conv_kernel", c.model.conv_kernel},
                {"conv_stride", c.model.conv_stride},
                {"hidden", c.model.hidden},
                {"batchnorm", c.model.batchnorm}};
  json data;
  if (c.data.synthetic)
    data["synthetic"] = synth_to_json(c.data.synth);
  else
    data["csv"] = csv_to_json(c.data.csv);
  j["data"] = data;
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("method")) throw ConfigError("config is missing \"method\"");
    ExperimentConfig c = default_config(method_from_string(j["method"].get<std::string>()));
    if (j.contains("version")) c.version = j["version"].get<int>();
    if (c.version != 1) throw ConfigError("unsupported config version");
    if (j.contains("rounds")) c.rounds = j["rounds"].get<int>();
    if (j.contains("local_epochs")) c.local_epochs = j["local_epochs"].get<int>();
    if (j.contains("recovery_epochs")) c.recovery_epochs = j["recovery_epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("lr_decay_rounds"))
      c.lr_decay_rounds = j["lr_decay_rounds"].get<std::vector<int>>();
    if (j.contains("lr_decay_factor"))
      c.lr_decay_factor = j["lr_decay_factor"].get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("early_stop_patience"))
      c.early_stop_patience = j["early_stop_patience"].get<int>();
    if (j.contains("schedule")) schedule_from_json(j["schedule"], c.schedule);
    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.contains("conv_channels")) c.model.conv_channels = m["conv_channels"].get<Index>();
      if (m.contains("conv_kernel")) c.model.conv_kernel = m["conv_kernel"].get<Index>();
      if (m.contains("conv_stride")) c.model.conv_stride = m["conv_stride"].get<Index>();
      if (m.contains("hidden")) c.model.hidden = m["hidden"].get<std::vector<Index>>();
      if (m.contains("batchnorm")) c.model.batchnorm = m["batchnorm"].get<bool>();
    }
    if (j.contains("data")) {
      const json& d = j["data"];
      if (d.contains("synthetic") && d.contains("csv"))
        throw ConfigError("data source must be synthetic or csv, not both");
      if (d.contains("synthetic")) {
        c.data.synthetic = true;
        synth_from_json(d["synthetic"], c.data.synth);
      } else if (d.contains("csv")) {
        c.data.synthetic = false;
        csv_from_json(d["csv"], c.data.csv);
      }
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace fedprune
