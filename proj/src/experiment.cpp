#include "fedprune/experiment.hpp"

#include <algorithm>

#include "fedprune/report.hpp"
#include "fedprune/rng.hpp"

namespace fedprune {

const char* to_string(Method m) {
  switch (m) {
    case Method::Centralized: return "centralized";
    case Method::LocalOnly: return "local_only";
    case Method::FedAvg: return "fedavg";
    case Method::FedPruning: return "fedpruning";
    case Method::FedPruningLT: return "fedpruning_lt";
    case Method::OneShot: return "one_shot";
    case Method::OneShotLT: return "one_shot_lt";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::Centralized, Method::LocalOnly, Method::FedAvg,
                   Method::FedPruning, Method::FedPruningLT, Method::OneShot,
                   Method::OneShotLT})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method: " + s);
}

ScheduleVariant variant_for(Method m) {
  switch (m) {
    case Method::FedPruning: return ScheduleVariant::Iterative;
    case Method::FedPruningLT: return ScheduleVariant::IterativeLT;
    case Method::OneShot: return ScheduleVariant::OneShot;
    case Method::OneShotLT: return ScheduleVariant::OneShotLT;
    default: return ScheduleVariant::None;
  }
}

ExperimentConfig default_config(Method m) {
  ExperimentConfig c;
  c.method = m;
  c.schedule = default_schedules().at(variant_for(m));
  switch (m) {
    case Method::Centralized:
    case Method::LocalOnly:
      c.rounds = 1;
      c.local_epochs = 300;
      break;
    case Method::FedAvg:
    case Method::OneShot:
    case Method::OneShotLT:
      c.rounds = 40;
      c.local_epochs = 5;
      break;
    case Method::FedPruning:
      c.rounds = 40;
      c.local_epochs = 6;
      break;
    case Method::FedPruningLT:
      c.rounds = 40;
      c.local_epochs = 8;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (local_epochs < 1) throw ConfigError("local epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (seeds.empty()) throw ConfigError("need at least one seed");
  if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0) throw ConfigError("weight decay must be non-negative");
  schedule.validate();
  if (data.synthetic) {
    data.synth.validate();
  } else {
    if (data.csv.path.empty()) throw ConfigError("csv data source needs a path");
    if (data.csv.schema.feature_cols.empty())
      throw ConfigError("csv data source needs feature columns");
  }
}

std::vector<LayerSpec> build_layer_stack(const ModelConfig& mc,
                                         const std::vector<Index>& temporal_groups,
                                         Index static_features) {
  std::vector<LayerSpec> layers;
  Index width = static_features;
  for (Index g : temporal_groups) width += g;

  if (!temporal_groups.empty() && mc.conv_channels > 0) {
    LayerSpec conv = LayerSpec::conv1d(temporal_groups, mc.conv_channels, mc.conv_kernel,
                                       mc.conv_stride, static_features);
    layers.push_back(conv);
    width = conv.output_size();
    layers.push_back(LayerSpec::relu(width));
    if (mc.batchnorm) layers.push_back(LayerSpec::batchnorm(width));
  }
  for (Index h : mc.hidden) {
    layers.push_back(LayerSpec::dense(width, h));
    layers.push_back(LayerSpec::relu(h));
    if (mc.batchnorm) layers.push_back(LayerSpec::batchnorm(h));
    width = h;
  }
  layers.push_back(LayerSpec::dense(width, 1));
  return layers;
}

namespace {

struct PreparedData {
  std::vector<Silo> silos;
  NormStats stats;
  std::vector<Index> temporal_groups;
  Index static_features = 0;
};

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
  PreparedData d;
  if (config.data.synthetic) {
    d.silos = gen_synthetic_silos(config.data.synth);
    d.temporal_groups = config.data.synth.temporal_groups;
    d.static_features = config.data.synth.static_features;
  } else {
    d.silos = load_csv(config.data.csv.path, config.data.csv.schema).silos;
    d.temporal_groups = config.data.csv.temporal_groups;
    Index dim = static_cast<Index>(config.data.csv.schema.feature_cols.size());
    for (Index g : d.temporal_groups) dim -= g;
    if (dim < 0) throw ConfigError("temporal groups exceed the csv feature count");
    d.static_features = dim;
  }
  for (const Silo& s : d.silos)
    if (s.train_idx.empty())
      throw DataError("silo " + s.id + " has no training rows before its latest year");
  d.stats = normalize(d.silos);
  oversample_equalize(d.silos, derive_seed(seed, 0x0e5a11));
  return d;
}

double scaled_eval(const Model<Real>& model, const Silo& silo, const NormStats& stats) {
  return stats.to_original_rmse(
      eval_rmse(model, silo, silo.val_idx.empty() ? silo.train_idx : silo.val_idx));
}

RoundMetrics metrics_from(const std::vector<double>& rmse, const std::vector<double>& sp) {
  RoundMetrics m;
  m.client_rmse = rmse;
  m.client_sparsity = sp;
  m.min_rmse = *std::min_element(rmse.begin(), rmse.end());
  m.max_rmse = *std::max_element(rmse.begin(), rmse.end());
  for (double v : rmse) m.mean_rmse += v;
  m.mean_rmse /= static_cast<double>(rmse.size());
  for (double v : sp) m.mean_sparsity += v;
  m.mean_sparsity /= static_cast<double>(sp.size());
  return m;
}

Silo pooled_silo(const std::vector<Silo>& silos) {
  Silo pool;
  pool.id = "pooled";
  Index total = 0;
  for (const Silo& s : silos) total += s.samples();
  pool.features.resize(total, silos.front().features.cols());
  pool.targets.resize(total);
  Index at = 0;
  for (const Silo& s : silos) {
    pool.features.middleRows(at, s.samples()) = s.features;
    pool.targets.segment(at, s.samples()) = s.targets;
    for (Index i = 0; i < s.samples(); ++i)
      pool.years.push_back(s.years[static_cast<std::size_t>(i)]);
    for (Index i : s.train_idx) pool.train_idx.push_back(at + i);
    for (Index i : s.val_idx) pool.val_idx.push_back(at + i);
    at += s.samples();
  }
  return pool;
}

OptState<Real> opt_for(const ExperimentConfig& config, const Model<Real>& model) {
  return make_opt(model, config.learning_rate, config.weight_decay, config.lr_decay_rounds,
                  config.lr_decay_factor);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();

  ExperimentResult result;
  result.config = config;
  result.seed = seed;
  result.data_fingerprint = data_fingerprint(config.data);

  PreparedData data = prepare_data(config, seed);
  const std::size_t K = data.silos.size();
  const auto layers =
      build_layer_stack(config.model, data.temporal_groups, data.static_features);
  Model<Real> init_model = kaiming_init<Real>(layers, derive_seed(seed, 0x1d17));
  const Mask dense = dense_mask(init_model);
  result.dense_model_kb = report_kb(cost_of(init_model, dense, CostModel::Idealized));

  TrainSettings local{config.local_epochs, config.batch_size, config.early_stop_patience};

  if (config.method == Method::Centralized || config.method == Method::LocalOnly) {
    std::vector<double> rmse, sp;
    if (config.method == Method::Centralized) {
      Silo pool = pooled_silo(data.silos);
      Model<Real> model = init_model;
      OptState<Real> opt = opt_for(config, model);
      train_epochs(model, opt, dense, pool, local, derive_seed(seed, 0xce27));
      for (const Silo& s : data.silos) {
        rmse.push_back(scaled_eval(model, s, data.stats));
        sp.push_back(0.0);
      }
      result.final_models.push_back(std::move(model));
      result.final_masks.push_back(dense);
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        Model<Real> model = init_model;
        OptState<Real> opt = opt_for(config, model);
        train_epochs(model, opt, dense, data.silos[k], local,
                     derive_seed(seed, 0x10ca1, k));
        rmse.push_back(scaled_eval(model, data.silos[k], data.stats));
        sp.push_back(0.0);
        result.final_models.push_back(std::move(model));
        result.final_masks.push_back(dense);
      }
    }
    result.rounds.push_back(metrics_from(rmse, sp));
    result.final_rmse = rmse;
    result.final_sparsity = sp;
    result.final_mean_rmse = result.rounds.back().mean_rmse;
    result.final_mean_sparsity = 0;
    result.avg_model_kb_ideal = result.dense_model_kb;
    result.avg_model_kb_wire = report_kb(cost_of(init_model, dense, CostModel::Wire));
    return result;
  }

  // federated methods
  GlobalState global;
  global.total_rounds = config.rounds;
  global.global_params = init_model.params;

  auto init_snapshot = std::make_shared<const InitSnapshot<Real>>(snapshot_init(init_model));
  std::vector<ClientState> clients(K);
  for (std::size_t k = 0; k < K; ++k) {
    clients[k].id = static_cast<int>(k);
    clients[k].data = &data.silos[k];
    clients[k].model = init_model;
    clients[k].mask = dense;
    clients[k].opt = opt_for(config, clients[k].model);
    clients[k].init = init_snapshot;
  }

  FederationSettings fs;
  fs.epochs = config.local_epochs;
  fs.recovery_epochs = config.effective_recovery_epochs();
  fs.batch_size = config.batch_size;
  fs.early_stop_patience = config.early_stop_patience;
  fs.aggregation = config.method == Method::FedAvg ? AggregationMode::SampleWeighted
                                                   : AggregationMode::Localized;
  fs.eval = config.method == Method::FedAvg ? EvalProtocol::GlobalModel
                                            : EvalProtocol::LocalModels;
  fs.target_scale = static_cast<double>(data.stats.target_std);
  fs.run_seed = seed;
  fs.threads = worker_count_from_env(static_cast<int>(K));

  for (int t = 0; t < config.rounds; ++t)
    result.rounds.push_back(run_round(global, clients, config.schedule, fs));

  if (config.method == Method::FedAvg) {
    Model<Real> global_model = clients.front().model;
    global_model.params = global.global_params;
    result.final_models.push_back(std::move(global_model));
    result.final_masks.push_back(dense);
  } else {
    for (ClientState& c : clients) {
      result.final_models.push_back(std::move(c.model));
      result.final_masks.push_back(c.mask);
    }
  }
  result.final_rmse = result.rounds.back().client_rmse;
  result.final_sparsity = result.rounds.back().client_sparsity;
  result.final_mean_rmse = result.rounds.back().mean_rmse;
  result.final_mean_sparsity = result.rounds.back().mean_sparsity;
  result.total_ideal = global.ledger.total(CostModel::Idealized);
  result.total_wire = global.ledger.total(CostModel::Wire);
  result.per_client_mb_ideal =
      global.ledger.per_client_average(CostModel::Idealized) / 1024.0 / 1000.0;
  result.per_client_mb_wire =
      global.ledger.per_client_average(CostModel::Wire) / 1024.0 / 1000.0;

  double kb_ideal = 0, kb_wire = 0;
  for (std::size_t k = 0; k < result.final_models.size(); ++k) {
    kb_ideal += report_kb(cost_of(result.final_models[k], result.final_masks[k],
                                  CostModel::Idealized));
    kb_wire += report_kb(cost_of(result.final_models[k], result.final_masks[k],
                                 CostModel::Wire));
  }
  result.avg_model_kb_ideal = kb_ideal / static_cast<double>(result.final_models.size());
  result.avg_model_kb_wire = kb_wire / static_cast<double>(result.final_models.size());
  return result;
}

}  // namespace fedprune
