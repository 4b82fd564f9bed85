#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fedprune/comms.hpp"
#include "fedprune/data.hpp"
#include "fedprune/model.hpp"
#include "fedprune/optimizer.hpp"
#include "fedprune/pruning.hpp"
#include "fedprune/schedule.hpp"
#include "fedprune/training.hpp"

namespace fedprune {

struct ClientState {
  int id = 0;
  const Silo* data = nullptr;
  Model<Real> model;
  Mask mask;
  OptState<Real> opt;
  std::shared_ptr<const InitSnapshot<Real>> init;
  LossHistory history;
};

struct GlobalState {
  int round = 0;
  int total_rounds = 0;
  Vec<Real> global_params;
  CostLedger ledger;
};

struct RoundMetrics {
  int round = 0;
  std::vector<double> client_rmse;
  std::vector<double> client_sparsity;
  double mean_rmse = 0, min_rmse = 0, max_rmse = 0;
  double mean_sparsity = 0;
  std::uint64_t upload_ideal = 0, download_ideal = 0;
  std::uint64_t upload_wire = 0, download_wire = 0;
};

enum class AggregationMode { Localized, SampleWeighted };
enum class EvalProtocol { LocalModels, GlobalModel };

struct FederationSettings {
  int epochs = 5;
  int recovery_epochs = 5;
  int batch_size = 32;
  int early_stop_patience = 3;
  AggregationMode aggregation = AggregationMode::Localized;
  EvalProtocol eval = EvalProtocol::LocalModels;
  double target_scale = 1.0;  // multiplies normalized RMSE back to data units
  std::uint64_t run_seed = 1;
  int threads = 1;
};

struct ClientUpload {
  const Vec<Real>* params;
  const Mask* mask;
  Index samples = 1;
};

// Per-position mean over the clients whose masks keep that position;
// positions pruned everywhere keep the previous global value. Non-prunable
// params average over all clients. Accumulation runs in ascending client
// order so results are order-deterministic.
Vec<Real> aggregate_localized(const std::vector<ClientUpload>& uploads,
                              const Vec<Real>& previous_global, const Model<Real>& layout);

// Sample-count-weighted mean of every position; equal counts reduce to the
// plain mean.
Vec<Real> aggregate_fedavg(const std::vector<ClientUpload>& uploads);

// Download -> local train -> gated prune (optional lottery-ticket reset) ->
// recovery train. Independent gating; the coordinator drives the
// synchronized variant through the phase functions below.
void client_update(const GlobalState& global, ClientState& client,
                   const PruneSchedule& schedule, const FederationSettings& settings);

// phase split used by run_round
void client_download(const GlobalState& global, ClientState& client);
bool client_train_phase(const GlobalState& global, ClientState& client,
                        const PruneSchedule& schedule, const FederationSettings& settings);
void client_prune_phase(ClientState& client, const PruneSchedule& schedule,
                        const FederationSettings& settings, bool decision, int round);

// One communication round: broadcast, parallel client updates, upload,
// aggregation, metrics + cost accounting.
RoundMetrics run_round(GlobalState& global, std::vector<ClientState>& clients,
                       const PruneSchedule& schedule, const FederationSettings& settings);

int worker_count_from_env(int clients);

}  // namespace fedprune
