#include "fedprune/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

#include "fedprune/rng.hpp"

namespace fedprune {

namespace {

// Runs fn(k) for each client index, at most `threads` at a time. Work items
// are independent; results land in per-client state, so order is immaterial.
// The first worker exception is rethrown on the calling thread.
void parallel_clients(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(threads, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double client_val_rmse(const ClientState& c, double scale) {
  return scale * eval_rmse(c.model, *c.data,
                           c.data->val_idx.empty() ? c.data->train_idx : c.data->val_idx);
}

}  // namespace

int worker_count_from_env(int clients) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FEDPRUNE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = cap;
  }
  if (n <= 0) n = 1;
  return std::min(n, std::max(1, clients));
}

Vec<Real> aggregate_localized(const std::vector<ClientUpload>& uploads,
                              const Vec<Real>& previous_global, const Model<Real>& layout) {
  if (uploads.empty()) throw DomainError("aggregation needs at least one upload");
  const Index n = previous_global.size();
  for (const ClientUpload& u : uploads) {
    if (u.params->size() != n) throw ShapeError("upload length mismatch in aggregation");
    check_aligned(layout, *u.mask);
  }

  Vec<Real> sum = Vec<Real>::Zero(n);
  Vec<Real> count = Vec<Real>::Zero(n);
  Vec<Real> keep(n);
  for (const ClientUpload& u : uploads) {
    keep.setOnes();  // non-prunable positions take part for every client
    for (const auto& r : layout.regions)
      for (Index j = 0; j < r.count; ++j)
        if (!u.mask->bits[r.mask_offset + j]) keep[r.param_offset + j] = 0;
    sum.array() += u.params->array() * keep.array();
    count += keep;
  }

  Vec<Real> out(n);
  for (Index i = 0; i < n; ++i)
    out[i] = count[i] > Real(0) ? sum[i] / count[i] : previous_global[i];
  return out;
}

Vec<Real> aggregate_fedavg(const std::vector<ClientUpload>& uploads) {
  if (uploads.empty()) throw DomainError("aggregation needs at least one upload");
  const Index n = uploads.front().params->size();
  bool equal = true;
  for (const ClientUpload& u : uploads) {
    if (u.params->size() != n) throw ShapeError("upload length mismatch in aggregation");
    if (u.samples <= 0) throw DomainError("non-positive sample count");
    equal = equal && u.samples == uploads.front().samples;
  }
  if (equal) {
    Vec<Real> sum = Vec<Real>::Zero(n);
    for (const ClientUpload& u : uploads) sum += *u.params;
    return sum / static_cast<Real>(uploads.size());
  }
  Vec<double> sum = Vec<double>::Zero(n);
  double total = 0;
  for (const ClientUpload& u : uploads) {
    sum += static_cast<double>(u.samples) * u.params->cast<double>();
    total += static_cast<double>(u.samples);
  }
  return (sum / total).cast<Real>();
}

void client_download(const GlobalState& global, ClientState& client) {
  if (global.global_params.size() != client.model.param_count())
    throw ShapeError("global parameter vector does not match client model");
  client.model.params = global.global_params;
  apply_mask(client.model, client.mask);  // batchnorm running stats stay local
}

bool client_train_phase(const GlobalState& global, ClientState& client,
                        const PruneSchedule& schedule, const FederationSettings& settings) {
  client.opt.round = global.round;
  TrainSettings ts{settings.epochs, settings.batch_size, settings.early_stop_patience};
  train_epochs(client.model, client.opt, client.mask, *client.data, ts,
               derive_seed(settings.run_seed, static_cast<std::uint64_t>(client.id),
                           static_cast<std::uint64_t>(global.round), 1));
  client.history.record(client_val_rmse(client, settings.target_scale));
  return should_prune(schedule, client.history, global.round, global.total_rounds,
                      sparsity(client.mask).pruned_fraction);
}

void client_prune_phase(ClientState& client, const PruneSchedule& schedule,
                        const FederationSettings& settings, bool decision, int round) {
  if (!decision) return;
  client.mask = magnitude_prune(client.model, client.mask, schedule.rate);
  client.history.record_prune(round);
  if (schedule.lth_reset)
    reset_to_init(client.model, *client.init, client.mask, &client.opt);
  else
    apply_mask(client.model, client.mask);
  TrainSettings ts{settings.recovery_epochs, settings.batch_size,
                   settings.early_stop_patience};
  train_epochs(client.model, client.opt, client.mask, *client.data, ts,
               derive_seed(settings.run_seed, static_cast<std::uint64_t>(client.id),
                           static_cast<std::uint64_t>(round), 2));
}

void client_update(const GlobalState& global, ClientState& client,
                   const PruneSchedule& schedule, const FederationSettings& settings) {
  client_download(global, client);
  const bool decision = client_train_phase(global, client, schedule, settings);
  client_prune_phase(client, schedule, settings, decision, global.round);
}

RoundMetrics run_round(GlobalState& global, std::vector<ClientState>& clients,
                       const PruneSchedule& schedule, const FederationSettings& settings) {
  if (global.round >= global.total_rounds) throw DomainError("round counter exceeded T");
  if (clients.empty()) throw DomainError("no clients");
  const int t = global.round;
  const std::size_t K = clients.size();

  for (ClientState& c : clients) {
    global.ledger.record(t, c.id, Direction::Download,
                         cost_of(c.model, c.mask, CostModel::Idealized),
                         cost_of(c.model, c.mask, CostModel::Wire));
    client_download(global, c);
  }

  std::vector<std::uint8_t> votes(K, 0);
  parallel_clients(K, settings.threads, [&](std::size_t k) {
    votes[k] = client_train_phase(global, clients[k], schedule, settings) ? 1 : 0;
  });

  std::vector<std::uint8_t> decisions = votes;
  if (schedule.synchronized_prune) {
    std::size_t ayes = 0;
    for (std::uint8_t v : votes) ayes += v;
    const bool prune_all = 2 * ayes >= K;
    for (std::size_t k = 0; k < K; ++k) {
      const bool eligible =
          t >= schedule.warmup_rounds && t < global.total_rounds - schedule.final_freeze &&
          sparsity(clients[k].mask).pruned_fraction < schedule.target_sparsity &&
          (!schedule.one_shot() || clients[k].history.prune_events() == 0);
      decisions[k] = (prune_all && eligible) ? 1 : 0;
    }
  }

  parallel_clients(K, settings.threads, [&](std::size_t k) {
    client_prune_phase(clients[k], schedule, settings, decisions[k] != 0, t);
  });

  std::vector<ClientUpload> uploads;
  uploads.reserve(K);
  for (ClientState& c : clients) {
    global.ledger.record(t, c.id, Direction::Upload,
                         cost_of(c.model, c.mask, CostModel::Idealized),
                         cost_of(c.model, c.mask, CostModel::Wire));
    uploads.push_back({&c.model.params, &c.mask,
                       static_cast<Index>(c.data->train_idx.size())});
  }

  if (settings.aggregation == AggregationMode::Localized)
    global.global_params = aggregate_localized(uploads, global.global_params,
                                               clients.front().model);
  else
    global.global_params = aggregate_fedavg(uploads);

  RoundMetrics m;
  m.round = t;
  for (const ClientState& c : clients) {
    double rmse;
    if (settings.eval == EvalProtocol::GlobalModel) {
      Model<Real> probe = c.model;  // keeps the client's local batchnorm stats
      probe.params = global.global_params;
      rmse = settings.target_scale *
             eval_rmse(probe, *c.data, c.data->val_idx.empty() ? c.data->train_idx
                                                               : c.data->val_idx);
    } else {
      rmse = client_val_rmse(c, settings.target_scale);
    }
    m.client_rmse.push_back(rmse);
    m.client_sparsity.push_back(sparsity(c.mask).pruned_fraction);
  }
  m.mean_rmse = 0;
  m.mean_sparsity = 0;
  m.min_rmse = m.client_rmse.front();
  m.max_rmse = m.client_rmse.front();
  for (std::size_t k = 0; k < K; ++k) {
    m.mean_rmse += m.client_rmse[k];
    m.mean_sparsity += m.client_sparsity[k];
    m.min_rmse = std::min(m.min_rmse, m.client_rmse[k]);
    m.max_rmse = std::max(m.max_rmse, m.client_rmse[k]);
  }
  m.mean_rmse /= static_cast<double>(K);
  m.mean_sparsity /= static_cast<double>(K);
  m.upload_ideal = global.ledger.round_total(t, CostModel::Idealized, Direction::Upload);
  m.download_ideal = global.ledger.round_total(t, CostModel::Idealized, Direction::Download);
  m.upload_wire = global.ledger.round_total(t, CostModel::Wire, Direction::Upload);
  m.download_wire = global.ledger.round_total(t, CostModel::Wire, Direction::Download);

  global.round += 1;
  return m;
}

}  // namespace fedprune
