// Acceptance suite: one pass/fail line per criterion, exit code counts the
// failures. Runs the full desk-scale experiment grid, so expect a few
// minutes of compute.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "fedprune/backward.hpp"
#include "fedprune/comms.hpp"
#include "fedprune/experiment.hpp"
#include "fedprune/federation.hpp"
#include "fedprune/report.hpp"
#include "support/builders.hpp"
#include "support/finite_diff.hpp"

using namespace fedprune;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("criterion %d [%s]: %s (%s)\n", number, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig desk_config(Method m) {
  ExperimentConfig c = default_config(m);  // default synthetic: 9 silos, T=40
  c.out_dir.clear();
  return c;
}

// --- criterion 1: analytic gradients vs central finite differences ---------

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260808);
  double worst = 0;
  int conv_models = 0;
  const int models = 24;
  for (int rep = 0; rep < models; ++rep) {
    Model<double> m = kaiming_init<double>(testing::mixed_layer_stack(rng),
                                           7000 + static_cast<std::uint64_t>(rep));
    if (m.param_count() > 500) {
      report(1, "gradient oracle", false, "model exceeded 500 params");
      return;
    }
    if (m.layers.front().kind == LayerKind::Conv1d) ++conv_models;
    Batch<double> batch = testing::random_batch<double>(rng, 10, m.input_size());
    Mask mask = rep % 3 == 2 ? testing::random_mask(rng, m, 0.7) : dense_mask(m);
    apply_mask(m, mask);
    worst = std::max(worst,
                     testing::gradient_check(m, batch, mask, backward(m, batch, mask)));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d models, %d with conv front-ends, max rel err %.3g, %.1fs", models,
                conv_models, worst, secs);
  report(1, "gradient oracle", worst < 1e-4 && conv_models > 0 && secs < 60.0, detail);
}

// --- criterion 2: localized aggregation vs brute force ----------------------

Vec<Real> brute_force(const std::vector<ClientUpload>& uploads, const Vec<Real>& prev,
                      const Model<Real>& layout) {
  Vec<Real> out(prev.size());
  for (Index i = 0; i < prev.size(); ++i) {
    Real sum = 0, count = 0;
    for (const ClientUpload& u : uploads) {
      const Index mi = layout.mask_index[i];
      if (mi >= 0 && !u.mask->bits[mi]) continue;
      sum += (*u.params)[i];
      count += 1;
    }
    out[i] = count > 0 ? sum / count : prev[i];
  }
  return out;
}

void criterion_aggregation() {
  const auto t0 = std::chrono::steady_clock::now();
  Model<Real> layout = kaiming_init<Real>({LayerSpec::dense(4, 1)}, 1);  // 4 weights
  Rng rng(99);
  Vec<Real> base(layout.param_count());
  for (Index i = 0; i < base.size(); ++i) base[i] = static_cast<Real>(rng.normal());

  long exhaustive_fails = 0;
  for (unsigned combo = 0; combo < (1u << 12); ++combo) {
    std::vector<Mask> masks(3, dense_mask(layout));
    std::vector<Vec<Real>> params(3);
    for (int k = 0; k < 3; ++k) {
      for (int j = 0; j < 4; ++j)
        masks[static_cast<std::size_t>(k)].bits[static_cast<std::size_t>(j)] =
            (combo >> (4 * k + j)) & 1u;
      params[static_cast<std::size_t>(k)] =
          base * static_cast<Real>(k + 1);  // distinct values per client
      Model<Real> tmp = layout;
      tmp.params = params[static_cast<std::size_t>(k)];
      apply_mask(tmp, masks[static_cast<std::size_t>(k)]);
      params[static_cast<std::size_t>(k)] = tmp.params;
    }
    std::vector<ClientUpload> uploads;
    for (int k = 0; k < 3; ++k)
      uploads.push_back({&params[static_cast<std::size_t>(k)],
                         &masks[static_cast<std::size_t>(k)], 1});
    Vec<Real> prev = -base;
    if (aggregate_localized(uploads, prev, layout) != brute_force(uploads, prev, layout))
      ++exhaustive_fails;
  }

  long random_fails = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Index w = 10 + static_cast<Index>(rng.index(40));
    Model<Real> big = kaiming_init<Real>({LayerSpec::dense(w, 3)},
                                         200 + static_cast<std::uint64_t>(rep));
    const int K = 2 + static_cast<int>(rng.index(5));
    std::vector<Mask> masks;
    std::vector<Vec<Real>> params;
    for (int k = 0; k < K; ++k) {
      Mask m = dense_mask(big);
      for (auto& bit : m.bits) bit = rng.uniform01() < 0.6 ? 1 : 0;
      Model<Real> tmp = big;
      for (Index i = 0; i < tmp.params.size(); ++i)
        tmp.params[i] = static_cast<Real>(rng.normal());
      apply_mask(tmp, m);
      masks.push_back(std::move(m));
      params.push_back(tmp.params);
    }
    std::vector<ClientUpload> uploads;
    for (int k = 0; k < K; ++k)
      uploads.push_back({&params[static_cast<std::size_t>(k)],
                         &masks[static_cast<std::size_t>(k)], 1});
    Vec<Real> prev(big.param_count());
    for (Index i = 0; i < prev.size(); ++i) prev[i] = static_cast<Real>(rng.normal());
    if (aggregate_localized(uploads, prev, big) != brute_force(uploads, prev, big))
      ++random_fails;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "4096 exhaustive (%ld mismatches), 1000 random (%ld mismatches), %.1fs",
                exhaustive_fails, random_fails, secs);
  report(2, "aggregation oracle", exhaustive_fails == 0 && random_fails == 0 && secs < 60.0,
         detail);
}

// --- criterion 3: schedule arithmetic ---------------------------------------

void criterion_schedule() {
  const int T = 40;
  auto drive = [&](const PruneSchedule& s, Index* total_out) {
    Model<Real> model = kaiming_init<Real>(
        build_layer_stack(ModelConfig{}, {8, 8, 6}, 4), 11);
    Mask mask = dense_mask(model);
    *total_out = mask.size();
    LossHistory h;
    int events = 0;
    for (int t = 0; t < T; ++t) {
      h.record(1.0 + 1.0 / (t + 1));  // always recovering
      if (should_prune(s, h, t, T, sparsity(mask).pruned_fraction)) {
        mask = magnitude_prune(model, mask, s.rate);
        h.record_prune(t);
        ++events;
      }
    }
    return std::pair<int, double>(events, sparsity(mask).pruned_fraction);
  };

  Index total = 0;
  auto [it_events, it_sp] = drive(default_schedules().at(ScheduleVariant::Iterative), &total);
  auto [os_events, os_sp] = drive(default_schedules().at(ScheduleVariant::OneShot), &total);
  const bool iterative_ok = it_events == 6 && it_sp >= 0.80 && it_sp <= 0.85;
  const bool oneshot_ok =
      os_events == 1 && std::abs(os_sp - 0.70) * static_cast<double>(total) <= 1.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "iterative: %d events at %.4f sparsity; one-shot: %d event at %.4f",
                it_events, it_sp, os_events, os_sp);
  report(3, "schedule arithmetic", iterative_ok && oneshot_ok, detail);
}

// --- criterion 4: ledger arithmetic on the published sizes ------------------

void criterion_ledger() {
  const std::uint64_t dense_bytes = idealized_bytes(162468, 0);
  const double dense_kb = report_kb(dense_bytes);

  CostLedger ledger;
  for (int t = 0; t < 40; ++t)
    for (Direction d : {Direction::Download, Direction::Upload})
      ledger.record(t, 0, d, dense_bytes, dense_bytes);
  const double mb = report_mb(ledger.total(CostModel::Idealized));
  const double mb_err = std::abs(mb - 50.76) / 50.76;

  const Index total = 162468;
  const Index zeros = static_cast<Index>(0.79 * static_cast<double>(total));
  const double pruned_kb = report_kb(idealized_bytes(total - zeros, 0));
  const double kb_err = std::abs(pruned_kb - 133.27) / 133.27;

  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "dense %.2f KB, 40-round total %.3f MB (err %.3f%%), 0.79-sparse model "
                "%.2f KB (err %.3f%%)",
                dense_kb, mb, 100 * mb_err, pruned_kb, 100 * kb_err);
  report(4, "ledger arithmetic", mb_err < 0.001 && kb_err < 0.005, detail);
}

// --- criterion 5: communication savings at desk scale -----------------------

void criterion_savings() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t total_fa = run_experiment(desk_config(Method::FedAvg), 1).total_ideal;
  const std::uint64_t total_fp =
      run_experiment(desk_config(Method::FedPruning), 1).total_ideal;
  const std::uint64_t total_os = run_experiment(desk_config(Method::OneShot), 1).total_ideal;

  const double fp_ratio = static_cast<double>(total_fp) / static_cast<double>(total_fa);
  const double os_ratio = static_cast<double>(total_os) / static_cast<double>(total_fa);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "fedpruning %.1f%% of fedavg (limit 55%%), one-shot %.1f%% (limit 45%%), "
                "%.0fs",
                100 * fp_ratio, 100 * os_ratio, secs);
  report(5, "communication savings", fp_ratio <= 0.55 && os_ratio <= 0.45 && secs < 600.0,
         detail);
}

// --- criterion 6: localization benefit on non-IID silos ---------------------

void criterion_localization() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::uint64_t> seeds = {1, 2, 3};

  auto med_rmse = [&](Method m, bool iid) {
    std::vector<double> finals;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig c = desk_config(m);
      if (iid) {
        c.data.synth.label_shift = 0;
        c.data.synth.gain_spread = 0;
        c.data.synth.feature_rotation = 0;
      }
      finals.push_back(run_experiment(c, seed).final_mean_rmse);
    }
    return median(finals);
  };

  const double fa = med_rmse(Method::FedAvg, false);
  const double fp = med_rmse(Method::FedPruning, false);
  const double os_lt = med_rmse(Method::OneShotLT, false);
  const double fa_iid = med_rmse(Method::FedAvg, true);
  const double fp_iid = med_rmse(Method::FedPruning, true);

  const bool non_iid_ok = fp <= 0.95 * fa && os_lt <= 0.95 * fa;
  const bool iid_ok = fp_iid <= 1.05 * fa_iid;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[220];
  std::snprintf(detail, sizeof(detail),
                "non-IID median rmse: fedavg %.3f, fedpruning %.3f (%.1f%%), one-shot-lt "
                "%.3f (%.1f%%); IID: fedavg %.3f vs fedpruning %.3f; %.0fs",
                fa, fp, 100 * (1 - fp / fa), os_lt, 100 * (1 - os_lt / fa), fa_iid, fp_iid,
                secs);
  report(6, "localization benefit", non_iid_ok && iid_ok, detail);
}

// --- criterion 7: mask closure and run determinism ---------------------------

void criterion_determinism() {
  ExperimentConfig c = desk_config(Method::FedPruning);
  c.rounds = 12;  // full pipeline, trimmed horizon
  ExperimentResult a = run_experiment(c, 5);
  ExperimentResult b = run_experiment(c, 5);
  a.wall_seconds = 1;
  b.wall_seconds = 2;

  bool closure = true;
  for (std::size_t k = 0; k < a.final_models.size(); ++k) {
    const Model<Real>& m = a.final_models[k];
    for (Index i = 0; i < m.param_count(); ++i) {
      const Index mi = m.mask_index[i];
      if (mi >= 0 && !a.final_masks[k].bits[mi] && m.params[i] != Real(0)) closure = false;
    }
  }
  const bool sparse = a.final_mean_sparsity > 0;  // pruning actually ran
  const bool identical = result_to_json(a) == result_to_json(b);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "closure %s over %zu client models (mean sparsity %.2f), byte-identical "
                "reruns %s",
                closure ? "exact" : "violated", a.final_models.size(),
                a.final_mean_sparsity, identical ? "yes" : "no");
  report(7, "closure and determinism", closure && sparse && identical, detail);
}

// --- criterion 8: codec round-trip and fuzzing -------------------------------

void criterion_codec() {
  Rng rng(4242);
  long roundtrip_fails = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    Model<Real> m = kaiming_init<Real>(testing::mixed_layer_stack(rng),
                                       3000 + static_cast<std::uint64_t>(rep));
    Mask mask = testing::random_mask(rng, m, rng.uniform(0.05, 1.0));
    apply_mask(m, mask);
    std::vector<std::uint8_t> blob = encode_sparse(m, mask);
    Model<Real> restored = kaiming_init<Real>(m.layers, 1);
    Mask rmask = dense_mask(restored);
    try {
      restore_sparse(restored, rmask, decode_sparse(blob));
    } catch (const Error&) {
      ++roundtrip_fails;
      continue;
    }
    if (restored.params != m.params || rmask.bits != mask.bits) ++roundtrip_fails;
  }

  long fuzz_crashes = 0;
  Model<Real> donor = kaiming_init<Real>(testing::mixed_layer_stack(rng), 5);
  Mask donor_mask = testing::random_mask(rng, donor, 0.5);
  apply_mask(donor, donor_mask);
  const std::vector<std::uint8_t> valid = encode_sparse(donor, donor_mask);
  for (int rep = 0; rep < 3000; ++rep) {
    std::vector<std::uint8_t> blob;
    if (rep % 2 == 0) {
      blob.resize(rng.index(300));
      for (auto& byte : blob) byte = static_cast<std::uint8_t>(rng.index(256));
    } else {  // mutate a valid blob
      blob = valid;
      for (int flips = 0; flips < 4; ++flips)
        blob[rng.index(blob.size())] = static_cast<std::uint8_t>(rng.index(256));
      if (rep % 4 == 1) blob.resize(rng.index(blob.size() + 1));
    }
    try {
      (void)decode_sparse(blob);
    } catch (const CodecError&) {
    } catch (...) {
      ++fuzz_crashes;  // anything but CodecError counts against us
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "1000 round-trips (%ld failures), 3000 fuzz inputs (%ld non-codec errors)",
                roundtrip_fails, fuzz_crashes);
  report(8, "sparse codec", roundtrip_fails == 0 && fuzz_crashes == 0, detail);
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_aggregation();
  criterion_schedule();
  criterion_ledger();
  criterion_savings();
  criterion_localization();
  criterion_determinism();
  criterion_codec();
  std::printf("%s: %d of 8 criteria passed\n", failures == 0 ? "OK" : "FAILED",
              8 - failures);
  return failures;
}
