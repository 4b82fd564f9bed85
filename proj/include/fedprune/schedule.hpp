#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fedprune/errors.hpp"

namespace fedprune {

enum class ScheduleVariant { None, Iterative, IterativeLT, OneShot, OneShotLT };

// When and how much to prune. `rate` is the fraction of surviving weights
// removed per event; `recovery_factor` is the slack over the best loss a
// client must be within before it may prune again.
struct PruneSchedule {
  ScheduleVariant variant = ScheduleVariant::None;
  double rate = 0.0;
  double target_sparsity = 0.0;
  int warmup_rounds = 2;
  int final_freeze = 3;
  int min_recovery_rounds = 0;
  double recovery_factor = 1.15;
  bool lth_reset = false;
  bool synchronized_prune = false;  // majority-gated simultaneous pruning

  bool one_shot() const {
    return variant == ScheduleVariant::OneShot || variant == ScheduleVariant::OneShotLT;
  }

  void validate() const {
    if (variant == ScheduleVariant::None) return;
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("prune rate must lie in (0,1)");
    if (!(target_sparsity > 0.0 && target_sparsity < 1.0))
      throw ConfigError("target sparsity must lie in (0,1)");
    if (warmup_rounds < 0 || final_freeze < 0 || min_recovery_rounds < 0)
      throw ConfigError("schedule round counts must be non-negative");
    if (recovery_factor < 1.0) throw ConfigError("recovery factor must be >= 1");
  }
};

// Per-round validation losses of one client plus its prune events.
struct LossHistory {
  std::vector<double> losses;
  std::vector<int> prune_rounds;

  void record(double loss) { losses.push_back(loss); }
  void record_prune(int round) { prune_rounds.push_back(round); }

  double best() const {
    double b = std::numeric_limits<double>::infinity();
    for (double l : losses) b = std::min(b, l);
    return b;
  }

  double latest() const {
    return losses.empty() ? std::numeric_limits<double>::infinity() : losses.back();
  }

  int prune_events() const { return static_cast<int>(prune_rounds.size()); }

  int rounds_since_prune(int round) const {
    return prune_rounds.empty() ? std::numeric_limits<int>::max()
                                : round - prune_rounds.back();
  }
};

// All gates must hold: past warmup, outside the final freeze window, target
// sparsity not reached, recovery rounds elapsed, latest loss within the
// recovery band of the best, and (one-shot) no prior prune event.
inline bool should_prune(const PruneSchedule& s, const LossHistory& history, int t, int T,
                         double current_sparsity) {
  if (s.variant == ScheduleVariant::None) return false;
  if (t < s.warmup_rounds) return false;
  if (t >= T - s.final_freeze) return false;
  if (current_sparsity >= s.target_sparsity) return false;
  if (history.rounds_since_prune(t) < s.min_recovery_rounds) return false;
  if (s.one_shot() && history.prune_events() > 0) return false;
  if (history.losses.empty()) return false;
  return history.latest() <= s.recovery_factor * history.best();
}

inline std::map<ScheduleVariant, PruneSchedule> default_schedules() {
  std::map<ScheduleVariant, PruneSchedule> out;

  PruneSchedule none;
  out[ScheduleVariant::None] = none;

  PruneSchedule it;
  it.variant = ScheduleVariant::Iterative;
  it.rate = 0.25;
  it.target_sparsity = 0.80;
  it.min_recovery_rounds = 3;
  out[ScheduleVariant::Iterative] = it;

  PruneSchedule it_lt = it;
  it_lt.variant = ScheduleVariant::IterativeLT;
  it_lt.rate = 0.415;
  it_lt.min_recovery_rounds = 7;
  it_lt.lth_reset = true;
  it_lt.synchronized_prune = true;  // resets recover best when clients prune together
  out[ScheduleVariant::IterativeLT] = it_lt;

  PruneSchedule os;
  os.variant = ScheduleVariant::OneShot;
  os.rate = 0.70;
  os.target_sparsity = 0.70;
  out[ScheduleVariant::OneShot] = os;

  PruneSchedule os_lt = os;
  os_lt.variant = ScheduleVariant::OneShotLT;
  os_lt.lth_reset = true;
  out[ScheduleVariant::OneShotLT] = os_lt;

  return out;
}

// Smallest k with 1-(1-rate)^k reaching the target, tolerating the
// 1e-3 slack of rates quoted to three decimals (0.415 reaches 0.80 in 3).
inline int expected_prune_events(const PruneSchedule& s) {
  if (s.variant == ScheduleVariant::None)
    throw DomainError("no prune events for the none variant");
  int k = 0;
  double surviving = 1.0;
  while (1.0 - surviving < s.target_sparsity - 1e-3) {
    surviving *= 1.0 - s.rate;
    ++k;
    if (k > 10000) throw DomainError("target sparsity unreachable");
  }
  return k;
}

inline const char* to_string(ScheduleVariant v) {
  switch (v) {
    case ScheduleVariant::None: return "none";
    case ScheduleVariant::Iterative: return "iterative";
    case ScheduleVariant::IterativeLT: return "iterative_lt";
    case ScheduleVariant::OneShot: return "one_shot";
    case ScheduleVariant::OneShotLT: return "one_shot_lt";
  }
  return "?";
}

}  // namespace fedprune
