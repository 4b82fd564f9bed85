#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fedprune/errors.hpp"
#include "fedprune/model.hpp"
#include "fedprune/optimizer_fwd.hpp"
#include "fedprune/types.hpp"

namespace fedprune {

// Binary vector over the prunable weight positions of a model. Bits only
// ever flip 1 -> 0 within a run.
struct Mask {
  std::vector<std::uint8_t> bits;
  std::vector<Index> layer_offsets;  // offset of each prunable layer's block
  std::vector<Index> layer_counts;

  Index size() const { return static_cast<Index>(bits.size()); }

  Index surviving() const {
    Index n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
  }

  Index zeros() const { return size() - surviving(); }

  Index layer_surviving(std::size_t layer) const {
    Index n = 0;
    for (Index j = 0; j < layer_counts[layer]; ++j) n += bits[layer_offsets[layer] + j];
    return n;
  }
};

template <class S>
Mask dense_mask(const Model<S>& m) {
  Mask mask;
  mask.bits.assign(m.prunable_count(), 1);
  for (const auto& r : m.regions) {
    mask.layer_offsets.push_back(r.mask_offset);
    mask.layer_counts.push_back(r.count);
  }
  return mask;
}

template <class S>
void check_aligned(const Model<S>& m, const Mask& mask) {
  if (mask.size() != m.prunable_count())
    throw ShapeError("mask has " + std::to_string(mask.size()) +
                     " bits, model has " + std::to_string(m.prunable_count()) +
                     " prunable weights");
}

struct SparsityReport {
  double pruned_fraction = 0;  // zeros / size
  std::vector<double> per_layer;
  Index surviving = 0;
};

inline SparsityReport sparsity(const Mask& mask) {
  SparsityReport r;
  r.surviving = mask.surviving();
  r.pruned_fraction =
      mask.size() == 0 ? 0.0
                       : static_cast<double>(mask.zeros()) / static_cast<double>(mask.size());
  for (std::size_t l = 0; l < mask.layer_counts.size(); ++l) {
    const Index alive = mask.layer_surviving(l);
    r.per_layer.push_back(static_cast<double>(mask.layer_counts[l] - alive) /
                          static_cast<double>(mask.layer_counts[l]));
  }
  return r;
}

// Global magnitude pruning over all surviving prunable weights: drops the
// floor(rate * surviving) smallest |w|, ties broken by ascending flat index,
// never emptying a layer (protected positions are skipped and the
// next-smallest candidate is taken instead).
template <class S>
Mask magnitude_prune(const Model<S>& m, const Mask& mask, double rate) {
  if (!(rate > 0.0 && rate < 1.0))
    throw DomainError("prune rate must lie in (0,1), got " + std::to_string(rate));
  check_aligned(m, mask);

  std::vector<Index> layer_alive(mask.layer_counts.size());
  for (std::size_t l = 0; l < layer_alive.size(); ++l) {
    layer_alive[l] = mask.layer_surviving(l);
    if (layer_alive[l] == 0)
      throw DomainError("prunable layer " + std::to_string(l) + " has no surviving weights");
  }

  struct Candidate {
    S mag;
    Index mask_idx;
    Index layer;
  };
  std::vector<Candidate> alive;
  alive.reserve(mask.bits.size());
  for (std::size_t l = 0; l < m.regions.size(); ++l) {
    const auto& r = m.regions[l];
    for (Index j = 0; j < r.count; ++j) {
      const Index mi = r.mask_offset + j;
      if (mask.bits[mi])
        alive.push_back({std::abs(m.params[r.param_offset + j]), mi, static_cast<Index>(l)});
    }
  }

  const Index to_prune =
      static_cast<Index>(rate * static_cast<double>(alive.size()));
  std::sort(alive.begin(), alive.end(), [](const Candidate& a, const Candidate& b) {
    return a.mag != b.mag ? a.mag < b.mag : a.mask_idx < b.mask_idx;
  });

  Mask next = mask;
  Index pruned = 0;
  for (const Candidate& c : alive) {
    if (pruned == to_prune) break;
    if (layer_alive[c.layer] <= 1) continue;  // keep at least one weight per layer
    next.bits[c.mask_idx] = 0;
    --layer_alive[c.layer];
    ++pruned;
  }
  return next;
}

// Zeroes masked weight positions; biases, batchnorm and unmasked weights
// are untouched. Idempotent.
template <class S>
void apply_mask(Model<S>& m, const Mask& mask) {
  check_aligned(m, mask);
  for (const auto& r : m.regions)
    for (Index j = 0; j < r.count; ++j)
      if (!mask.bits[r.mask_offset + j]) m.params[r.param_offset + j] = S(0);
}

// Full copy of the round-0 parameters; immutable for the run.
template <class S>
struct InitSnapshot {
  Vec<S> params;
};

template <class S>
InitSnapshot<S> snapshot_init(const Model<S>& m) {
  return InitSnapshot<S>{m.params};
}

// Lottery-ticket rewind: surviving weights and all non-prunable params go
// back to their initial values, pruned positions stay zero, batchnorm
// running stats and optimizer moments restart fresh.
template <class S>
void reset_to_init(Model<S>& m, const InitSnapshot<S>& init, const Mask& mask,
                   OptState<S>* opt = nullptr) {
  if (init.params.size() != m.params.size())
    throw ShapeError("init snapshot does not match model parameter count");
  check_aligned(m, mask);
  m.params = init.params;
  apply_mask(m, mask);
  for (auto& bn : m.bn_state) {
    bn.running_mean.setZero();
    bn.running_var.setOnes();
  }
  if (opt) {
    opt->m.setZero();
    opt->v.setZero();
    opt->step = 0;
  }
}

}  // namespace fedprune
