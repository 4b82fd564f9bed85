#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedprune/model.hpp"
#include "fedprune/pruning.hpp"
#include "fedprune/types.hpp"

namespace fedprune {

enum class Direction { Upload, Download };
enum class CostModel { Idealized, Wire };

// Idealized cost counts 4 bytes per transmitted parameter (surviving weights
// plus the always-dense non-prunable params). Wire cost is the exact encoded
// blob size including header and bitmap.
std::uint64_t idealized_bytes(Index surviving_weights, Index nonprunable_params);
std::uint64_t wire_bytes(Index surviving_weights, Index nonprunable_params,
                         Index prunable_total, Index prunable_layers);
std::uint64_t cost_of(const Model<Real>& model, const Mask& mask, CostModel cm);

// Blob layout, little-endian:
//   magic "FPSB" | version u16 | layer count u16
//   per prunable layer: offset u32, weight count u32
//   bitmap ceil(n/8) bytes, LSB-first
//   surviving weights, float32 each, ascending index
//   non-prunable params, float32 each
std::vector<std::uint8_t> encode_sparse(const Model<Real>& model, const Mask& mask);

struct DecodedSparse {
  std::vector<Index> layer_offsets;
  std::vector<Index> layer_counts;
  std::vector<std::uint8_t> bits;
  Vec<Real> weights;      // full prunable length, zeros at pruned positions
  Vec<Real> nonprunable;  // param order
};

DecodedSparse decode_sparse(std::span<const std::uint8_t> blob);

// Writes a decoded blob back into an aligned model + mask.
void restore_sparse(Model<Real>& model, Mask& mask, const DecodedSparse& decoded);

// Append-only per-round, per-client, per-direction byte accounting under
// both cost models. Single-writer (the coordinator).
class CostLedger {
 public:
  struct Entry {
    int round;
    int client;
    Direction dir;
    std::uint64_t idealized;
    std::uint64_t wire;
  };

  void record(int round, int client, Direction dir, std::uint64_t idealized,
              std::uint64_t wire);

  std::uint64_t total(CostModel cm) const;
  std::uint64_t total(CostModel cm, Direction dir) const;
  std::uint64_t round_total(int round, CostModel cm, Direction dir) const;
  double per_client_average(CostModel cm) const;  // total / distinct clients
  int distinct_clients() const;
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

// Reporting convention: KB is 1024 bytes, MB totals are 1000 KB.
inline double report_kb(std::uint64_t bytes) { return static_cast<double>(bytes) / 1024.0; }
inline double report_mb(std::uint64_t bytes) { return report_kb(bytes) / 1000.0; }

}  // namespace fedprune
