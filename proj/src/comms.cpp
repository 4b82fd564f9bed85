#include "fedprune/comms.hpp"

#include <algorithm>
#include <cstring>

#include "fedprune/errors.hpp"

namespace fedprune {

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'P', 'S', 'B'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Bounds-checked reader; everything a fuzzer can throw at decode lands here.
struct Reader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (data.size() - pos < n) throw CodecError("truncated blob");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

std::uint64_t idealized_bytes(Index surviving_weights, Index nonprunable_params) {
  return 4ull * (static_cast<std::uint64_t>(surviving_weights) +
                 static_cast<std::uint64_t>(nonprunable_params));
}

std::uint64_t wire_bytes(Index surviving_weights, Index nonprunable_params,
                         Index prunable_total, Index prunable_layers) {
  return 8ull + 8ull * static_cast<std::uint64_t>(prunable_layers) +
         (static_cast<std::uint64_t>(prunable_total) + 7) / 8 +
         idealized_bytes(surviving_weights, nonprunable_params);
}

std::uint64_t cost_of(const Model<Real>& model, const Mask& mask, CostModel cm) {
  check_aligned(model, mask);
  const Index surv = mask.surviving();
  if (cm == CostModel::Idealized) return idealized_bytes(surv, model.nonprunable_count());
  return wire_bytes(surv, model.nonprunable_count(), mask.size(),
                    static_cast<Index>(model.regions.size()));
}

std::vector<std::uint8_t> encode_sparse(const Model<Real>& model, const Mask& mask) {
  check_aligned(model, mask);
  for (const auto& r : model.regions)
    for (Index j = 0; j < r.count; ++j)
      if (!mask.bits[r.mask_offset + j] && model.params[r.param_offset + j] != Real(0))
        throw Error("mask closure violated: pruned position holds a nonzero weight");

  std::vector<std::uint8_t> out;
  const Index n = mask.size();
  out.reserve(wire_bytes(mask.surviving(), model.nonprunable_count(), n,
                         static_cast<Index>(model.regions.size())));
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  put_u16(out, static_cast<std::uint16_t>(model.regions.size()));
  for (const auto& r : model.regions) {
    put_u32(out, static_cast<std::uint32_t>(r.mask_offset));
    put_u32(out, static_cast<std::uint32_t>(r.count));
  }

  // bitmap, LSB-first
  const std::size_t bitmap_len = (static_cast<std::size_t>(n) + 7) / 8;
  const std::size_t bitmap_at = out.size();
  out.resize(out.size() + bitmap_len, 0);
  for (Index i = 0; i < n; ++i)
    if (mask.bits[i]) out[bitmap_at + static_cast<std::size_t>(i) / 8] |=
        static_cast<std::uint8_t>(1u << (i % 8));

  for (const auto& r : model.regions)
    for (Index j = 0; j < r.count; ++j)
      if (mask.bits[r.mask_offset + j])
        put_f32(out, static_cast<float>(model.params[r.param_offset + j]));

  for (Index i = 0; i < model.param_count(); ++i)
    if (model.mask_index[i] < 0) put_f32(out, static_cast<float>(model.params[i]));

  return out;
}

DecodedSparse decode_sparse(std::span<const std::uint8_t> blob) {
  Reader r{blob};
  r.need(4);
  if (std::memcmp(blob.data(), kMagic, 4) != 0) throw CodecError("bad magic");
  r.pos = 4;
  if (r.u16() != kVersion) throw CodecError("unsupported version");
  const std::uint16_t layer_count = r.u16();
  if (layer_count == 0) throw CodecError("no prunable layers");

  DecodedSparse d;
  std::uint64_t expect_off = 0;
  for (std::uint16_t l = 0; l < layer_count; ++l) {
    const std::uint32_t off = r.u32();
    const std::uint32_t count = r.u32();
    if (off != expect_off || count == 0) throw CodecError("non-contiguous layer table");
    expect_off += count;
    d.layer_offsets.push_back(static_cast<Index>(off));
    d.layer_counts.push_back(static_cast<Index>(count));
  }
  const std::uint64_t n = expect_off;
  const std::uint64_t bitmap_len = (n + 7) / 8;
  if (bitmap_len > blob.size()) throw CodecError("bitmap larger than blob");
  r.need(static_cast<std::size_t>(bitmap_len));

  d.bits.resize(static_cast<std::size_t>(n));
  std::uint64_t surviving = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint8_t byte = blob[r.pos + static_cast<std::size_t>(i / 8)];
    d.bits[static_cast<std::size_t>(i)] = (byte >> (i % 8)) & 1u;
    surviving += d.bits[static_cast<std::size_t>(i)];
  }
  r.pos += static_cast<std::size_t>(bitmap_len);

  const std::size_t remaining = blob.size() - r.pos;
  if (remaining < 4 * surviving) throw CodecError("value section shorter than popcount");
  if ((remaining - 4 * surviving) % 4 != 0) throw CodecError("ragged trailing section");

  d.weights = Vec<Real>::Zero(static_cast<Index>(n));
  for (std::uint64_t i = 0; i < n; ++i)
    if (d.bits[static_cast<std::size_t>(i)]) d.weights[static_cast<Index>(i)] = r.f32();

  const std::size_t nonp = (blob.size() - r.pos) / 4;
  d.nonprunable.resize(static_cast<Index>(nonp));
  for (std::size_t i = 0; i < nonp; ++i) d.nonprunable[static_cast<Index>(i)] = r.f32();
  return d;
}

void restore_sparse(Model<Real>& model, Mask& mask, const DecodedSparse& d) {
  if (d.layer_offsets.size() != model.regions.size())
    throw CodecError("blob layer table does not match model");
  for (std::size_t l = 0; l < model.regions.size(); ++l)
    if (d.layer_offsets[l] != model.regions[l].mask_offset ||
        d.layer_counts[l] != model.regions[l].count)
      throw CodecError("blob layer table does not match model");
  if (d.nonprunable.size() != model.nonprunable_count())
    throw CodecError("blob non-prunable section does not match model");

  mask.bits = d.bits;
  mask.layer_offsets = d.layer_offsets;
  mask.layer_counts = d.layer_counts;
  for (const auto& r : model.regions)
    model.params.segment(r.param_offset, r.count) = d.weights.segment(r.mask_offset, r.count);
  Index k = 0;
  for (Index i = 0; i < model.param_count(); ++i)
    if (model.mask_index[i] < 0) model.params[i] = d.nonprunable[k++];
}

void CostLedger::record(int round, int client, Direction dir, std::uint64_t idealized,
                        std::uint64_t wire) {
  entries_.push_back({round, client, dir, idealized, wire});
}

std::uint64_t CostLedger::total(CostModel cm) const {
  std::uint64_t sum = 0;
  for (const Entry& e : entries_) sum += cm == CostModel::Idealized ? e.idealized : e.wire;
  return sum;
}

std::uint64_t CostLedger::total(CostModel cm, Direction dir) const {
  std::uint64_t sum = 0;
  for (const Entry& e : entries_)
    if (e.dir == dir) sum += cm == CostModel::Idealized ? e.idealized : e.wire;
  return sum;
}

std::uint64_t CostLedger::round_total(int round, CostModel cm, Direction dir) const {
  std::uint64_t sum = 0;
  for (const Entry& e : entries_)
    if (e.round == round && e.dir == dir)
      sum += cm == CostModel::Idealized ? e.idealized : e.wire;
  return sum;
}

int CostLedger::distinct_clients() const {
  std::vector<int> seen;
  for (const Entry& e : entries_)
    if (std::find(seen.begin(), seen.end(), e.client) == seen.end()) seen.push_back(e.client);
  return static_cast<int>(seen.size());
}

double CostLedger::per_client_average(CostModel cm) const {
  const int k = distinct_clients();
  return k == 0 ? 0.0 : static_cast<double>(total(cm)) / k;
}

}  // namespace fedprune
