#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fedprune/errors.hpp"
#include "fedprune/rng.hpp"
#include "fedprune/types.hpp"

namespace fedprune {

enum class LayerKind { Dense, Conv1d, Relu, BatchNorm };

// One stage of a sequential net. Conv1d runs an independent filter bank per
// input segment (one segment per temporal feature group) and can pass a tail
// of static features through untouched, so a branching conv front-end plus
// concatenation collapses into a single composable layer.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;

  // dense
  Index in = 0;
  Index out = 0;

  // conv1d
  std::vector<Index> groups;  // segment lengths, convolved independently
  Index channels = 0;
  Index kernel = 0;
  Index stride = 1;
  Index passthrough = 0;

  // relu / batchnorm
  Index size = 0;

  static LayerSpec dense(Index in, Index out) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.in = in;
    l.out = out;
    return l;
  }

  static LayerSpec conv1d(std::vector<Index> groups, Index channels, Index kernel,
                          Index stride, Index passthrough = 0) {
    LayerSpec l;
    l.kind = LayerKind::Conv1d;
    l.groups = std::move(groups);
    l.channels = channels;
    l.kernel = kernel;
    l.stride = stride;
    l.passthrough = passthrough;
    return l;
  }

  static LayerSpec relu(Index size) {
    LayerSpec l;
    l.kind = LayerKind::Relu;
    l.size = size;
    return l;
  }

  static LayerSpec batchnorm(Index size) {
    LayerSpec l;
    l.kind = LayerKind::BatchNorm;
    l.size = size;
    return l;
  }

  bool prunable() const { return kind == LayerKind::Dense || kind == LayerKind::Conv1d; }

  Index conv_steps(Index segment) const { return (segment - kernel) / stride + 1; }

  Index input_size() const {
    switch (kind) {
      case LayerKind::Dense:
        return in;
      case LayerKind::Conv1d: {
        Index n = passthrough;
        for (Index g : groups) n += g;
        return n;
      }
      default:
        return size;
    }
  }

  Index output_size() const {
    switch (kind) {
      case LayerKind::Dense:
        return out;
      case LayerKind::Conv1d: {
        Index n = passthrough;
        for (Index g : groups) n += channels * conv_steps(g);
        return n;
      }
      default:
        return size;
    }
  }

  // Weights are the prunable entries; biases and batchnorm affine are not.
  Index weight_count() const {
    switch (kind) {
      case LayerKind::Dense:
        return in * out;
      case LayerKind::Conv1d:
        return static_cast<Index>(groups.size()) * channels * kernel;
      default:
        return 0;
    }
  }

  Index bias_count() const {
    switch (kind) {
      case LayerKind::Dense:
        return out;
      case LayerKind::Conv1d:
        return static_cast<Index>(groups.size()) * channels;
      default:
        return 0;
    }
  }

  Index affine_count() const { return kind == LayerKind::BatchNorm ? 2 * size : 0; }

  Index param_count() const { return weight_count() + bias_count() + affine_count(); }

  std::string describe() const;
};

inline std::string LayerSpec::describe() const {
  switch (kind) {
    case LayerKind::Dense:
      return "dense " + std::to_string(in) + "->" + std::to_string(out);
    case LayerKind::Conv1d:
      return "conv1d c" + std::to_string(channels) + " k" + std::to_string(kernel) +
             " s" + std::to_string(stride);
    case LayerKind::Relu:
      return "relu " + std::to_string(size);
    case LayerKind::BatchNorm:
      return "batchnorm " + std::to_string(size);
  }
  return "?";
}

inline void validate_layers(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.kind == LayerKind::Dense && (l.in <= 0 || l.out <= 0))
      throw ConfigError("dense layer with non-positive dims");
    if (l.kind == LayerKind::Conv1d) {
      if (l.groups.empty() && l.passthrough <= 0)
        throw ConfigError("conv1d layer with no input segments");
      if (l.channels <= 0 || l.kernel <= 0 || l.stride <= 0)
        throw ConfigError("conv1d layer with non-positive channels/kernel/stride");
      for (Index g : l.groups)
        if (g < l.kernel)
          throw ConfigError("conv1d segment shorter than kernel: " + l.describe());
    }
    if ((l.kind == LayerKind::Relu || l.kind == LayerKind::BatchNorm) && l.size <= 0)
      throw ConfigError("activation layer with non-positive size");
    if (i > 0 && layers[i - 1].output_size() != l.input_size())
      throw ConfigError("layer dims do not compose: " + layers[i - 1].describe() +
                        " feeds " + l.describe());
  }
}

template <class S>
struct BatchNormState {
  Vec<S> running_mean;
  Vec<S> running_var;
};

// Flat parameter vector partitioned into layers. Per-layer layout:
//   dense      weights row-major (out x in), then biases
//   conv1d     per group, per channel: kernel taps; then per group biases
//   batchnorm  gamma, then beta (running stats live in bn_state, not params)
template <class S>
struct Model {
  struct Region {
    Index layer;         // index into layers
    Index param_offset;  // start of the weight block in params
    Index count;         // prunable weights in this layer
    Index mask_offset;   // start in the prunable-weight index space
  };

  std::vector<LayerSpec> layers;
  Vec<S> params;
  std::vector<Index> offsets;                 // param offset per layer
  std::vector<BatchNormState<S>> bn_state;    // one per batchnorm layer
  std::vector<Index> bn_slot;                 // layer -> bn_state index or -1
  std::vector<Region> regions;                // prunable weight blocks, layer order
  std::vector<Index> mask_index;              // param index -> prunable index or -1

  Index param_count() const { return params.size(); }

  Index prunable_count() const {
    return regions.empty() ? 0 : regions.back().mask_offset + regions.back().count;
  }

  Index nonprunable_count() const { return param_count() - prunable_count(); }

  Index input_size() const { return layers.front().input_size(); }
  Index output_size() const { return layers.back().output_size(); }
};

namespace detail {

template <class S>
void build_layout(Model<S>& m) {
  Index off = 0;
  Index mask_off = 0;
  m.offsets.clear();
  m.regions.clear();
  m.bn_slot.assign(m.layers.size(), -1);
  m.bn_state.clear();
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    m.offsets.push_back(off);
    if (l.prunable()) {
      m.regions.push_back({static_cast<Index>(i), off, l.weight_count(), mask_off});
      mask_off += l.weight_count();
    }
    if (l.kind == LayerKind::BatchNorm) {
      m.bn_slot[i] = static_cast<Index>(m.bn_state.size());
      BatchNormState<S> bn;
      bn.running_mean = Vec<S>::Zero(l.size);
      bn.running_var = Vec<S>::Ones(l.size);
      m.bn_state.push_back(std::move(bn));
    }
    off += l.param_count();
  }
  m.params = Vec<S>::Zero(off);
  m.mask_index.assign(off, -1);
  for (const auto& r : m.regions)
    for (Index j = 0; j < r.count; ++j) m.mask_index[r.param_offset + j] = r.mask_offset + j;
}

}  // namespace detail

// Zero-mean normal weights with variance 2/fan_in, zero biases, unit
// batchnorm scale. Bit-identical for a given seed.
template <class S>
Model<S> kaiming_init(const std::vector<LayerSpec>& layers, std::uint64_t seed) {
  validate_layers(layers);
  Model<S> m;
  m.layers = layers;
  detail::build_layout(m);

  Rng rng(derive_seed(seed, 0x1717));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    S* p = m.params.data() + m.offsets[i];
    switch (l.kind) {
      case LayerKind::Dense: {
        const double sd = std::sqrt(2.0 / static_cast<double>(l.in));
        for (Index j = 0; j < l.in * l.out; ++j) p[j] = static_cast<S>(sd * rng.normal());
        break;  // biases stay zero
      }
      case LayerKind::Conv1d: {
        const double sd = std::sqrt(2.0 / static_cast<double>(l.kernel));
        for (Index j = 0; j < l.weight_count(); ++j) p[j] = static_cast<S>(sd * rng.normal());
        break;
      }
      case LayerKind::BatchNorm:
        for (Index j = 0; j < l.size; ++j) p[j] = S(1);  // gamma; beta stays zero
        break;
      case LayerKind::Relu:
        break;
    }
  }
  return m;
}

template <class S>
struct Batch {
  Mat<S> features;  // samples x feature dims
  Vec<S> targets;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

namespace detail {

// Per-layer forward. `acts[i]` is the input of layer i; acts.back() is the
// network output. Caches batchnorm normalized values for the backward pass.
template <class S>
struct ForwardTrace {
  std::vector<Mat<S>> acts;
  std::vector<Mat<S>> bn_xhat;     // per bn layer
  std::vector<Vec<S>> bn_inv_std;  // per bn layer
};

template <class S>
void conv_forward(const LayerSpec& l, const S* p, const Mat<S>& x, Mat<S>& y) {
  const Index n = x.rows();
  y.resize(n, l.output_size());
  Index in_off = 0, out_off = 0, w_off = 0;
  const Index bias_off = l.weight_count();
  for (std::size_t g = 0; g < l.groups.size(); ++g) {
    const Index steps = l.conv_steps(l.groups[g]);
    for (Index c = 0; c < l.channels; ++c) {
      Eigen::Map<const Vec<S>> w(p + w_off + c * l.kernel, l.kernel);
      const S b = p[bias_off + static_cast<Index>(g) * l.channels + c];
      for (Index t = 0; t < steps; ++t) {
        y.col(out_off + c * steps + t) =
            x.middleCols(in_off + t * l.stride, l.kernel) * w + Vec<S>::Constant(n, b);
      }
    }
    in_off += l.groups[g];
    out_off += l.channels * steps;
    w_off += l.channels * l.kernel;
  }
  if (l.passthrough > 0)
    y.rightCols(l.passthrough) = x.rightCols(l.passthrough);
}

// training=true normalizes with batch statistics; inference uses the stored
// running statistics and is a pure function of params + bn_state.
template <class S>
void forward_trace(const Model<S>& m, const Mat<S>& features, bool training,
                   ForwardTrace<S>* trace,
                   std::vector<BatchNormState<S>>* update_stats = nullptr) {
  if (features.cols() != m.input_size())
    throw ShapeError("batch has " + std::to_string(features.cols()) +
                     " features, model expects " + std::to_string(m.input_size()));
  if (features.rows() == 0) throw DomainError("empty batch");

  trace->acts.clear();
  trace->bn_xhat.assign(m.bn_state.size(), Mat<S>());
  trace->bn_inv_std.assign(m.bn_state.size(), Vec<S>());
  trace->acts.reserve(m.layers.size() + 1);
  trace->acts.push_back(features);

  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    const S* p = m.params.data() + m.offsets[i];
    const Mat<S>& x = trace->acts.back();
    Mat<S> y;
    switch (l.kind) {
      case LayerKind::Dense: {
        Eigen::Map<const RowMajorMat<S>> w(p, l.out, l.in);
        Eigen::Map<const Vec<S>> b(p + l.in * l.out, l.out);
        y.noalias() = x * w.transpose();
        y.rowwise() += b.transpose();
        break;
      }
      case LayerKind::Conv1d:
        conv_forward(l, p, x, y);
        break;
      case LayerKind::Relu:
        y = x.cwiseMax(S(0));
        break;
      case LayerKind::BatchNorm: {
        Eigen::Map<const Vec<S>> gamma(p, l.size);
        Eigen::Map<const Vec<S>> beta(p + l.size, l.size);
        const Index slot = m.bn_slot[i];
        Vec<S> mean, inv_std;
        if (training) {
          mean = x.colwise().mean();
          Vec<S> var = (x.rowwise() - mean.transpose()).array().square().colwise().mean();
          inv_std = (var.array() + S(kBnEps)).rsqrt();
          if (update_stats) {
            auto& bn = (*update_stats)[slot];
            bn.running_mean = (S(1) - S(kBnMomentum)) * bn.running_mean + S(kBnMomentum) * mean;
            bn.running_var = (S(1) - S(kBnMomentum)) * bn.running_var + S(kBnMomentum) * var;
          }
        } else {
          mean = m.bn_state[slot].running_mean;
          inv_std = (m.bn_state[slot].running_var.array() + S(kBnEps)).rsqrt();
        }
        Mat<S> xhat = (x.rowwise() - mean.transpose()) * inv_std.asDiagonal();
        y = xhat * gamma.asDiagonal();
        y.rowwise() += beta.transpose();
        if (training) {
          trace->bn_xhat[slot] = std::move(xhat);
          trace->bn_inv_std[slot] = std::move(inv_std);
        }
        break;
      }
    }
    trace->acts.push_back(std::move(y));
  }
}

}  // namespace detail

template <class S>
Vec<S> forward(const Model<S>& m, const Mat<S>& features, bool training) {
  detail::ForwardTrace<S> trace;
  detail::forward_trace(m, features, training, &trace);
  if (m.output_size() != 1)
    throw ShapeError("forward expects a single regression output, model ends with " +
                     std::to_string(m.output_size()));
  return trace.acts.back().col(0);
}

template <class S>
Vec<S> forward(const Model<S>& m, const Batch<S>& batch, bool training) {
  return forward(m, batch.features, training);
}

template <class S>
double loss_mse(const Vec<S>& predictions, const Vec<S>& targets) {
  if (predictions.size() == 0) throw DomainError("loss on empty input");
  if (predictions.size() != targets.size())
    throw DomainError("prediction/target length mismatch");
  return (predictions - targets).template cast<double>().squaredNorm() /
         static_cast<double>(predictions.size());
}

template <class S>
double loss_rmse(const Vec<S>& predictions, const Vec<S>& targets) {
  return std::sqrt(loss_mse(predictions, targets));
}

}  // namespace fedprune
