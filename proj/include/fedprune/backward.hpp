#pragma once

#include "fedprune/model.hpp"
#include "fedprune/pruning.hpp"
#include "fedprune/types.hpp"

namespace fedprune {

template <class S>
struct GradResult {
  Vec<S> grad;  // dL/dparams for mean-squared-error loss
  double mse = 0;
};

namespace detail {

template <class S>
void conv_backward(const LayerSpec& l, const S* p, const Mat<S>& x, const Mat<S>& dy,
                   S* gp, Mat<S>& dx) {
  dx.setZero(x.rows(), x.cols());
  Index in_off = 0, out_off = 0, w_off = 0;
  const Index bias_off = l.weight_count();
  for (std::size_t g = 0; g < l.groups.size(); ++g) {
    const Index steps = l.conv_steps(l.groups[g]);
    for (Index c = 0; c < l.channels; ++c) {
      Eigen::Map<const Vec<S>> w(p + w_off + c * l.kernel, l.kernel);
      Eigen::Map<Vec<S>> gw(gp + w_off + c * l.kernel, l.kernel);
      S& gb = gp[bias_off + static_cast<Index>(g) * l.channels + c];
      for (Index t = 0; t < steps; ++t) {
        const auto dcol = dy.col(out_off + c * steps + t);
        gw.noalias() += x.middleCols(in_off + t * l.stride, l.kernel).transpose() * dcol;
        gb += dcol.sum();
        dx.middleCols(in_off + t * l.stride, l.kernel).noalias() += dcol * w.transpose();
      }
    }
    in_off += l.groups[g];
    out_off += l.channels * steps;
    w_off += l.channels * l.kernel;
  }
  if (l.passthrough > 0)
    dx.rightCols(l.passthrough) = dy.rightCols(l.passthrough);
}

// Training-mode forward + analytic backward of the MSE loss. Gradient
// entries at masked-out weight positions are exactly zero. When
// `update_stats` is given the batchnorm running statistics advance, which is
// the only mutation of this routine (used by the trainer, never by callers
// asking only for gradients).
template <class S>
GradResult<S> grad_mse_impl(const Model<S>& m, const Batch<S>& batch, const Mask& mask,
                            std::vector<BatchNormState<S>>* update_stats = nullptr) {
  check_aligned(m, mask);
  if (batch.features.rows() != batch.targets.size())
    throw ShapeError("batch features/targets row mismatch");

  ForwardTrace<S> trace;
  forward_trace(m, batch.features, /*training=*/true, &trace, update_stats);
  if (m.output_size() != 1)
    throw ShapeError("gradient expects a single regression output");

  const Index n = batch.features.rows();
  Vec<S> pred = trace.acts.back().col(0);

  GradResult<S> result;
  result.mse = loss_mse(pred, batch.targets);
  result.grad = Vec<S>::Zero(m.param_count());

  Mat<S> dy(n, 1);
  dy.col(0) = S(2) / static_cast<S>(n) * (pred - batch.targets);

  for (std::size_t ii = m.layers.size(); ii-- > 0;) {
    const LayerSpec& l = m.layers[ii];
    const S* p = m.params.data() + m.offsets[ii];
    S* gp = result.grad.data() + m.offsets[ii];
    const Mat<S>& x = trace.acts[ii];
    Mat<S> dx;
    switch (l.kind) {
      case LayerKind::Dense: {
        Eigen::Map<const RowMajorMat<S>> w(p, l.out, l.in);
        Eigen::Map<RowMajorMat<S>> gw(gp, l.out, l.in);
        Eigen::Map<Vec<S>> gb(gp + l.in * l.out, l.out);
        gw.noalias() = dy.transpose() * x;
        gb = dy.colwise().sum();
        dx.noalias() = dy * w;
        break;
      }
      case LayerKind::Conv1d:
        conv_backward(l, p, x, dy, gp, dx);
        break;
      case LayerKind::Relu:
        dx = (x.array() > S(0)).select(dy, Mat<S>::Zero(dy.rows(), dy.cols()));
        break;
      case LayerKind::BatchNorm: {
        const Index slot = m.bn_slot[ii];
        const Mat<S>& xhat = trace.bn_xhat[slot];
        const Vec<S>& inv_std = trace.bn_inv_std[slot];
        Eigen::Map<const Vec<S>> gamma(p, l.size);
        Eigen::Map<Vec<S>> ggamma(gp, l.size);
        Eigen::Map<Vec<S>> gbeta(gp + l.size, l.size);
        ggamma = (dy.array() * xhat.array()).colwise().sum();
        gbeta = dy.colwise().sum();
        // dxhat = dy * gamma; dx folds the batch mean/variance dependency:
        // dx = inv_std/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat .* xhat))
        Mat<S> dxhat = dy * gamma.asDiagonal();
        Vec<S> sum_d = dxhat.colwise().sum();
        Vec<S> sum_dx = (dxhat.array() * xhat.array()).colwise().sum();
        const S inv_n = S(1) / static_cast<S>(n);
        dx = ((dxhat * static_cast<S>(n) - xhat * sum_dx.asDiagonal()).rowwise() -
              sum_d.transpose()) *
             (inv_std * inv_n).asDiagonal();
        break;
      }
    }
    dy = std::move(dx);
  }

  // pruned positions carry exactly zero gradient
  for (const auto& r : m.regions)
    for (Index j = 0; j < r.count; ++j)
      if (!mask.bits[r.mask_offset + j]) result.grad[r.param_offset + j] = S(0);

  return result;
}

}  // namespace detail

template <class S>
GradResult<S> grad_mse(const Model<S>& m, const Batch<S>& batch, const Mask& mask) {
  return detail::grad_mse_impl(m, batch, mask);
}

template <class S>
Vec<S> backward(const Model<S>& m, const Batch<S>& batch, const Mask& mask) {
  return detail::grad_mse_impl(m, batch, mask).grad;
}

}  // namespace fedprune
