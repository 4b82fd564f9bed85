#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedprune/errors.hpp"
#include "fedprune/model.hpp"
#include "fedprune/pruning.hpp"
#include "fedprune/types.hpp"

namespace fedprune {

// Adam with decoupled L2 weight decay on unmasked weights and a step decay
// keyed to the federated round counter.
template <class S>
struct OptState {
  Vec<S> m;
  Vec<S> v;
  std::int64_t step = 0;

  double base_lr = 5e-3;
  double weight_decay = 1e-4;
  std::vector<int> decay_rounds = {5, 10};
  double decay_factor = 0.2;
  int round = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  double learning_rate() const {
    double lr = base_lr;
    for (int r : decay_rounds)
      if (round >= r) lr *= decay_factor;
    return lr;
  }
};

template <class S>
OptState<S> make_opt(const Model<S>& model, double lr, double weight_decay = 1e-4,
                     std::vector<int> decay_rounds = {5, 10}, double decay_factor = 0.2) {
  OptState<S> opt;
  opt.m = Vec<S>::Zero(model.param_count());
  opt.v = Vec<S>::Zero(model.param_count());
  opt.base_lr = lr;
  opt.weight_decay = weight_decay;
  opt.decay_rounds = std::move(decay_rounds);
  opt.decay_factor = decay_factor;
  return opt;
}

template <class S, class G>
void adam_step(Model<S>& model, OptState<S>& opt, const Eigen::MatrixBase<G>& grad_expr,
               const Mask& mask) {
  Eigen::Ref<const Vec<S>> grad(grad_expr.derived());
  if (grad.size() != model.param_count() || opt.m.size() != model.param_count())
    throw ShapeError("gradient/optimizer length does not match model");
  check_aligned(model, mask);

  opt.step += 1;
  const S lr = static_cast<S>(opt.learning_rate());
  const S b1 = static_cast<S>(opt.beta1);
  const S b2 = static_cast<S>(opt.beta2);
  const S bc1 = S(1) - static_cast<S>(std::pow(opt.beta1, static_cast<double>(opt.step)));
  const S bc2 = S(1) - static_cast<S>(std::pow(opt.beta2, static_cast<double>(opt.step)));
  const S wd = static_cast<S>(opt.weight_decay);

  opt.m = b1 * opt.m + (S(1) - b1) * grad;
  opt.v.array() = b2 * opt.v.array() + (S(1) - b2) * grad.array().square();

  Vec<S> update = (opt.m.array() / bc1) /
                  ((opt.v.array() / bc2).sqrt() + static_cast<S>(opt.eps));
  if (wd != S(0)) {
    // decay only prunable weights; masked ones are zero so the term vanishes
    for (const auto& r : model.regions)
      update.segment(r.param_offset, r.count) +=
          wd * model.params.segment(r.param_offset, r.count);
  }
  model.params -= lr * update;

  // pruned positions stay exactly zero whatever the stale moments say
  apply_mask(model, mask);
}

}  // namespace fedprune
