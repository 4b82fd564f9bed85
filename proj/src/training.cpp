#include "fedprune/training.hpp"

#include <algorithm>
#include <limits>

#include "fedprune/backward.hpp"
#include "fedprune/rng.hpp"

namespace fedprune {

namespace {

Batch<Real> gather(const Silo& silo, const std::vector<Index>& rows, std::size_t begin,
                   std::size_t end) {
  Batch<Real> b;
  const Index n = static_cast<Index>(end - begin);
  b.features.resize(n, silo.features.cols());
  b.targets.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index src = rows[begin + static_cast<std::size_t>(i)];
    b.features.row(i) = silo.features.row(src);
    b.targets[i] = silo.targets[src];
  }
  return b;
}

}  // namespace

double eval_rmse(const Model<Real>& model, const Silo& silo,
                 const std::vector<Index>& rows) {
  if (rows.empty()) throw DataError("evaluation on an empty split");
  Batch<Real> b = gather(silo, rows, 0, rows.size());
  return loss_rmse(forward(model, b, /*training=*/false), b.targets);
}

std::vector<double> train_epochs(Model<Real>& model, OptState<Real>& opt, const Mask& mask,
                                 const Silo& silo, const TrainSettings& settings,
                                 std::uint64_t seed) {
  if (settings.epochs < 1) throw DomainError("epochs must be >= 1");
  if (settings.batch_size < 1) throw DomainError("batch size must be >= 1");
  if (silo.train_idx.empty()) throw DataError("silo " + silo.id + " has no training rows");

  std::vector<Index> order = silo.train_idx;
  std::vector<double> epoch_losses;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    Rng rng(derive_seed(seed, 0x3f1e, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.index(i)]);

    const std::size_t bs = static_cast<std::size_t>(settings.batch_size);
    for (std::size_t at = 0; at < order.size(); at += bs) {
      Batch<Real> batch = gather(silo, order, at, std::min(at + bs, order.size()));
      GradResult<Real> g = detail::grad_mse_impl(model, batch, mask, &model.bn_state);
      adam_step(model, opt, g.grad, mask);
    }

    const double val = silo.val_idx.empty() ? eval_rmse(model, silo, silo.train_idx)
                                            : eval_rmse(model, silo, silo.val_idx);
    epoch_losses.push_back(val);
    if (settings.early_stop_patience > 0) {
      if (val < best) {
        best = val;
        stale = 0;
      } else if (++stale >= settings.early_stop_patience) {
        break;
      }
    }
  }
  return epoch_losses;
}

}  // namespace fedprune
