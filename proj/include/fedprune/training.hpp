#pragma once

#include <cstdint>
#include <vector>

#include "fedprune/data.hpp"
#include "fedprune/model.hpp"
#include "fedprune/optimizer.hpp"
#include "fedprune/pruning.hpp"

namespace fedprune {

struct TrainSettings {
  int epochs = 5;
  int batch_size = 32;
  int early_stop_patience = 3;  // epochs without val improvement; <=0 disables
};

// Validation RMSE in normalized target units, inference-mode forward.
double eval_rmse(const Model<Real>& model, const Silo& silo,
                 const std::vector<Index>& rows);

// Minibatch Adam over the silo's train split with mask-aware updates and
// local early stopping. Returns the per-epoch validation RMSE trace.
std::vector<double> train_epochs(Model<Real>& model, OptState<Real>& opt, const Mask& mask,
                                 const Silo& silo, const TrainSettings& settings,
                                 std::uint64_t seed);

}  // namespace fedprune
