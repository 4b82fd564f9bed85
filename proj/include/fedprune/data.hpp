#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedprune/errors.hpp"
#include "fedprune/types.hpp"

namespace fedprune {

// One data-holding participant. Rows carry a year key; the latest year is
// the validation split, everything earlier trains.
struct Silo {
  std::string id;
  Mat<Real> features;  // samples x feature dim
  Vec<Real> targets;
  std::vector<int> years;
  std::vector<Index> train_idx;
  std::vector<Index> val_idx;

  Index samples() const { return features.rows(); }
  void split_by_year();
};

// Synthetic non-IID generator: a shared nonlinear ground truth plus per-silo
// affine label perturbation (gain a_k, shift b_k), per-silo feature
// covariance rotation and observation noise. Knobs at zero give IID silos.
struct SyntheticConfig {
  int num_silos = 9;
  int min_samples = 200;
  int max_samples = 400;
  std::vector<Index> temporal_groups = {8, 8, 6};
  Index static_features = 4;
  int years = 6;

  double label_shift = 2.0;      // b_k spread
  double gain_spread = 0.4;      // a_k spread around 1
  double feature_rotation = 0.3; // covariance rotation angle spread
  double noise_scale = 0.4;

  std::uint64_t seed = 1234;

  Index feature_dim() const {
    Index n = static_features;
    for (Index g : temporal_groups) n += g;
    return n;
  }

  void validate() const {
    if (num_silos < 2) throw ConfigError("need at least 2 silos");
    if (min_samples < 2 || max_samples < min_samples)
      throw ConfigError("bad silo sample range");
    if (feature_dim() < 1) throw ConfigError("need at least one feature");
    if (years < 2) throw ConfigError("need at least 2 year keys for a train/val split");
    if (label_shift < 0 || gain_spread < 0 || feature_rotation < 0 || noise_scale < 0)
      throw ConfigError("heterogeneity knobs must be non-negative");
  }
};

std::vector<Silo> gen_synthetic_silos(const SyntheticConfig& cfg);

// Resamples every train set with replacement up to the largest one. All
// original samples stay present; validation sets are untouched.
void oversample_equalize(std::vector<Silo>& silos, std::uint64_t seed);

struct NormStats {
  Vec<Real> feat_mean;
  Vec<Real> feat_std;  // zero-variance features get std 1 and map to 0
  Real target_mean = 0;
  Real target_std = 1;
  std::vector<std::uint8_t> zero_variance;
  bool had_zero_variance = false;

  double to_original_rmse(double normalized_rmse) const {
    return normalized_rmse * static_cast<double>(target_std);
  }
};

// Z-scores features and target in place with pooled train statistics.
NormStats normalize(std::vector<Silo>& silos);

Vec<Real> inverse_transform_predictions(const NormStats& stats, const Vec<Real>& pred);

struct CsvSchema {
  std::string silo_col = "silo_id";
  std::string year_col = "year";
  std::vector<std::string> feature_cols;  // empty means f0..f{d-1} on save
  std::string target_col = "target";
};

struct CsvLoadResult {
  std::vector<Silo> silos;
  std::size_t rejected_rows = 0;
};

CsvLoadResult load_csv(const std::string& path, const CsvSchema& schema);
void save_csv(const std::string& path, const std::vector<Silo>& silos, CsvSchema schema);

CsvSchema schema_for_dim(Index feature_dim);

}  // namespace fedprune
