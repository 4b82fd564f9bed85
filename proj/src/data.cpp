#include "fedprune/data.hpp"

#include <algorithm>
#include <cmath>

#include "fedprune/rng.hpp"

namespace fedprune {

void Silo::split_by_year() {
  train_idx.clear();
  val_idx.clear();
  if (years.empty()) return;
  const int last = *std::max_element(years.begin(), years.end());
  for (Index i = 0; i < samples(); ++i)
    (years[static_cast<std::size_t>(i)] == last ? val_idx : train_idx).push_back(i);
}

namespace {

// Fixed two-layer tanh teacher; nonlinear so pruning is not trivially
// lossless on the task it generates.
struct Teacher {
  Mat<double> w1;  // hidden x dim
  Vec<double> w2;

  explicit Teacher(Index dim, std::uint64_t seed) {
    const Index hidden = 16;
    Rng rng(derive_seed(seed, 0x7e4c));
    w1.resize(hidden, dim);
    for (Index i = 0; i < hidden; ++i)
      for (Index j = 0; j < dim; ++j) w1(i, j) = rng.normal() / std::sqrt(double(dim));
    w2.resize(hidden);
    for (Index i = 0; i < hidden; ++i) w2[i] = rng.normal() / std::sqrt(double(hidden));
  }

  double operator()(const Vec<double>& x) const {
    return w2.dot((w1 * x).array().tanh().matrix()) * 2.0;
  }
};

// Evenly spaced in [-1, 1]; silo k's slot is permuted per knob so the gain,
// shift and rotation orderings differ from each other.
double spread_value(int k, int num, Rng& perm_rng, std::vector<int>& perm) {
  if (perm.empty()) {
    perm.resize(num);
    for (int i = 0; i < num; ++i) perm[i] = i;
    for (int i = num - 1; i > 0; --i)
      std::swap(perm[i], perm[perm_rng.index(static_cast<std::size_t>(i + 1))]);
  }
  if (num == 1) return 0.0;
  return -1.0 + 2.0 * perm[k] / static_cast<double>(num - 1);
}

void rotate_pairs(Vec<double>& z, double angle) {
  if (angle == 0.0) return;
  const double c = std::cos(angle), s = std::sin(angle);
  for (Index i = 0; i + 1 < z.size(); i += 2) {
    const double a = z[i], b = z[i + 1];
    z[i] = c * a - s * b;
    z[i + 1] = s * a + c * b;
  }
}

}  // namespace

std::vector<Silo> gen_synthetic_silos(const SyntheticConfig& cfg) {
  cfg.validate();
  const Index dim = cfg.feature_dim();
  Teacher teacher(dim, cfg.seed);

  // mild fixed anisotropy so per-silo rotations actually change covariance
  Vec<double> axis_scale(dim);
  for (Index j = 0; j < dim; ++j)
    axis_scale[j] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(j) + 0.3);

  Rng meta(derive_seed(cfg.seed, 0x51105));
  std::vector<int> shift_perm, gain_perm, rot_perm;
  // label shift keeps silo order so small-K examples land on +/-1 exactly
  for (int i = 0; i < cfg.num_silos; ++i) shift_perm.push_back(i);

  std::vector<Silo> silos;
  silos.reserve(static_cast<std::size_t>(cfg.num_silos));
  for (int k = 0; k < cfg.num_silos; ++k) {
    Rng rng(derive_seed(cfg.seed, 0xda7a, static_cast<std::uint64_t>(k)));
    const Index n = cfg.min_samples +
                    static_cast<Index>(meta.index(
                        static_cast<std::size_t>(cfg.max_samples - cfg.min_samples + 1)));

    const double b_k = cfg.label_shift * spread_value(k, cfg.num_silos, meta, shift_perm);
    const double a_k = 1.0 + cfg.gain_spread * spread_value(k, cfg.num_silos, meta, gain_perm);
    const double theta_k =
        cfg.feature_rotation * spread_value(k, cfg.num_silos, meta, rot_perm);

    Silo silo;
    silo.id = "silo_" + std::to_string(k);
    silo.features.resize(n, dim);
    silo.targets.resize(n);
    silo.years.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      Vec<double> z(dim);
      for (Index j = 0; j < dim; ++j) z[j] = rng.normal() * axis_scale[j];
      rotate_pairs(z, theta_k);
      const double y = a_k * teacher(z) + b_k + cfg.noise_scale * rng.normal();
      silo.features.row(i) = z.cast<Real>().transpose();
      silo.targets[i] = static_cast<Real>(y);
      silo.years[static_cast<std::size_t>(i)] = 2000 + static_cast<int>(i) % cfg.years;
    }
    silo.split_by_year();
    silos.push_back(std::move(silo));
  }
  return silos;
}

void oversample_equalize(std::vector<Silo>& silos, std::uint64_t seed) {
  Index target = 0;
  for (const Silo& s : silos) {
    if (s.samples() == 0) throw DataError("cannot oversample an empty silo");
    target = std::max(target, static_cast<Index>(s.train_idx.size()));
  }
  for (std::size_t k = 0; k < silos.size(); ++k) {
    Silo& s = silos[k];
    const std::size_t originals = s.train_idx.size();
    const Index extra = target - static_cast<Index>(originals);
    if (extra <= 0) continue;
    Rng rng(derive_seed(seed, 0x0e5a, k));
    const Index base = s.samples();
    Mat<Real> feats(base + extra, s.features.cols());
    feats.topRows(base) = s.features;
    Vec<Real> targs(base + extra);
    targs.head(base) = s.targets;
    for (Index i = 0; i < extra; ++i) {
      // draw replacements from the original train rows only
      const Index src = s.train_idx[rng.index(originals)];
      feats.row(base + i) = s.features.row(src);
      targs[base + i] = s.targets[src];
      s.years.push_back(s.years[static_cast<std::size_t>(src)]);
      s.train_idx.push_back(base + i);
    }
    s.features = std::move(feats);
    s.targets = std::move(targs);
  }
}

NormStats normalize(std::vector<Silo>& silos) {
  if (silos.empty()) throw DataError("normalize needs at least one silo");
  const Index dim = silos.front().features.cols();

  Index n = 0;
  Vec<double> sum = Vec<double>::Zero(dim), sq = Vec<double>::Zero(dim);
  double tsum = 0, tsq = 0;
  for (const Silo& s : silos) {
    if (s.features.cols() != dim) throw DataError("silos disagree on feature dim");
    for (Index i : s.train_idx) {
      sum += s.features.row(i).cast<double>().transpose();
      sq += s.features.row(i).cast<double>().array().square().matrix().transpose();
      tsum += s.targets[i];
      tsq += double(s.targets[i]) * double(s.targets[i]);
      ++n;
    }
  }
  if (n == 0) throw DataError("no training rows to normalize with");

  NormStats st;
  Vec<double> mean = sum / double(n);
  Vec<double> var = (sq / double(n) - mean.array().square().matrix()).cwiseMax(0.0);
  st.feat_mean = mean.cast<Real>();
  st.feat_std = var.array().sqrt().cast<Real>();
  st.zero_variance.assign(static_cast<std::size_t>(dim), 0);
  for (Index j = 0; j < dim; ++j) {
    if (st.feat_std[j] < Real(1e-12)) {
      st.feat_std[j] = 1;  // constant feature maps to 0
      st.zero_variance[static_cast<std::size_t>(j)] = 1;
      st.had_zero_variance = true;
    }
  }
  const double tmean = tsum / double(n);
  const double tvar = std::max(0.0, tsq / double(n) - tmean * tmean);
  st.target_mean = static_cast<Real>(tmean);
  st.target_std = tvar < 1e-24 ? Real(1) : static_cast<Real>(std::sqrt(tvar));

  for (Silo& s : silos) {
    s.features = (s.features.rowwise() - st.feat_mean.transpose()).array().rowwise() /
                 st.feat_std.transpose().array();
    for (Index j = 0; j < dim; ++j)
      if (st.zero_variance[static_cast<std::size_t>(j)]) s.features.col(j).setZero();
    s.targets = (s.targets.array() - st.target_mean) / st.target_std;
  }
  return st;
}

Vec<Real> inverse_transform_predictions(const NormStats& stats, const Vec<Real>& pred) {
  return (pred.array() * stats.target_std + stats.target_mean).matrix();
}

}  // namespace fedprune
