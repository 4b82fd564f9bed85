#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fedprune/data.hpp"
#include "support/builders.hpp"

using namespace fedprune;

namespace {

SyntheticConfig small_cfg() {
  SyntheticConfig cfg;
  cfg.num_silos = 3;
  cfg.min_samples = 60;
  cfg.max_samples = 80;
  cfg.temporal_groups = {4};
  cfg.static_features = 2;
  cfg.seed = 11;
  return cfg;
}

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("zero knobs give identically distributed silos") {
  SyntheticConfig cfg = small_cfg();
  cfg.num_silos = 4;
  cfg.min_samples = 400;
  cfg.max_samples = 400;
  cfg.label_shift = 0;
  cfg.gain_spread = 0;
  cfg.feature_rotation = 0;
  cfg.noise_scale = 0.1;
  std::vector<Silo> silos = gen_synthetic_silos(cfg);
  REQUIRE(silos.size() == 4);
  std::vector<double> means;
  for (const Silo& s : silos) means.push_back(s.targets.cast<double>().mean());
  for (double m : means)
    CHECK(std::abs(m - means.front()) < 0.5);  // same distribution, sampling noise only
}

TEST_CASE("a label shift of 5 on two silos separates means by about 10") {
  SyntheticConfig cfg = small_cfg();
  cfg.num_silos = 2;
  cfg.min_samples = 500;
  cfg.max_samples = 500;
  cfg.label_shift = 5.0;
  cfg.gain_spread = 0;
  cfg.feature_rotation = 0;
  cfg.noise_scale = 0;
  std::vector<Silo> silos = gen_synthetic_silos(cfg);
  const double diff = std::abs(silos[0].targets.cast<double>().mean() -
                               silos[1].targets.cast<double>().mean());
  CHECK(diff == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("defaults mirror a nine-silo federation") {
  SyntheticConfig cfg;
  CHECK(cfg.num_silos == 9);
  std::vector<Silo> silos = gen_synthetic_silos(cfg);
  CHECK(silos.size() == 9);
  for (const Silo& s : silos) {
    CHECK_FALSE(s.train_idx.empty());
    CHECK_FALSE(s.val_idx.empty());
    CHECK(s.features.allFinite());
  }
}

TEST_CASE("generation is deterministic per seed") {
  std::vector<Silo> a = gen_synthetic_silos(small_cfg());
  std::vector<Silo> b = gen_synthetic_silos(small_cfg());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].features == b[k].features);
    CHECK(a[k].targets == b[k].targets);
    CHECK(a[k].train_idx == b[k].train_idx);
  }
}

TEST_CASE("raising the label shift raises across-silo target variance") {
  auto silo_mean_var = [](double shift, std::uint64_t seed) {
    SyntheticConfig cfg = small_cfg();
    cfg.num_silos = 6;
    cfg.label_shift = shift;
    cfg.seed = seed;
    std::vector<Silo> silos = gen_synthetic_silos(cfg);
    double mean = 0;
    std::vector<double> mus;
    for (const Silo& s : silos) {
      mus.push_back(s.targets.cast<double>().mean());
      mean += mus.back();
    }
    mean /= double(mus.size());
    double var = 0;
    for (double mu : mus) var += (mu - mean) * (mu - mean);
    return var / double(mus.size());
  };
  for (std::uint64_t seed : {1ull, 2ull, 3ull})
    CHECK(silo_mean_var(2.0, seed) > silo_mean_var(0.0, seed));
}

TEST_CASE("oversampling equalizes train sizes and keeps every original") {
  std::vector<Silo> silos;
  silos.push_back(testing::linear_silo(15, 1.0, 1));  // 12 train / 3 val
  silos.push_back(testing::linear_silo(30, 1.0, 2));  // 24 train / 6 val
  const Silo small_before = silos[0];

  oversample_equalize(silos, 7);
  CHECK(silos[0].train_idx.size() == silos[1].train_idx.size());
  CHECK(silos[1].train_idx.size() == 24);
  CHECK(silos[0].val_idx.size() == 3);  // untouched
  // originals all retained, appended rows duplicate existing train rows
  for (Index i = 0; i < small_before.samples(); ++i)
    CHECK(silos[0].features.row(i) == small_before.features.row(i));

  // already equal: a second pass changes nothing
  const auto sizes = silos[0].train_idx.size();
  std::vector<Silo> copy = silos;
  oversample_equalize(copy, 9);
  CHECK(copy[0].train_idx.size() == sizes);
  CHECK(copy[0].features == silos[0].features);
}

TEST_CASE("train sizes from a realistic spread all rise to the maximum") {
  const std::vector<int> sizes = {3116, 2736, 3316, 2479, 2244, 2432, 2369, 598, 1207};
  std::vector<Silo> silos;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    Silo s;
    s.id = "s" + std::to_string(k);
    const Index n = sizes[k] + 10;
    s.features = Mat<Real>::Constant(n, 2, Real(k));
    s.targets = Vec<Real>::Constant(n, Real(k));
    for (Index i = 0; i < n; ++i) s.years.push_back(i < sizes[k] ? 2000 : 2001);
    s.split_by_year();
    REQUIRE(s.train_idx.size() == static_cast<std::size_t>(sizes[k]));
    silos.push_back(std::move(s));
  }
  oversample_equalize(silos, 3);
  for (const Silo& s : silos) CHECK(s.train_idx.size() == 3316);
}

TEST_CASE("csv loads a minimal file and rejects bad rows") {
  const std::string path = temp_file("fp_min.csv");
  {
    std::ofstream out(path);
    out << "silo_id,year,f0,f1,target\n";
    out << "a,2000,1.5,2.5,3.5\n";
    out << "a,2001,0.5,1.0,2.0\n";
    out << "a,2001,0.5,,2.0\n";      // missing feature
    out << "a,2001,0.5,1.0,\n";      // missing target
    out << "a,20x1,0.5,1.0,2.0\n";   // bad year
  }
  CsvSchema schema = schema_for_dim(2);
  CsvLoadResult r = load_csv(path, schema);
  CHECK(r.silos.size() == 1);
  CHECK(r.silos[0].samples() == 2);
  CHECK(r.rejected_rows == 3);
  CHECK(r.silos[0].train_idx.size() == 1);  // 2001 is the validation year
  CHECK(r.silos[0].val_idx.size() == 1);
  std::remove(path.c_str());
}

TEST_CASE("csv error paths") {
  CsvSchema schema = schema_for_dim(2);
  CHECK_THROWS_AS(load_csv("/nonexistent/nope.csv", schema), DataError);

  const std::string bad_header = temp_file("fp_badhdr.csv");
  std::ofstream(bad_header) << "locus,year,f0,f1,target\na,2000,1,2,3\n";
  CHECK_THROWS_AS(load_csv(bad_header, schema), DataError);
  std::remove(bad_header.c_str());

  const std::string no_rows = temp_file("fp_norows.csv");
  std::ofstream(no_rows) << "silo_id,year,f0,f1,target\na,2000,oops,2,3\n";
  CHECK_THROWS_AS(load_csv(no_rows, schema), DataError);
  std::remove(no_rows.c_str());
}

TEST_CASE("save/load round-trips synthetic silos bit-exactly") {
  std::vector<Silo> silos = gen_synthetic_silos(small_cfg());
  const std::string path = temp_file("fp_roundtrip.csv");
  CsvSchema schema = schema_for_dim(silos[0].features.cols());
  save_csv(path, silos, schema);
  CsvLoadResult r = load_csv(path, schema);
  REQUIRE(r.silos.size() == silos.size());
  CHECK(r.rejected_rows == 0);
  for (std::size_t k = 0; k < silos.size(); ++k) {
    CHECK(r.silos[k].features == silos[k].features);
    CHECK(r.silos[k].targets == silos[k].targets);
    CHECK(r.silos[k].train_idx == silos[k].train_idx);
    CHECK(r.silos[k].val_idx == silos[k].val_idx);
  }
  std::remove(path.c_str());
}

TEST_CASE("normalization uses pooled train stats and round-trips") {
  std::vector<Silo> silos = gen_synthetic_silos(small_cfg());
  std::vector<Silo> raw = silos;
  NormStats st = normalize(silos);
  CHECK_FALSE(st.had_zero_variance);

  Index n = 0;
  Vec<double> mean = Vec<double>::Zero(silos[0].features.cols());
  Vec<double> sq = Vec<double>::Zero(silos[0].features.cols());
  for (const Silo& s : silos)
    for (Index i : s.train_idx) {
      mean += s.features.row(i).cast<double>();
      sq += s.features.row(i).cast<double>().array().square().matrix();
      ++n;
    }
  mean /= double(n);
  for (Index j = 0; j < mean.size(); ++j) {
    CHECK(std::abs(mean[j]) < 1e-5);
    CHECK(std::abs(sq[j] / double(n) - mean[j] * mean[j] - 1.0) < 1e-4);
  }

  // inverse transform recovers the raw values
  for (std::size_t k = 0; k < silos.size(); ++k) {
    Vec<Real> restored = inverse_transform_predictions(st, silos[k].targets);
    for (Index i = 0; i < restored.size(); ++i)
      CHECK(double(restored[i]) ==
            doctest::Approx(double(raw[k].targets[i])).epsilon(1e-5));
    for (Index j = 0; j < silos[k].features.cols(); ++j) {
      const double back = double(silos[k].features(0, j)) * double(st.feat_std[j]) +
                          double(st.feat_mean[j]);
      CHECK(back == doctest::Approx(double(raw[k].features(0, j))).epsilon(1e-4));
    }
  }
}

TEST_CASE("constant features map to zero with a warning flag") {
  std::vector<Silo> silos = gen_synthetic_silos(small_cfg());
  for (Silo& s : silos) s.features.col(1).setConstant(Real(4.2));
  NormStats st = normalize(silos);
  CHECK(st.had_zero_variance);
  CHECK(st.zero_variance[1] == 1);
  for (const Silo& s : silos)
    for (Index i = 0; i < s.samples(); ++i) CHECK(s.features(i, 1) == Real(0));
}

TEST_CASE("config validation rejects bad knobs") {
  SyntheticConfig cfg = small_cfg();
  cfg.num_silos = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.label_shift = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.years = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
