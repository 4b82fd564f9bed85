#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fedprune/data.hpp"

namespace fedprune {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_real(const std::string& s, Real& out) {
  if (s.empty()) return false;
  float v;
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v)) return false;
  out = v;
  return true;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

}  // namespace

CsvSchema schema_for_dim(Index feature_dim) {
  CsvSchema s;
  for (Index j = 0; j < feature_dim; ++j) s.feature_cols.push_back("f" + std::to_string(j));
  return s;
}

CsvLoadResult load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> expected = {schema.silo_col, schema.year_col};
  expected.insert(expected.end(), schema.feature_cols.begin(), schema.feature_cols.end());
  expected.push_back(schema.target_col);
  if (split_line(line) != expected)
    throw DataError("header of " + path + " does not match the declared schema");

  const std::size_t dim = schema.feature_cols.size();
  struct Rows {
    std::vector<std::vector<Real>> feats;
    std::vector<Real> targets;
    std::vector<int> years;
  };
  std::map<std::string, Rows> by_silo;
  std::size_t rejected = 0;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != expected.size()) {
      ++rejected;
      continue;
    }
    int year;
    Real target;
    std::vector<Real> feats(dim);
    bool ok = !cells[0].empty() && parse_int(cells[1], year) &&
              parse_real(cells[dim + 2], target);
    for (std::size_t j = 0; ok && j < dim; ++j) ok = parse_real(cells[j + 2], feats[j]);
    if (!ok) {
      ++rejected;
      continue;
    }
    Rows& r = by_silo[cells[0]];
    r.feats.push_back(std::move(feats));
    r.targets.push_back(target);
    r.years.push_back(year);
  }

  CsvLoadResult result;
  result.rejected_rows = rejected;
  for (auto& [id, rows] : by_silo) {
    Silo s;
    s.id = id;
    const Index n = static_cast<Index>(rows.targets.size());
    s.features.resize(n, static_cast<Index>(dim));
    s.targets.resize(n);
    for (Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dim; ++j)
        s.features(i, static_cast<Index>(j)) = rows.feats[static_cast<std::size_t>(i)][j];
      s.targets[i] = rows.targets[static_cast<std::size_t>(i)];
    }
    s.years = std::move(rows.years);
    s.split_by_year();
    result.silos.push_back(std::move(s));
  }
  if (result.silos.empty()) throw DataError("no usable rows in " + path);
  return result;
}

void save_csv(const std::string& path, const std::vector<Silo>& silos, CsvSchema schema) {
  if (silos.empty()) throw DataError("nothing to save");
  const Index dim = silos.front().features.cols();
  if (schema.feature_cols.empty()) schema = schema_for_dim(dim);
  if (static_cast<Index>(schema.feature_cols.size()) != dim)
    throw DataError("schema feature count does not match data");

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << schema.silo_col << ',' << schema.year_col;
  for (const auto& c : schema.feature_cols) out << ',' << c;
  out << ',' << schema.target_col << '\n';

  char buf[64];
  for (const Silo& s : silos) {
    for (Index i = 0; i < s.samples(); ++i) {
      out << s.id << ',' << s.years[static_cast<std::size_t>(i)];
      for (Index j = 0; j < dim; ++j) {
        // %.9g round-trips binary32 exactly
        std::snprintf(buf, sizeof(buf), "%.9g", double(s.features(i, j)));
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.9g", double(s.targets[i]));
      out << ',' << buf << '\n';
    }
  }
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace fedprune
