#include "fedprune/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fedprune/comms.hpp"

namespace fedprune {

using json = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string data_fingerprint(const DataConfig& data) {
  ExperimentConfig probe;  // reuse the config serializer for a canonical form
  probe.data = data;
  json j = json::parse(config_to_json(probe));
  std::uint64_t h = fnv1a(j["data"].dump());
  if (!data.synthetic) {
    std::ifstream in(data.csv.path, std::ios::binary);
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      h = fnv1a(ss.str(), h);
    }
  }
  return hex64(h);
}

std::string result_to_json(const ExperimentResult& r) {
  json j;
  j["version"] = 1;
  j["method"] = to_string(r.config.method);
  j["seed"] = r.seed;
  j["data_fingerprint"] = r.data_fingerprint;
  // echo the experiment-defining config; seed list and output directory are
  // driver context and would break byte-identity across reruns
  ExperimentConfig echo = r.config;
  echo.seeds = {r.seed};
  echo.out_dir.clear();
  j["config"] = json::parse(config_to_json(echo));

  json rounds = json::array();
  for (const RoundMetrics& m : r.rounds) {
    json e;
    e["round"] = m.round;
    e["mean_rmse"] = m.mean_rmse;
    e["min_rmse"] = m.min_rmse;
    e["max_rmse"] = m.max_rmse;
    e["mean_sparsity"] = m.mean_sparsity;
    e["client_rmse"] = m.client_rmse;
    e["client_sparsity"] = m.client_sparsity;
    e["upload_bytes_idealized"] = m.upload_ideal;
    e["download_bytes_idealized"] = m.download_ideal;
    e["upload_bytes_wire"] = m.upload_wire;
    e["download_bytes_wire"] = m.download_wire;
    rounds.push_back(std::move(e));
  }
  j["rounds"] = rounds;

  j["final"] = {{"client_rmse", r.final_rmse},
                {"client_sparsity", r.final_sparsity},
                {"mean_rmse", r.final_mean_rmse},
                {"mean_sparsity", r.final_mean_sparsity}};
  j["cost"] = {{"total_bytes_idealized", r.total_ideal},
               {"total_bytes_wire", r.total_wire},
               {"per_client_mb_idealized", r.per_client_mb_ideal},
               {"per_client_mb_wire", r.per_client_mb_wire},
               {"avg_model_kb_idealized", r.avg_model_kb_ideal},
               {"avg_model_kb_wire", r.avg_model_kb_wire},
               {"dense_model_kb", r.dense_model_kb}};
  return j.dump(2) + "\n";
}

std::string rounds_to_csv(const ExperimentResult& r) {
  std::string out = "round,mean_rmse,min_rmse,max_rmse,mean_sparsity,"
                    "cum_upload_mb,cum_download_mb\n";
  std::uint64_t up = 0, down = 0;
  for (const RoundMetrics& m : r.rounds) {
    up += m.upload_ideal;
    down += m.download_ideal;
    out += std::to_string(m.round) + ',' + csv_num(m.mean_rmse) + ',' +
           csv_num(m.min_rmse) + ',' + csv_num(m.max_rmse) + ',' +
           csv_num(m.mean_sparsity) + ',' + csv_num(report_mb(up)) + ',' +
           csv_num(report_mb(down)) + '\n';
  }
  return out;
}

std::vector<MethodSummary> summarize_results(const std::vector<std::string>& files) {
  if (files.size() < 2) throw ConfigError("compare needs at least two result files");

  struct Acc {
    std::vector<double> rmse;
    double sparsity = 0, comm = 0, kb = 0;
    int n = 0;
    std::string fingerprint;
  };
  std::map<std::string, Acc> by_method;
  std::vector<std::string> order;
  std::string fingerprint;

  for (const std::string& f : files) {
    std::ifstream in(f);
    if (!in) throw DataError("cannot open result file " + f);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DataError("result file " + f + " is not valid JSON: " + e.what());
    }
    const std::string method = j.at("method").get<std::string>();
    const std::string fp = j.at("data_fingerprint").get<std::string>();
    if (fingerprint.empty()) fingerprint = fp;
    if (fp != fingerprint)
      throw DataError("result files disagree on the data source (fingerprint mismatch): " + f);
    Acc& a = by_method[method];
    if (a.n == 0) order.push_back(method);
    a.rmse.push_back(j.at("final").at("mean_rmse").get<double>());
    a.sparsity += j.at("final").at("mean_sparsity").get<double>();
    a.comm += j.at("cost").at("per_client_mb_idealized").get<double>();
    a.kb += j.at("cost").at("avg_model_kb_idealized").get<double>();
    a.fingerprint = fp;
    a.n += 1;
  }

  double fedavg_rmse = 0, fedavg_comm = 0;
  const bool has_baseline = by_method.count("fedavg") > 0;
  if (has_baseline) {
    const Acc& fa = by_method["fedavg"];
    for (double v : fa.rmse) fedavg_rmse += v;
    fedavg_rmse /= fa.n;
    fedavg_comm = fa.comm / fa.n;
  }

  std::vector<MethodSummary> rows;
  for (const std::string& method : order) {
    const Acc& a = by_method[method];
    MethodSummary s;
    s.method = method;
    s.runs = a.n;
    for (double v : a.rmse) s.mean_rmse += v;
    s.mean_rmse /= a.n;
    double var = 0;
    for (double v : a.rmse) var += (v - s.mean_rmse) * (v - s.mean_rmse);
    s.rmse_std = a.n > 1 ? std::sqrt(var / (a.n - 1)) : 0.0;
    s.mean_sparsity = a.sparsity / a.n;
    s.comm_mb = a.comm / a.n;
    s.model_kb = a.kb / a.n;
    s.fingerprint = a.fingerprint;
    s.has_baseline = has_baseline;
    if (has_baseline) {
      s.saved_pct = fedavg_comm > 0 ? 100.0 * (1.0 - s.comm_mb / fedavg_comm) : 0.0;
      s.improvement_pct =
          fedavg_rmse > 0 ? 100.0 * (1.0 - s.mean_rmse / fedavg_rmse) : 0.0;
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

std::string comparison_text(const std::vector<MethodSummary>& rows) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%-14s %6s %18s %10s %9s %10s %12s\n", "method", "runs",
                "rmse (sparsity)", "comm MB", "saved %", "model KB", "improve %");
  out += line;
  out += std::string(82, '-') + '\n';
  for (const MethodSummary& s : rows) {
    char rmse[64];
    if (s.mean_sparsity > 0)
      std::snprintf(rmse, sizeof(rmse), "%.3f (%.2f)", s.mean_rmse, s.mean_sparsity);
    else
      std::snprintf(rmse, sizeof(rmse), "%.3f", s.mean_rmse);
    std::snprintf(line, sizeof(line), "%-14s %6d %18s %10.2f %9.1f %10.2f %12.1f\n",
                  s.method.c_str(), s.runs, rmse, s.comm_mb,
                  s.has_baseline ? s.saved_pct : 0.0, s.model_kb,
                  s.has_baseline ? s.improvement_pct : 0.0);
    out += line;
  }
  return out;
}

std::string comparison_csv(const std::vector<MethodSummary>& rows) {
  std::string out =
      "method,runs,mean_rmse,rmse_std,mean_sparsity,comm_mb,saved_pct,model_kb,"
      "improvement_pct\n";
  for (const MethodSummary& s : rows) {
    out += s.method + ',' + std::to_string(s.runs) + ',' + csv_num(s.mean_rmse) + ',' +
           csv_num(s.rmse_std) + ',' + csv_num(s.mean_sparsity) + ',' + csv_num(s.comm_mb) +
           ',' + csv_num(s.saved_pct) + ',' + csv_num(s.model_kb) + ',' +
           csv_num(s.improvement_pct) + '\n';
  }
  return out;
}

RunFiles write_result_files(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  RunFiles files;
  const std::string stem = "seed" + std::to_string(result.seed);
  files.result_json = (fs::path(out_dir) / ("result_" + stem + ".json")).string();
  files.rounds_csv = (fs::path(out_dir) / ("rounds_" + stem + ".csv")).string();
  files.meta_json = (fs::path(out_dir) / ("meta_" + stem + ".json")).string();

  std::ofstream(files.result_json) << result_to_json(result);
  std::ofstream(files.rounds_csv) << rounds_to_csv(result);
  json meta;
  meta["wall_seconds"] = result.wall_seconds;
  std::ofstream(files.meta_json) << meta.dump(2) << "\n";

  if (!result.final_models.empty()) {
    files.model_dir = (fs::path(out_dir) / ("models_" + stem)).string();
    fs::create_directories(files.model_dir);
    const bool single = result.final_models.size() == 1;
    for (std::size_t k = 0; k < result.final_models.size(); ++k) {
      const std::string name = single ? "model.fpsb" : "client_" + std::to_string(k) + ".fpsb";
      std::vector<std::uint8_t> blob =
          encode_sparse(result.final_models[k], result.final_masks[k]);
      std::ofstream out((fs::path(files.model_dir) / name).string(), std::ios::binary);
      out.write(reinterpret_cast<const char*>(blob.data()),
                static_cast<std::streamsize>(blob.size()));
    }
  }
  return files;
}

void write_aggregate(const std::vector<ExperimentResult>& results,
                     const std::string& out_dir) {
  if (results.empty()) return;
  const std::size_t n = results.size();
  auto mean_std = [&](auto&& get) {
    double mean = 0;
    for (const auto& r : results) mean += get(r);
    mean /= static_cast<double>(n);
    double var = 0;
    for (const auto& r : results) var += (get(r) - mean) * (get(r) - mean);
    return std::pair<double, double>(mean, n > 1 ? std::sqrt(var / (double(n) - 1)) : 0.0);
  };

  auto [rmse_m, rmse_s] = mean_std([](const auto& r) { return r.final_mean_rmse; });
  auto [sp_m, sp_s] = mean_std([](const auto& r) { return r.final_mean_sparsity; });
  auto [mb_m, mb_s] = mean_std([](const auto& r) { return r.per_client_mb_ideal; });
  auto [kb_m, kb_s] = mean_std([](const auto& r) { return r.avg_model_kb_ideal; });

  json j;
  j["method"] = to_string(results.front().config.method);
  j["runs"] = n;
  j["seeds"] = json::array();
  for (const auto& r : results) j["seeds"].push_back(r.seed);
  j["final_mean_rmse"] = {{"mean", rmse_m}, {"std", rmse_s}};
  j["final_mean_sparsity"] = {{"mean", sp_m}, {"std", sp_s}};
  j["per_client_mb_idealized"] = {{"mean", mb_m}, {"std", mb_s}};
  j["avg_model_kb_idealized"] = {{"mean", kb_m}, {"std", kb_s}};
  j["data_fingerprint"] = results.front().data_fingerprint;

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream((fs::path(out_dir) / "aggregate.json").string()) << j.dump(2) << "\n";
}

}  // namespace fedprune
