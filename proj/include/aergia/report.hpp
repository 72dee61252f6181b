#pragma once

// Trace files and summaries.
//
// trace_<strategy>_<seed>.csv has the header
//   round,duration_s,accuracy,dropped,num_offloads
// where `dropped` lists dropped client ids separated by ';' (empty if none).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aergia/simulation.hpp"

namespace aergia {

inline constexpr const char* kTraceHeader = "round,duration_s,accuracy,dropped,num_offloads";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string trace_file_name(const std::string& strategy, std::uint64_t seed) {
  return "trace_" + strategy + "_" + std::to_string(seed) + ".csv";
}

inline void write_trace_csv(std::ostream& out, std::span<const RoundTrace> traces) {
  out << kTraceHeader << '\n';
  for (const auto& t : traces) {
    std::string dropped;
    for (int id : t.dropped) dropped += (dropped.empty() ? "" : ";") + std::to_string(id);
    out << t.round << ',' << format_number(t.duration) << ',' << format_number(t.accuracy) << ',' << dropped << ','
        << t.num_offloads() << '\n';
  }
}

struct TraceRow {
  int round = 0;
  double duration = 0.0;
  double accuracy = 0.0;
  std::vector<int> dropped;
  int num_offloads = 0;
};

inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw std::runtime_error("trace file has an unexpected header");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 5) throw std::runtime_error("malformed trace row: " + line);
    TraceRow row;
    row.round = std::stoi(cols[0]);
    row.duration = std::stod(cols[1]);
    row.accuracy = std::stod(cols[2]);
    std::stringstream ds(cols[3]);
    while (std::getline(ds, cell, ';')) {
      if (!cell.empty()) row.dropped.push_back(std::stoi(cell));
    }
    row.num_offloads = std::stoi(cols[4]);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const ExperimentSummary& s) {
  return {{"rounds", s.rounds},
          {"total_time", s.total_time},
          {"final_accuracy", s.final_accuracy},
          {"best_accuracy", s.best_accuracy},
          {"mean_duration", s.mean_duration},
          {"sd_duration", s.sd_duration},
          {"median_duration", s.median_duration}};
}

// Per-strategy aggregate over replicates; round durations are pooled for the
// mean and standard deviation.
inline nlohmann::json summary_json(std::span<const ExperimentResult> results) {
  std::map<std::string, std::vector<const ExperimentResult*>> by_strategy;
  for (const auto& r : results) by_strategy[r.strategy].push_back(&r);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, runs] : by_strategy) {
    nlohmann::json reps = nlohmann::json::array();
    std::vector<double> durations;
    double total = 0.0;
    double final_acc = 0.0;
    double best_acc = 0.0;
    for (const auto* r : runs) {
      auto j = to_json(r->summary);
      j["seed"] = r->seed;
      reps.push_back(j);
      total += r->summary.total_time;
      final_acc += r->summary.final_accuracy;
      best_acc += r->summary.best_accuracy;
      for (const auto& t : r->traces) durations.push_back(t.duration);
    }
    const double n = static_cast<double>(runs.size());
    double mean = 0.0;
    for (double d : durations) mean += d;
    mean = durations.empty() ? 0.0 : mean / static_cast<double>(durations.size());
    double var = 0.0;
    for (double d : durations) var += (d - mean) * (d - mean);
    const double sd = durations.empty() ? 0.0 : std::sqrt(var / static_cast<double>(durations.size()));
    out[name] = {{"replicates", reps},
                 {"mean_total_time", total / n},
                 {"mean_final_accuracy", final_acc / n},
                 {"mean_best_accuracy", best_acc / n},
                 {"mean_round_duration", mean},
                 {"sd_round_duration", sd}};
  }
  return {{"strategies", out}};
}

struct Comparison {
  double time_reduction_pct = 0.0;  // averaged over paired replicates
  double accuracy_delta = 0.0;      // final accuracy of A minus B, averaged
  int replicates = 0;
};

// Seeds for which trace files of `strategy` exist in `dir`.
inline std::vector<std::uint64_t> trace_seeds(const std::filesystem::path& dir, const std::string& strategy) {
  std::vector<std::uint64_t> seeds;
  const std::string prefix = "trace_" + strategy + "_";
  if (!std::filesystem::is_directory(dir)) return seeds;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string f = entry.path().filename().string();
    if (!f.starts_with(prefix) || !f.ends_with(".csv")) continue;
    const std::string mid = f.substr(prefix.size(), f.size() - prefix.size() - 4);
    if (mid.empty() || !std::all_of(mid.begin(), mid.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    seeds.push_back(std::stoull(mid));
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

inline Comparison compare_strategies(const std::filesystem::path& dir, const std::string& a, const std::string& b) {
  const auto seeds_a = trace_seeds(dir, a);
  const auto seeds_b = trace_seeds(dir, b);
  if (seeds_a.empty()) throw std::runtime_error("no traces for strategy '" + a + "' in " + dir.string());
  if (seeds_b.empty()) throw std::runtime_error("no traces for strategy '" + b + "' in " + dir.string());
  if (seeds_a.size() != seeds_b.size()) {
    throw std::runtime_error("replicate counts differ: " + std::to_string(seeds_a.size()) + " for '" + a + "' vs " +
                             std::to_string(seeds_b.size()) + " for '" + b + "'");
  }
  if (seeds_a != seeds_b) throw std::runtime_error("strategies were run with different seeds");

  auto load = [&](const std::string& s, std::uint64_t seed) {
    std::ifstream in(dir / trace_file_name(s, seed));
    if (!in) throw std::runtime_error("cannot read " + trace_file_name(s, seed));
    return read_trace_csv(in);
  };
  Comparison cmp;
  for (auto seed : seeds_a) {
    const auto ta = load(a, seed);
    const auto tb = load(b, seed);
    double total_a = 0.0;
    double total_b = 0.0;
    for (const auto& r : ta) total_a += r.duration;
    for (const auto& r : tb) total_b += r.duration;
    cmp.time_reduction_pct += total_b > 0.0 ? (1.0 - total_a / total_b) * 100.0 : 0.0;
    cmp.accuracy_delta += (ta.empty() ? 0.0 : ta.back().accuracy) - (tb.empty() ? 0.0 : tb.back().accuracy);
    ++cmp.replicates;
  }
  cmp.time_reduction_pct /= cmp.replicates;
  cmp.accuracy_delta /= cmp.replicates;
  return cmp;
}

inline std::string format_comparison(const std::string& a, const std::string& b, const Comparison& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s vs %s over %d replicate(s): %.1f%% reduction in total time, final accuracy delta %+.4f",
                a.c_str(), b.c_str(), c.replicates, c.time_reduction_pct, c.accuracy_delta);
  return buf;
}

}  // namespace aergia
