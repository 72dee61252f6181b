// Command-line front end for the federated straggler-mitigation simulator.
//
//   aergia run     --config <path> --out <dir> [--seed N] [--replicates K] [--jobs J]
//   aergia compare --out <dir> --a <strategy> --b <strategy>
//   aergia inspect --config <path> [--json <path>]
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "aergia/aergia.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

int cmd_run(const std::string& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed,
            std::optional<int> replicates, int jobs) {
  auto cfg = aergia::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (replicates) {
    if (*replicates < 1) throw aergia::ConfigError({"replicates: must be >= 1"});
    cfg.replicates = *replicates;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw std::runtime_error("cannot create output directory " + out_dir.string());
  write_file(out_dir / "config_echo.json", aergia::to_json(cfg).dump(2) + "\n");

  struct Job {
    aergia::StrategyConfig strategy;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (const auto& s : cfg.strategies) {
    for (int r = 0; r < cfg.replicates; ++r) work.push_back({s, cfg.seed + static_cast<std::uint64_t>(r)});
  }

  // Each job owns its simulation; results are written from this thread.
  std::vector<aergia::ExperimentResult> results(work.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t begin = 0; begin < work.size(); begin += width) {
    std::vector<std::future<aergia::ExperimentResult>> batch;
    const std::size_t end = std::min(work.size(), begin + width);
    for (std::size_t i = begin; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, [&cfg, job = work[i]] {
        return aergia::run_experiment(cfg.sim, job.strategy, job.seed);
      }));
    }
    for (std::size_t i = begin; i < end; ++i) results[i] = batch[i - begin].get();
  }

  for (const auto& r : results) {
    std::ostringstream csv;
    aergia::write_trace_csv(csv, r.traces);
    write_file(out_dir / aergia::trace_file_name(r.strategy, r.seed), csv.str());
    std::printf("%-16s seed %-6llu total %.1fs  final acc %.4f  mean round %.2fs\n", r.strategy.c_str(),
                static_cast<unsigned long long>(r.seed), r.summary.total_time, r.summary.final_accuracy,
                r.summary.mean_duration);
  }
  write_file(out_dir / "summary.json", aergia::summary_json(results).dump(2) + "\n");
  return kOk;
}

int cmd_compare(const fs::path& out_dir, const std::string& a, const std::string& b) {
  const auto cmp = aergia::compare_strategies(out_dir, a, b);
  std::printf("%s\n", aergia::format_comparison(a, b, cmp).c_str());
  return kOk;
}

int cmd_inspect(const std::string& config_path, const std::string& json_path) {
  const auto cfg = aergia::load_config(config_path);
  const auto& sim = cfg.sim;
  const auto data = aergia::generate_synthetic({sim.dataset.num_classes, sim.dataset.samples_per_class,
                                                sim.dataset.input_dim, sim.dataset.noise, cfg.seed});
  aergia::PartitionSpec ps;
  ps.num_clients = sim.num_clients;
  ps.mode = sim.partition_mode;
  ps.samples_per_client = sim.samples_per_client;
  ps.size_weights = sim.size_weights;
  ps.seed = cfg.seed;
  const auto parts = aergia::partition(data, ps);

  std::vector<int> ids;
  for (const auto& p : parts) ids.push_back(p.client_id);
  aergia::SimilarityOracle oracle(sim.dataset.num_classes, ids);
  for (const auto& p : parts) {
    oracle.submit({p.client_id, std::vector<std::int64_t>(p.class_counts.begin(), p.class_counts.end())});
  }
  const auto matrix = oracle.compute_matrix();

  std::printf("%-6s %-6s class_counts\n", "client", "size");
  for (const auto& p : parts) {
    std::string counts;
    for (int c : p.class_counts) counts += (counts.empty() ? "" : " ") + std::to_string(c);
    std::printf("%-6d %-6zu %s\n", p.client_id, p.size(), counts.c_str());
  }
  std::printf("\npairwise EMD\n");
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    for (std::size_t j = 0; j < matrix.size(); ++j) std::printf("%s%.3f", j ? " " : "", matrix.at_index(i, j));
    std::printf("\n");
  }

  nlohmann::json doc{{"clients", aergia::partition_manifest(parts)}, {"similarity", matrix.to_json()}};
  std::printf("\n%s\n", doc.dump(2).c_str());
  if (!json_path.empty()) write_file(json_path, doc.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning straggler-mitigation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int replicates = 0;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* run = app.add_subcommand("run", "run every configured strategy and write traces");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "master seed (overrides the config)");
  auto* rep_opt = run->add_option("--replicates", replicates, "replicate count (overrides the config)");
  run->add_option("--jobs", jobs, "experiments run in parallel");

  std::string strat_a;
  std::string strat_b;
  auto* compare = app.add_subcommand("compare", "total-time reduction and accuracy delta of A versus B");
  compare->add_option("--out", out_dir, "directory holding trace files")->required();
  compare->add_option("--a", strat_a, "strategy A")->required();
  compare->add_option("--b", strat_b, "strategy B")->required();

  std::string json_path;
  auto* inspect = app.add_subcommand("inspect", "print client class counts and the pairwise EMD matrix");
  inspect->add_option("--config", config_path, "experiment config (JSON)")->required();
  inspect->add_option("--json", json_path, "also write the JSON report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidationError;
  }

  try {
    if (*run) {
      return cmd_run(config_path, out_dir, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt,
                     *rep_opt ? std::optional<int>(replicates) : std::nullopt, jobs);
    }
    if (*compare) return cmd_compare(out_dir, strat_a, strat_b);
    if (*inspect) return cmd_inspect(config_path, json_path);
  } catch (const aergia::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kValidationError;
  } catch (const aergia::PartitionError& e) {
    std::fprintf(stderr, "partition error: %s\n", e.what());
    return kValidationError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kOk;
}
