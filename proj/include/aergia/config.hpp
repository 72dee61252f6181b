#pragma once

// Experiment configuration: a JSON document with one object per concern.
// Every key is optional except "strategies". The README lists the schema.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aergia/simulation.hpp"

namespace aergia {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out = "invalid configuration:";
    for (const auto& e : errors) out += "\n  " + e;
    return out;
  }
  std::vector<std::string> errors_;
};

struct ExperimentConfig {
  SimulationConfig sim;
  std::vector<StrategyConfig> strategies;
  std::uint64_t seed = 1;
  int replicates = 1;
};

namespace detail {

class JsonReader {
 public:
  explicit JsonReader(std::vector<std::string>& errors) : errors_(errors) {}

  // Reads obj[key] into out when present; records a field error on type mismatch.
  template <typename T>
  void read(const nlohmann::json& obj, const char* key, T& out, const std::string& path) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string field = path.empty() ? key : path + "." + key;
    try {
      if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        out = v.get<T>();
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
            throw std::invalid_argument("must be >= 0");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        out = v.get<T>();
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception& e) {
      errors_.push_back(field + ": " + e.what());
    }
  }

  void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
    if (!obj.is_object()) {
      errors_.push_back((path.empty() ? std::string("<root>") : path) + ": expected an object");
      return;
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : obj.items()) {
      if (!ok.contains(k)) errors_.push_back((path.empty() ? k : path + "." + k) + ": unknown key");
    }
  }

  std::vector<std::string>& errors_;
};

inline StrategyConfig parse_strategy(const nlohmann::json& j, const std::string& path, JsonReader& r) {
  std::string type;
  std::string name;
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    r.errors_.push_back(path + ".type: required string");
    return {};
  }
  type = j.at("type").get<std::string>();
  r.read(j, "name", name, path);
  StrategyParams params;
  if (type == "fedavg") {
    r.check_keys(j, {"type", "name"}, path);
    params = FedAvgStrategy{};
  } else if (type == "aergia") {
    r.check_keys(j, {"type", "name", "similarity_factor", "profile_batches", "profile_noise"}, path);
    AergiaStrategy a;
    r.read(j, "similarity_factor", a.similarity_factor, path);
    r.read(j, "profile_batches", a.profile_batches, path);
    r.read(j, "profile_noise", a.profile_noise, path);
    params = a;
  } else if (type == "deadline") {
    r.check_keys(j, {"type", "name", "multiplier"}, path);
    DeadlineStrategy d;
    r.read(j, "multiplier", d.multiplier, path);
    params = d;
  } else if (type == "tifl") {
    r.check_keys(j, {"type", "name", "num_tiers"}, path);
    TiflStrategy t;
    r.read(j, "num_tiers", t.num_tiers, path);
    params = t;
  } else if (type == "fedprox") {
    r.check_keys(j, {"type", "name", "mu"}, path);
    FedProxStrategy p;
    r.read(j, "mu", p.mu, path);
    params = p;
  } else if (type == "fednova") {
    r.check_keys(j, {"type", "name"}, path);
    params = FedNovaStrategy{};
  } else {
    r.errors_.push_back(path + ".type: unknown strategy '" + type +
                        "' (expected fedavg, aergia, deadline, tifl, fedprox or fednova)");
    return {};
  }
  return StrategyConfig(params, name);
}

inline nlohmann::json strategy_to_json(const StrategyConfig& s) {
  nlohmann::json j{{"type", s.kind()}, {"name", s.name}};
  if (const auto* a = s.as<AergiaStrategy>()) {
    j["similarity_factor"] = a->similarity_factor;
    j["profile_batches"] = a->profile_batches;
    j["profile_noise"] = a->profile_noise;
  } else if (const auto* d = s.as<DeadlineStrategy>()) {
    j["multiplier"] = d->multiplier;
  } else if (const auto* t = s.as<TiflStrategy>()) {
    j["num_tiers"] = t->num_tiers;
  } else if (const auto* p = s.as<FedProxStrategy>()) {
    j["mu"] = p->mu;
  }
  return j;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  std::vector<std::string> errors;
  detail::JsonReader r(errors);
  ExperimentConfig cfg;
  auto& sim = cfg.sim;
  r.check_keys(root, {"seed", "replicates", "dataset", "partition", "clients", "model", "training", "timing", "strategies"}, "");
  if (!root.is_object()) throw ConfigError(errors);

  r.read(root, "seed", cfg.seed, "");
  r.read(root, "replicates", cfg.replicates, "");

  if (root.contains("dataset")) {
    const auto& d = root.at("dataset");
    r.check_keys(d, {"num_classes", "samples_per_class", "input_dim", "noise"}, "dataset");
    if (d.is_object()) {
      r.read(d, "num_classes", sim.dataset.num_classes, "dataset");
      r.read(d, "samples_per_class", sim.dataset.samples_per_class, "dataset");
      r.read(d, "input_dim", sim.dataset.input_dim, "dataset");
      r.read(d, "noise", sim.dataset.noise, "dataset");
    }
  }

  if (root.contains("partition")) {
    const auto& p = root.at("partition");
    r.check_keys(p, {"mode", "classes_per_client", "samples_per_client", "sizes"}, "partition");
    if (p.is_object()) {
      std::string mode = "iid";
      r.read(p, "mode", mode, "partition");
      int k = 0;
      r.read(p, "classes_per_client", k, "partition");
      if (mode == "iid") {
        sim.partition_mode = PartitionMode::iid();
      } else if (mode == "noniid") {
        sim.partition_mode = PartitionMode::non_iid(k);
        if (!p.contains("classes_per_client")) errors.push_back("partition.classes_per_client: required for noniid");
      } else {
        errors.push_back("partition.mode: expected 'iid' or 'noniid'");
      }
      r.read(p, "samples_per_client", sim.samples_per_client, "partition");
      if (p.contains("sizes")) {
        const auto& s = p.at("sizes");
        if (s.is_string() && s.get<std::string>() == "equal") {
          sim.size_weights.clear();
        } else if (s.is_array()) {
          r.read(p, "sizes", sim.size_weights, "partition");
        } else {
          errors.push_back("partition.sizes: expected \"equal\" or a list of weights");
        }
      }
    }
  }

  if (root.contains("clients")) {
    const auto& c = root.at("clients");
    r.check_keys(c, {"count", "per_round", "speeds"}, "clients");
    if (c.is_object()) {
      r.read(c, "count", sim.num_clients, "clients");
      r.read(c, "per_round", sim.clients_per_round, "clients");
      if (c.contains("speeds")) {
        const auto& s = c.at("speeds");
        if (s.is_array()) {
          r.read(c, "speeds", sim.speeds.fixed, "clients");
        } else if (s.is_object()) {
          r.check_keys(s, {"low", "high"}, "clients.speeds");
          r.read(s, "low", sim.speeds.low, "clients.speeds");
          r.read(s, "high", sim.speeds.high, "clients.speeds");
        } else {
          errors.push_back("clients.speeds: expected {\"low\", \"high\"} or a list of speeds");
        }
      }
    }
  }

  if (root.contains("model")) {
    const auto& m = root.at("model");
    r.check_keys(m, {"hidden_dim"}, "model");
    if (m.is_object()) r.read(m, "hidden_dim", sim.hidden_dim, "model");
  }

  if (root.contains("training")) {
    const auto& t = root.at("training");
    r.check_keys(t, {"rounds", "local_updates", "batch_size", "learning_rate"}, "training");
    if (t.is_object()) {
      r.read(t, "rounds", sim.rounds, "training");
      r.read(t, "local_updates", sim.local_updates, "training");
      r.read(t, "batch_size", sim.batch_size, "training");
      r.read(t, "learning_rate", sim.learning_rate, "training");
    }
  }

  if (root.contains("timing")) {
    const auto& t = root.at("timing");
    r.check_keys(t, {"base_profile", "dispatch_latency", "transfer_latency"}, "timing");
    if (t.is_object()) {
      if (t.contains("base_profile")) {
        const auto& b = t.at("base_profile");
        r.check_keys(b, {"ff", "fc", "bc", "bf"}, "timing.base_profile");
        if (b.is_object()) {
          r.read(b, "ff", sim.base_profile.ff, "timing.base_profile");
          r.read(b, "fc", sim.base_profile.fc, "timing.base_profile");
          r.read(b, "bc", sim.base_profile.bc, "timing.base_profile");
          r.read(b, "bf", sim.base_profile.bf, "timing.base_profile");
        }
      }
      r.read(t, "dispatch_latency", sim.dispatch_latency, "timing");
      r.read(t, "transfer_latency", sim.transfer_latency, "timing");
    }
  }

  if (!root.contains("strategies") || !root.at("strategies").is_array() || root.at("strategies").empty()) {
    errors.push_back("strategies: required non-empty list");
  } else {
    std::set<std::string> names;
    const auto& list = root.at("strategies");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "strategies[" + std::to_string(i) + "]";
      auto s = detail::parse_strategy(list[i], path, r);
      if (s.name.empty()) continue;
      for (const auto& e : validate(s, sim.local_updates)) errors.push_back(path + "." + e);
      if (!names.insert(s.name).second) errors.push_back(path + ".name: duplicate strategy name '" + s.name + "'");
      cfg.strategies.push_back(std::move(s));
    }
  }

  if (cfg.replicates < 1) errors.push_back("replicates: must be >= 1");
  for (const auto& e : validate(sim)) errors.push_back(e);
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open config file"});
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return parse_config(root);
}

// Fully resolved configuration, defaults included.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.sim;
  nlohmann::json partition{{"mode", s.partition_mode.kind == PartitionMode::Kind::Iid ? "iid" : "noniid"},
                           {"samples_per_client", s.samples_per_client}};
  if (s.partition_mode.kind == PartitionMode::Kind::NonIid) {
    partition["classes_per_client"] = s.partition_mode.classes_per_client;
  }
  partition["sizes"] = s.size_weights.empty() ? nlohmann::json("equal") : nlohmann::json(s.size_weights);
  nlohmann::json speeds = s.speeds.fixed.empty() ? nlohmann::json{{"low", s.speeds.low}, {"high", s.speeds.high}}
                                                 : nlohmann::json(s.speeds.fixed);
  nlohmann::json strategies = nlohmann::json::array();
  for (const auto& st : cfg.strategies) strategies.push_back(detail::strategy_to_json(st));
  return {{"seed", cfg.seed},
          {"replicates", cfg.replicates},
          {"dataset",
           {{"num_classes", s.dataset.num_classes},
            {"samples_per_class", s.dataset.samples_per_class},
            {"input_dim", s.dataset.input_dim},
            {"noise", s.dataset.noise}}},
          {"partition", partition},
          {"clients", {{"count", s.num_clients}, {"per_round", s.clients_per_round}, {"speeds", speeds}}},
          {"model", {{"hidden_dim", s.hidden_dim}}},
          {"training",
           {{"rounds", s.rounds},
            {"local_updates", s.local_updates},
            {"batch_size", s.batch_size},
            {"learning_rate", s.learning_rate}}},
          {"timing",
           {{"base_profile",
             {{"ff", s.base_profile.ff}, {"fc", s.base_profile.fc}, {"bc", s.base_profile.bc}, {"bf", s.base_profile.bf}}},
            {"dispatch_latency", s.dispatch_latency},
            {"transfer_latency", s.transfer_latency}}},
          {"strategies", strategies}};
}

}  // namespace aergia
