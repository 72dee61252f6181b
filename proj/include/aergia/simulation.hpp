#pragma once

// Virtual-time simulation of synchronous federated rounds.
//
// Every client really trains its copy of the model with SGD; only time is
// simulated. A client's per-batch cost comes from its ground-truth phase
// timings, and rounds are driven by an event queue so that profiling reports,
// schedule dispatch, block handoffs and model submissions happen in the order
// they would on a real deployment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "aergia/aggregation.hpp"
#include "aergia/data.hpp"
#include "aergia/event_queue.hpp"
#include "aergia/model.hpp"
#include "aergia/profiler.hpp"
#include "aergia/random.hpp"
#include "aergia/scheduler.hpp"
#include "aergia/similarity.hpp"

namespace aergia {

// ---------------------------------------------------------------------------
// Strategies

struct FedAvgStrategy {};
struct AergiaStrategy {
  double similarity_factor = 1.0;  // f
  int profile_batches = 1;         // P
  double profile_noise = 0.0;      // relative sigma of the profiler
};
struct DeadlineStrategy {
  double multiplier = 1.0;  // deadline = multiplier * mean estimated completion
};
struct TiflStrategy {
  int num_tiers = 3;
};
struct FedProxStrategy {
  double mu = 0.01;
};
struct FedNovaStrategy {};

using StrategyParams =
    std::variant<FedAvgStrategy, AergiaStrategy, DeadlineStrategy, TiflStrategy, FedProxStrategy, FedNovaStrategy>;

inline std::string strategy_kind(const StrategyParams& p) {
  struct {
    std::string operator()(const FedAvgStrategy&) const { return "fedavg"; }
    std::string operator()(const AergiaStrategy&) const { return "aergia"; }
    std::string operator()(const DeadlineStrategy&) const { return "deadline"; }
    std::string operator()(const TiflStrategy&) const { return "tifl"; }
    std::string operator()(const FedProxStrategy&) const { return "fedprox"; }
    std::string operator()(const FedNovaStrategy&) const { return "fednova"; }
  } visitor;
  return std::visit(visitor, p);
}

struct StrategyConfig {
  std::string name;  // label used in output file names; defaults to the kind
  StrategyParams params;

  StrategyConfig() = default;
  StrategyConfig(StrategyParams p, std::string label = {}) : name(std::move(label)), params(p) {
    if (name.empty()) name = strategy_kind(params);
  }

  [[nodiscard]] std::string kind() const { return strategy_kind(params); }
  template <typename T>
  [[nodiscard]] const T* as() const {
    return std::get_if<T>(&params);
  }
};

inline std::vector<std::string> validate(const StrategyConfig& s, int local_updates) {
  std::vector<std::string> errors;
  if (const auto* a = s.as<AergiaStrategy>()) {
    if (!(a->similarity_factor >= 0.0) || !std::isfinite(a->similarity_factor))
      errors.push_back("similarity_factor: must be >= 0");
    if (a->profile_batches < 1 || a->profile_batches > local_updates)
      errors.push_back("profile_batches: must be in [1, local_updates]");
    if (!(a->profile_noise >= 0.0) || !std::isfinite(a->profile_noise))
      errors.push_back("profile_noise: must be >= 0");
  } else if (const auto* d = s.as<DeadlineStrategy>()) {
    if (!(d->multiplier > 0.0) || !std::isfinite(d->multiplier)) errors.push_back("multiplier: must be > 0");
  } else if (const auto* t = s.as<TiflStrategy>()) {
    if (t->num_tiers < 1) errors.push_back("num_tiers: must be >= 1");
  } else if (const auto* p = s.as<FedProxStrategy>()) {
    if (!(p->mu >= 0.0) || !std::isfinite(p->mu)) errors.push_back("mu: must be >= 0");
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Configuration

struct SpeedDistribution {
  double low = 0.1;
  double high = 1.0;
  std::vector<double> fixed;  // explicit per-client speeds; overrides the range when non-empty
};

struct SimulationConfig {
  SyntheticSpec dataset;
  PartitionMode partition_mode = PartitionMode::iid();
  int samples_per_client = 100;
  std::vector<double> size_weights;
  int num_clients = 24;
  int clients_per_round = 3;
  SpeedDistribution speeds;
  int hidden_dim = 16;
  int rounds = 100;
  int local_updates = 16;
  int batch_size = 32;
  double learning_rate = 0.05;
  PhaseTimings base_profile;
  double dispatch_latency = 0.0;
  double transfer_latency = 0.0;
};

inline std::vector<std::string> validate(const SimulationConfig& c) {
  std::vector<std::string> e;
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (c.dataset.num_classes < 2) e.push_back("dataset.num_classes: must be >= 2");
  if (c.dataset.samples_per_class < 5) e.push_back("dataset.samples_per_class: must be >= 5");
  if (c.dataset.input_dim < 1) e.push_back("dataset.input_dim: must be >= 1");
  if (!(c.dataset.noise >= 0.0) || !std::isfinite(c.dataset.noise)) e.push_back("dataset.noise: must be >= 0");
  if (c.partition_mode.kind == PartitionMode::Kind::NonIid &&
      (c.partition_mode.classes_per_client < 1 || c.partition_mode.classes_per_client > c.dataset.num_classes))
    e.push_back("partition.classes_per_client: must be in [1, num_classes]");
  if (c.samples_per_client < 0) e.push_back("partition.samples_per_client: must be >= 0");
  if (!c.size_weights.empty() && static_cast<int>(c.size_weights.size()) != c.num_clients)
    e.push_back("partition.sizes: must list one weight per client");
  for (double w : c.size_weights) {
    if (!positive(w)) {
      e.push_back("partition.sizes: weights must be > 0");
      break;
    }
  }
  if (c.num_clients < 1) e.push_back("clients.count: must be >= 1");
  if (c.clients_per_round < 1 || c.clients_per_round > c.num_clients)
    e.push_back("clients.per_round: must be in [1, clients.count]");
  if (c.speeds.fixed.empty()) {
    if (!(c.speeds.low > 0.0) || !(c.speeds.high <= 1.0) || !(c.speeds.low <= c.speeds.high))
      e.push_back("clients.speeds: range must satisfy 0 < low <= high <= 1");
  } else {
    if (static_cast<int>(c.speeds.fixed.size()) != c.num_clients)
      e.push_back("clients.speeds: explicit list must have one entry per client");
    for (double s : c.speeds.fixed) {
      if (!(s > 0.0 && s <= 1.0)) {
        e.push_back("clients.speeds: every speed must be in (0, 1]");
        break;
      }
    }
  }
  if (c.hidden_dim < 1) e.push_back("model.hidden_dim: must be >= 1");
  if (c.rounds < 0) e.push_back("training.rounds: must be >= 0");
  if (c.local_updates < 1) e.push_back("training.local_updates: must be >= 1");
  if (c.batch_size < 1) e.push_back("training.batch_size: must be >= 1");
  if (!positive(c.learning_rate)) e.push_back("training.learning_rate: must be > 0");
  if (!c.base_profile.valid()) e.push_back("timing.base_profile: all phases must be > 0");
  if (!(c.dispatch_latency >= 0.0) || !std::isfinite(c.dispatch_latency))
    e.push_back("timing.dispatch_latency: must be >= 0");
  if (!(c.transfer_latency >= 0.0) || !std::isfinite(c.transfer_latency))
    e.push_back("timing.transfer_latency: must be >= 0");
  return e;
}

// ---------------------------------------------------------------------------
// Clients and local training

// Endless stream of mini-batches over a client's samples, reshuffled each pass.
class BatchSampler {
 public:
  BatchSampler() = default;
  BatchSampler(std::vector<std::size_t> indices, std::uint64_t seed)
      : order_(std::move(indices)), rng_(seed) {
    if (order_.empty()) throw std::invalid_argument("sampler needs at least one sample");
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next(int batch_size) {
    std::vector<std::size_t> out;
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(batch_size), order_.size());
    out.reserve(want);
    while (out.size() < want) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

struct ClientState {
  int id = 0;
  double speed = 1.0;
  PhaseTimings timings;  // ground truth
  ClientPartition partition;
  BatchSampler sampler;
  PartitionedModel model;

  [[nodiscard]] double weight() const { return static_cast<double>(partition.size()); }
};

enum class TrainMode { Full, Frozen };

struct LocalTrainingOptions {
  double learning_rate = 0.05;
  int batch_size = 32;
  double proximal_mu = 0.0;
  const PartitionedModel* proximal_anchor = nullptr;
};

struct TrainResult {
  PartitionedModel model;
  double virtual_time = 0.0;
};

inline TrainResult local_train(ClientState& client, const Dataset& data, PartitionedModel model, int updates,
                               TrainMode mode, const LocalTrainingOptions& opts) {
  if (updates < 0) throw std::invalid_argument("local_train: negative update count");
  const bool prox = opts.proximal_mu != 0.0 && opts.proximal_anchor != nullptr;
  for (int step = 0; step < updates; ++step) {
    const auto idx = client.sampler.next(opts.batch_size);
    const Batch batch = data.gather(idx);
    Gradients g = mode == TrainMode::Full ? backward_full(model, batch) : backward_frozen(model, batch);
    if (prox) add_proximal_gradient(g, model, *opts.proximal_anchor, opts.proximal_mu);
    model = sgd_step(std::move(model), g, opts.learning_rate);
  }
  const double per_batch = mode == TrainMode::Full ? client.timings.total() : client.timings.classifier_part();
  return {std::move(model), updates * per_batch};
}

struct OffloadResult {
  FeatureBlock feature;
  double virtual_time = 0.0;
};

// Trains a weak client's frozen feature block on the strong client's data.
// The forward pass uses the weak client's classifier snapshot, which is never
// updated here; the strong client's own model is not touched.
inline OffloadResult execute_offloaded(ClientState& strong, const Dataset& data, FeatureBlock block,
                                       const ClassifierBlock& snapshot, int updates, const LocalTrainingOptions& opts) {
  if (updates < 0) throw std::invalid_argument("execute_offloaded: negative update count");
  for (int step = 0; step < updates; ++step) {
    const auto idx = strong.sampler.next(opts.batch_size);
    const Batch batch = data.gather(idx);
    const Gradients g = backward_full(merge(block, snapshot), batch);
    block = sgd_step(std::move(block), *g.feature, opts.learning_rate);
  }
  return {std::move(block), updates * strong.timings.bf};
}

// ---------------------------------------------------------------------------
// Selection

inline std::vector<int> select_from(std::vector<int> pool, int count, int round, std::uint64_t seed) {
  if (count < 0 || count > static_cast<int>(pool.size())) {
    throw std::invalid_argument("cannot select " + std::to_string(count) + " of " + std::to_string(pool.size()) +
                                " clients");
  }
  std::mt19937_64 rng(derive_seed(seed, {stream::kSelection, static_cast<std::uint64_t>(round)}));
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline std::vector<int> select_clients(int num_clients, int count, int round, std::uint64_t seed) {
  if (num_clients < 0) throw std::invalid_argument("negative client count");
  std::vector<int> all(static_cast<std::size_t>(num_clients));
  std::iota(all.begin(), all.end(), 0);
  return select_from(std::move(all), count, round, seed);
}

// ---------------------------------------------------------------------------
// Traces

struct ClientRoundRecord {
  int client = 0;
  double completion = 0.0;   // seconds after round start at which its contribution was complete
  int full_batches = 0;      // four-phase batches run locally
  int frozen_batches = 0;    // classifier-only batches run locally
  int offloaded_batches = 0; // feature-block batches run for it by a helper
  int helper = -1;           // strong client that trained its feature block
  bool dropped = false;
  double weight = 0.0;       // n_k
};

struct RoundTrace {
  int round = 0;
  double start_time = 0.0;
  double duration = 0.0;
  double accuracy = 0.0;
  std::vector<ClientRoundRecord> clients;
  std::vector<int> dropped;
  std::optional<OffloadSchedule> schedule;
  double aggregated_weight = 0.0;  // sum of n_k actually averaged

  [[nodiscard]] int num_offloads() const { return schedule ? static_cast<int>(schedule->assignments.size()) : 0; }
};

struct ExperimentSummary {
  int rounds = 0;
  double total_time = 0.0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  double mean_duration = 0.0;
  double sd_duration = 0.0;
  double median_duration = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline ExperimentSummary summarize(std::span<const RoundTrace> traces) {
  ExperimentSummary s;
  s.rounds = static_cast<int>(traces.size());
  if (traces.empty()) return s;
  std::vector<double> durations;
  for (const auto& t : traces) {
    durations.push_back(t.duration);
    s.total_time += t.duration;
    s.best_accuracy = std::max(s.best_accuracy, t.accuracy);
  }
  s.final_accuracy = traces.back().accuracy;
  s.mean_duration = s.total_time / static_cast<double>(traces.size());
  double var = 0.0;
  for (double d : durations) var += (d - s.mean_duration) * (d - s.mean_duration);
  s.sd_duration = std::sqrt(var / static_cast<double>(traces.size()));
  s.median_duration = median(durations);
  return s;
}

struct ExperimentResult {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<RoundTrace> traces;
  ExperimentSummary summary;
};

// ---------------------------------------------------------------------------
// Engine

class Simulation {
 public:
  Simulation(SimulationConfig config, StrategyConfig strategy, std::uint64_t seed)
      : config_(std::move(config)), strategy_(std::move(strategy)), seed_(seed) {
    auto errors = validate(config_);
    for (auto& e : validate(strategy_, config_.local_updates)) errors.push_back("strategy." + e);
    if (!errors.empty()) {
      std::string msg = "invalid simulation config:";
      for (const auto& e : errors) msg += "\n  " + e;
      throw std::invalid_argument(msg);
    }
    setup();
  }

  [[nodiscard]] const PartitionedModel& global_model() const { return global_; }
  [[nodiscard]] double clock() const { return clock_; }
  [[nodiscard]] const std::vector<ClientState>& clients() const { return clients_; }
  [[nodiscard]] const Dataset& dataset() const { return dataset_; }
  [[nodiscard]] const StrategyConfig& strategy() const { return strategy_; }
  [[nodiscard]] const std::optional<SimilarityMatrix>& similarity() const { return similarity_; }
  [[nodiscard]] const std::vector<std::vector<int>>& tiers() const { return tiers_; }

  [[nodiscard]] std::vector<int> selection_for(int round) const {
    if (const auto* t = strategy_.as<TiflStrategy>()) {
      const auto& tier = tiers_[static_cast<std::size_t>(round % t->num_tiers)];
      return select_from(tier, std::min<int>(config_.clients_per_round, static_cast<int>(tier.size())), round, seed_);
    }
    return select_clients(config_.num_clients, config_.clients_per_round, round, seed_);
  }

  RoundTrace run_round(int round);

  ExperimentResult run(int rounds) {
    ExperimentResult out;
    out.strategy = strategy_.name;
    out.seed = seed_;
    for (int r = 0; r < rounds; ++r) out.traces.push_back(run_round(r));
    out.summary = summarize(out.traces);
    return out;
  }

 private:
  struct Participant {
    ClientState* state = nullptr;
    PartitionedModel model;
    int full = 0;
    int frozen = 0;
    double report_time = 0.0;
    std::optional<OffloadAssignment> as_weak;
    std::optional<int> hosts_weak;  // weak client whose block this one will train
    int handoff_index = 0;
    PartitionedModel snapshot;  // weak model at handoff
    std::optional<FeatureBlock> offloaded_feature;  // weak's block trained by its helper
    double own_submit = -1.0;
    double offload_submit = -1.0;
    bool own_done = false;
    bool offload_done = false;
  };

  void setup() {
    dataset_ = generate_synthetic(SyntheticSpec{config_.dataset.num_classes, config_.dataset.samples_per_class,
                                                config_.dataset.input_dim, config_.dataset.noise, seed_});
    test_batch_ = dataset_.test_batch();
    PartitionSpec ps;
    ps.num_clients = config_.num_clients;
    ps.mode = config_.partition_mode;
    ps.samples_per_client = config_.samples_per_client;
    ps.size_weights = config_.size_weights;
    ps.seed = seed_;
    auto parts = partition(dataset_, ps);

    std::vector<double> speeds = config_.speeds.fixed;
    if (speeds.empty()) {
      std::mt19937_64 rng(derive_seed(seed_, {stream::kSpeeds}));
      std::uniform_real_distribution<double> dist(config_.speeds.low, config_.speeds.high);
      for (int k = 0; k < config_.num_clients; ++k) {
        speeds.push_back(config_.speeds.low == config_.speeds.high ? config_.speeds.low : dist(rng));
      }
    }
    global_ = make_model(config_.dataset.input_dim, config_.hidden_dim, config_.dataset.num_classes,
                         derive_seed(seed_, {stream::kModelInit}));
    for (int k = 0; k < config_.num_clients; ++k) {
      ClientState c;
      c.id = k;
      c.speed = speeds[static_cast<std::size_t>(k)];
      c.timings = ground_truth_timings(config_.base_profile, c.speed);
      c.partition = std::move(parts[static_cast<std::size_t>(k)]);
      c.sampler = BatchSampler(c.partition.sample_indices,
                               derive_seed(seed_, {stream::kClientBatches, static_cast<std::uint64_t>(k)}));
      c.model = global_;
      clients_.push_back(std::move(c));
    }

    if (strategy_.as<AergiaStrategy>()) {
      std::vector<int> ids(clients_.size());
      std::iota(ids.begin(), ids.end(), 0);
      SimilarityOracle oracle(config_.dataset.num_classes, ids);
      for (const auto& c : clients_) {
        oracle.submit({c.id, std::vector<std::int64_t>(c.partition.class_counts.begin(), c.partition.class_counts.end())});
      }
      similarity_ = oracle.compute_matrix();
    }
    if (const auto* t = strategy_.as<TiflStrategy>()) {
      std::vector<int> order(clients_.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [this](int a, int b) {
        return clients_[static_cast<std::size_t>(a)].timings.total() < clients_[static_cast<std::size_t>(b)].timings.total();
      });
      const int tiers = std::min(t->num_tiers, config_.num_clients);
      std::vector<double> equal(static_cast<std::size_t>(tiers), 1.0);
      const auto sizes = detail::apportion(config_.num_clients, equal);
      std::size_t pos = 0;
      for (int tier = 0; tier < t->num_tiers; ++tier) {
        std::vector<int> members;
        const int sz = tier < tiers ? sizes[static_cast<std::size_t>(tier)] : 0;
        for (int i = 0; i < sz; ++i) members.push_back(order[pos++]);
        std::sort(members.begin(), members.end());
        if (members.empty()) members = tiers_.back();  // more tiers than clients: reuse the last
        tiers_.push_back(std::move(members));
      }
    }
  }

  [[nodiscard]] LocalTrainingOptions training_options() const {
    LocalTrainingOptions o;
    o.learning_rate = config_.learning_rate;
    o.batch_size = config_.batch_size;
    if (const auto* p = strategy_.as<FedProxStrategy>()) {
      o.proximal_mu = p->mu;
      o.proximal_anchor = &round_anchor_;
    }
    return o;
  }

  void train(Participant& p, int updates, TrainMode mode) {
    auto res = local_train(*p.state, dataset_, std::move(p.model), updates, mode, training_options());
    p.model = std::move(res.model);
    (mode == TrainMode::Full ? p.full : p.frozen) += updates;
  }

  SimulationConfig config_;
  StrategyConfig strategy_;
  std::uint64_t seed_;
  Dataset dataset_;
  Batch test_batch_;
  std::vector<ClientState> clients_;
  std::optional<SimilarityMatrix> similarity_;
  std::vector<std::vector<int>> tiers_;
  PartitionedModel global_;
  PartitionedModel round_anchor_;
  EventQueue queue_;
  double clock_ = 0.0;
};

inline RoundTrace Simulation::run_round(int round) {
  const double t0 = clock_;
  const int budget = config_.local_updates;
  const auto* aergia = strategy_.as<AergiaStrategy>();
  const auto* deadline_cfg = strategy_.as<DeadlineStrategy>();
  const std::vector<int> selected = selection_for(round);

  round_anchor_ = global_;
  std::map<int, Participant> part;
  for (int id : selected) {
    Participant p;
    p.state = &clients_[static_cast<std::size_t>(id)];
    p.model = global_;
    part.emplace(id, std::move(p));
  }

  RoundTrace trace;
  trace.round = round;
  trace.start_time = t0;

  // Deadline: the federator knows each client's estimate up front and stops
  // waiting once every client expected within the deadline has reported.
  double deadline = std::numeric_limits<double>::infinity();
  std::vector<int> expected = selected;
  if (deadline_cfg) {
    double mean_est = 0.0;
    for (int id : selected) mean_est += budget * part.at(id).state->timings.total();
    mean_est /= static_cast<double>(selected.size());
    deadline = deadline_cfg->multiplier * mean_est;
    expected.clear();
    for (int id : selected) {
      if (budget * part.at(id).state->timings.total() <= deadline) expected.push_back(id);
    }
  }

  std::vector<ClientProfile> reports;
  std::optional<OffloadSchedule> schedule;
  bool ended = false;

  auto push = [&](double time, EventType type, int client, SubmitKind kind = SubmitKind::Full, int weak = -1) {
    queue_.push(Event{time, 0, round, type, client, kind, weak});
  };

  auto contribution_complete = [&](const Participant& p) {
    return p.as_weak ? (p.own_done && p.offload_done) : p.own_done;
  };
  auto maybe_end = [&]() {
    for (int id : expected) {
      if (!contribution_complete(part.at(id))) return;
    }
    push(queue_.now(), EventType::RoundEnd, -1);
  };

  push(t0, EventType::RoundStart, -1);
  if (deadline_cfg && expected.empty()) push(t0 + deadline, EventType::RoundEnd, -1);

  while (!ended) {
    const Event ev = queue_.pop();
    if (ev.round != round) continue;  // late message from an earlier round
    const double now = ev.time;

    switch (ev.type) {
      case EventType::RoundStart: {
        for (auto& [id, p] : part) {
          if (aergia) {
            push(t0 + aergia->profile_batches * p.state->timings.total(), EventType::ProfileReport, id);
          } else {
            push(t0 + budget * p.state->timings.total(), EventType::ModelSubmit, id);
          }
        }
        break;
      }
      case EventType::ProfileReport: {
        auto& p = part.at(ev.client);
        train(p, aergia->profile_batches, TrainMode::Full);
        p.report_time = now;
        MeasureSpec ms;
        ms.profiled_batches = aergia->profile_batches;
        ms.total_updates = budget;
        ms.noise = aergia->profile_noise;
        ms.seed = derive_seed(seed_, {stream::kProfiler, static_cast<std::uint64_t>(round)});
        reports.push_back(measure(ev.client, p.state->timings, ms));
        // Keeps training all four phases until told otherwise.
        push(now + (budget - aergia->profile_batches) * p.state->timings.total(), EventType::ModelSubmit, ev.client);
        if (reports.size() == part.size()) push(now + config_.dispatch_latency, EventType::ScheduleDispatch, -1);
        break;
      }
      case EventType::ScheduleDispatch: {
        const int after_profile = budget - aergia->profile_batches;
        for (auto& r : reports) {
          const auto& p = part.at(r.client_id);
          const double t = p.state->timings.total();
          int started = 0;
          while (started < after_profile && p.report_time + started * t < now) ++started;
          r.remaining_updates = after_profile - started;
        }
        std::sort(reports.begin(), reports.end(),
                  [](const ClientProfile& a, const ClientProfile& b) { return a.client_id < b.client_id; });
        std::vector<int> ids;
        for (const auto& r : reports) ids.push_back(r.client_id);
        std::vector<std::size_t> sub;
        for (int id : ids) sub.push_back(similarity_->index_of(id));
        std::vector<double> vals;
        for (auto i : sub) {
          for (auto j : sub) vals.push_back(similarity_->at_index(i, j));
        }
        schedule = build_schedule(reports, SimilarityMatrix(ids, std::move(vals)), aergia->similarity_factor, round);
        for (const auto& a : schedule->assignments) {
          auto& weak = part.at(a.weak_client);
          weak.as_weak = a;
          weak.handoff_index = budget - a.offload_point;
          part.at(a.strong_client).hosts_weak = a.weak_client;
          const double t = weak.state->timings.total();
          const double handoff = weak.report_time + (weak.handoff_index - aergia->profile_batches) * t;
          push(std::max(handoff, now), EventType::OffloadHandoff, a.weak_client);
        }
        break;
      }
      case EventType::OffloadHandoff: {
        auto& weak = part.at(ev.client);
        const int d = weak.as_weak->offload_point;
        train(weak, weak.handoff_index - weak.full, TrainMode::Full);
        weak.snapshot = weak.model;
        push(now + d * weak.state->timings.classifier_part(), EventType::ModelSubmit, ev.client, SubmitKind::Frozen);
        auto& strong = part.at(weak.as_weak->strong_client);
        const double own_finish = strong.report_time + (budget - aergia->profile_batches) * strong.state->timings.total();
        const double start = std::max(own_finish, now + config_.transfer_latency);
        push(start + d * strong.state->timings.bf, EventType::ModelSubmit, strong.state->id, SubmitKind::Offloaded,
             ev.client);
        break;
      }
      case EventType::ModelSubmit: {
        if (ev.submit == SubmitKind::Offloaded) {
          auto& strong = part.at(ev.client);
          auto& weak = part.at(ev.weak_client);
          auto res = execute_offloaded(*strong.state, dataset_, weak.snapshot.feature, weak.snapshot.classifier,
                                       weak.as_weak->offload_point, training_options());
          weak.offloaded_feature = std::move(res.feature);
          weak.offload_submit = now - t0;
          weak.offload_done = true;
          maybe_end();
          break;
        }
        auto& p = part.at(ev.client);
        if (ev.submit == SubmitKind::Frozen) {
          train(p, p.as_weak->offload_point, TrainMode::Frozen);
        } else if (p.as_weak) {
          break;  // full-training finish superseded by the offloading plan
        } else {
          train(p, budget - p.full, TrainMode::Full);
        }
        p.own_submit = now - t0;
        p.own_done = true;
        maybe_end();
        break;
      }
      case EventType::RoundEnd:
        ended = true;
        break;
    }
  }

  // Aggregation.
  std::vector<PartitionedModel> models;
  std::vector<double> weights;
  std::vector<int> steps;
  double last = 0.0;
  for (auto& [id, p] : part) {
    ClientRoundRecord rec;
    rec.client = id;
    rec.weight = p.state->weight();
    rec.full_batches = p.full;
    rec.frozen_batches = p.frozen;
    const bool on_time = std::find(expected.begin(), expected.end(), id) != expected.end() && contribution_complete(p);
    rec.completion = p.as_weak ? std::max(p.own_submit, p.offload_submit) : p.own_submit;
    if (!on_time) {
      rec.dropped = true;
      rec.completion = budget * p.state->timings.total();
      trace.dropped.push_back(id);
      trace.clients.push_back(rec);
      continue;
    }
    if (p.as_weak) {
      rec.helper = p.as_weak->strong_client;
      rec.offloaded_batches = p.as_weak->offload_point;
      models.push_back(recombine(*p.offloaded_feature, p.model.classifier));
    } else {
      models.push_back(p.model);
    }
    weights.push_back(rec.weight);
    steps.push_back(p.full + p.frozen);
    last = std::max(last, rec.completion);
    trace.clients.push_back(rec);
  }

  if (!models.empty()) {
    global_ = strategy_.as<FedNovaStrategy>() ? aggregate_fednova(global_, models, weights, steps)
                                              : aggregate_fedavg(models, weights);
    trace.aggregated_weight = std::accumulate(weights.begin(), weights.end(), 0.0);
    trace.duration = last;
  } else {
    trace.duration = deadline;
  }
  trace.schedule = std::move(schedule);
  trace.accuracy = test_batch_.size() > 0 ? accuracy(global_, test_batch_) : 0.0;
  clock_ = t0 + trace.duration;
  for (auto& [id, p] : part) p.state->model = p.model;
  return trace;
}

inline ExperimentResult run_experiment(const SimulationConfig& config, const StrategyConfig& strategy,
                                       std::uint64_t seed) {
  Simulation sim(config, strategy, seed);
  return sim.run(config.rounds);
}

}  // namespace aergia
