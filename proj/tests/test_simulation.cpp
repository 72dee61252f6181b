#include <gtest/gtest.h>

#include "support.hpp"

using namespace aergia;
using aergia::testing::small_config;

namespace {

ClientState make_client(const Dataset& ds, std::vector<std::size_t> idx, PhaseTimings t, std::uint64_t seed) {
  ClientState c;
  c.timings = t;
  c.partition.sample_indices = idx;
  c.sampler = BatchSampler(std::move(idx), seed);
  c.model = make_model(ds.inputs.cols(), 5, ds.num_classes, 1);
  return c;
}

void expect_same_traces(const ExperimentResult& a, const ExperimentResult& b) {
  ASSERT_EQ(a.traces.size(), b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    EXPECT_EQ(a.traces[i].duration, b.traces[i].duration) << "round " << i;
    EXPECT_EQ(a.traces[i].accuracy, b.traces[i].accuracy) << "round " << i;
    EXPECT_EQ(a.traces[i].dropped, b.traces[i].dropped) << "round " << i;
  }
}

}  // namespace

TEST(LocalTrain, TimeAndFreezing) {
  const auto ds = generate_synthetic({3, 40, 2, 0.4, 1});
  const PhaseTimings t{0.5, 0.5, 0.5, 0.5};
  auto c = make_client(ds, ds.train_indices, t, 3);
  const LocalTrainingOptions opts{0.1, 8, 0.0, nullptr};

  auto r0 = local_train(c, ds, c.model, 0, TrainMode::Full, opts);
  EXPECT_TRUE(r0.model == c.model);
  EXPECT_EQ(r0.virtual_time, 0.0);

  auto full = local_train(c, ds, c.model, 10, TrainMode::Full, opts);
  EXPECT_EQ(full.virtual_time, 20.0);
  EXPECT_FALSE(full.model.feature == c.model.feature);

  auto frozen = local_train(c, ds, c.model, 10, TrainMode::Frozen, opts);
  EXPECT_EQ(frozen.virtual_time, 15.0);
  EXPECT_TRUE(frozen.model.feature == c.model.feature);
  EXPECT_FALSE(frozen.model.classifier == c.model.classifier);
}

TEST(ExecuteOffloaded, ArithmeticAndEquivalence) {
  const auto ds = generate_synthetic({3, 40, 2, 0.4, 2});
  const PhaseTimings t{0.1, 0.1, 0.1, 0.5};
  const LocalTrainingOptions opts{0.2, 6, 0.0, nullptr};
  auto strong = make_client(ds, ds.train_indices, t, 9);
  const auto weak_model = make_model(2, 5, 3, 4);

  auto none = execute_offloaded(strong, ds, weak_model.feature, weak_model.classifier, 0, opts);
  EXPECT_TRUE(none.feature == weak_model.feature);
  EXPECT_EQ(none.virtual_time, 0.0);

  auto res = execute_offloaded(strong, ds, weak_model.feature, weak_model.classifier, 10, opts);
  EXPECT_EQ(res.virtual_time, 5.0);

  // The weak client training only its feature block on the same batch order.
  BatchSampler replay(ds.train_indices, 9);
  FeatureBlock block = weak_model.feature;
  for (int i = 0; i < 10; ++i) {
    const auto g = backward_full(merge(block, weak_model.classifier), ds.gather(replay.next(6)));
    block = sgd_step(block, *g.feature, 0.2);
  }
  EXPECT_TRUE(res.feature == block);
}

TEST(Selection, Contract) {
  EXPECT_EQ(select_clients(5, 5, 3, 1), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(select_clients(24, 3, 7, 11), select_clients(24, 3, 7, 11));
  const auto s = select_clients(24, 3, 7, 11);
  EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), 3u);
  for (int id : s) EXPECT_TRUE(id >= 0 && id < 24);
  EXPECT_THROW(select_clients(3, 4, 0, 1), std::invalid_argument);
}

TEST(Engine, EqualSpeedsAergiaMatchesFedAvg) {
  const auto cfg = small_config({0.5, 0.5, 0.5, 0.5}, 3);
  const auto fedavg = run_experiment(cfg, StrategyConfig(FedAvgStrategy{}, "fedavg"), 4);
  const auto aergia = run_experiment(cfg, StrategyConfig(AergiaStrategy{}, "aergia"), 4);
  ASSERT_EQ(fedavg.traces.size(), aergia.traces.size());
  for (std::size_t i = 0; i < fedavg.traces.size(); ++i) {
    EXPECT_EQ(aergia.traces[i].num_offloads(), 0);
    EXPECT_DOUBLE_EQ(aergia.traces[i].duration, fedavg.traces[i].duration);
    EXPECT_EQ(aergia.traces[i].accuracy, fedavg.traces[i].accuracy);
  }
}

TEST(Engine, TwoClientHandTrace) {
  auto cfg = small_config({1.0, 0.25}, 1);
  cfg.local_updates = 16;
  cfg.base_profile = PhaseTimings{0.15, 0.1, 0.15, 0.6};
  AergiaStrategy a;
  a.profile_batches = 2;
  const auto fedavg = run_experiment(cfg, StrategyConfig(FedAvgStrategy{}, "fedavg"), 1);
  const auto aergia = run_experiment(cfg, StrategyConfig(a, "aergia"), 1);
  EXPECT_DOUBLE_EQ(fedavg.traces[0].duration, 64.0);
  const auto& t = aergia.traces[0];
  ASSERT_EQ(t.num_offloads(), 1);
  EXPECT_EQ(t.schedule->assignments[0].weak_client, 1);
  EXPECT_EQ(t.schedule->assignments[0].offload_point, 8);
  EXPECT_NEAR(t.duration, 44.8, 1e-9);
  EXPECT_LT(t.duration, 64.0);
}

TEST(Engine, ConservationAndBookkeeping) {
  auto cfg = small_config({1.0, 0.9, 0.3, 0.12, 0.8, 0.2}, 6);
  cfg.clients_per_round = 4;
  const auto r = run_experiment(cfg, StrategyConfig(AergiaStrategy{}, "aergia"), 5);
  int offloads = 0;
  double clock = 0.0;
  for (const auto& t : r.traces) {
    EXPECT_EQ(t.start_time, clock);
    clock = t.start_time + t.duration;
    double latest = 0.0;
    double weight = 0.0;
    for (const auto& c : t.clients) {
      EXPECT_EQ(c.full_batches + c.frozen_batches, cfg.local_updates);
      if (c.helper >= 0) {
        ++offloads;
        EXPECT_EQ(c.offloaded_batches, c.frozen_batches);
        EXPECT_EQ(c.offloaded_batches, t.schedule->for_weak(c.client)->offload_point);
      } else {
        EXPECT_EQ(c.frozen_batches, 0);
      }
      latest = std::max(latest, c.completion);
      weight += c.weight;
    }
    EXPECT_EQ(t.duration, latest);
    EXPECT_EQ(t.aggregated_weight, weight);
  }
  EXPECT_GT(offloads, 0);
}

TEST(Engine, DeadlineDropsSlowClients) {
  auto cfg = small_config({1.0, 0.5, 0.1}, 3);
  const auto r = run_experiment(cfg, StrategyConfig(DeadlineStrategy{0.5}, "deadline"), 2);
  for (const auto& t : r.traces) {
    EXPECT_EQ(t.dropped, (std::vector<int>{2}));
    double kept = 0.0;
    for (const auto& c : t.clients) {
      if (!c.dropped) kept += c.weight;
    }
    EXPECT_EQ(t.aggregated_weight, kept);
    EXPECT_DOUBLE_EQ(t.duration, cfg.local_updates * ground_truth_timings(cfg.base_profile, 0.5).total());
  }
}

TEST(Engine, DeadlineWithNobodyOnTime) {
  auto cfg = small_config({0.5, 0.5}, 2);
  const auto r = run_experiment(cfg, StrategyConfig(DeadlineStrategy{0.5}, "deadline"), 2);
  const double est = cfg.local_updates * ground_truth_timings(cfg.base_profile, 0.5).total();
  for (const auto& t : r.traces) {
    EXPECT_EQ(t.dropped.size(), 2u);
    EXPECT_DOUBLE_EQ(t.duration, 0.5 * est);
  }
  EXPECT_EQ(r.traces[0].accuracy, r.traces[1].accuracy);
}

TEST(Engine, FedProxZeroIsFedAvg) {
  auto cfg = small_config({1.0, 0.4, 0.7}, 5);
  const auto a = run_experiment(cfg, StrategyConfig(FedAvgStrategy{}, "a"), 8);
  const auto b = run_experiment(cfg, StrategyConfig(FedProxStrategy{0.0}, "b"), 8);
  expect_same_traces(a, b);
  Simulation sa(cfg, StrategyConfig(FedAvgStrategy{}, "a"), 8);
  Simulation sc(cfg, StrategyConfig(FedProxStrategy{0.5}, "c"), 8);
  sa.run(2);
  sc.run(2);
  EXPECT_FALSE(sa.global_model() == sc.global_model());
}

TEST(Engine, FedNovaUniformStepsIsFedAvg) {
  auto cfg = small_config({1.0, 0.4, 0.7}, 4);
  Simulation a(cfg, StrategyConfig(FedAvgStrategy{}, "a"), 3);
  Simulation b(cfg, StrategyConfig(FedNovaStrategy{}, "b"), 3);
  a.run(4);
  b.run(4);
  EXPECT_TRUE(a.global_model() == b.global_model());
}

TEST(Engine, TiflTiersBySpeed) {
  auto cfg = small_config({0.3, 1.0, 0.1, 0.9, 0.5, 0.2}, 6);
  cfg.clients_per_round = 2;
  Simulation sim(cfg, StrategyConfig(TiflStrategy{3}, "tifl"), 1);
  ASSERT_EQ(sim.tiers().size(), 3u);
  EXPECT_EQ(sim.tiers()[0], (std::vector<int>{1, 3}));
  EXPECT_EQ(sim.tiers()[1], (std::vector<int>{0, 4}));
  EXPECT_EQ(sim.tiers()[2], (std::vector<int>{2, 5}));
  for (int r = 0; r < 6; ++r) EXPECT_EQ(sim.selection_for(r), sim.tiers()[static_cast<std::size_t>(r % 3)]);
}

TEST(Engine, DeterministicAndEmpty) {
  const auto cfg = small_config({1.0, 0.3, 0.6, 0.15}, 4);
  for (const auto& s : {StrategyConfig(AergiaStrategy{}, "x"), StrategyConfig(DeadlineStrategy{}, "x"),
                        StrategyConfig(TiflStrategy{2}, "x"), StrategyConfig(FedNovaStrategy{}, "x")}) {
    expect_same_traces(run_experiment(cfg, s, 21), run_experiment(cfg, s, 21));
  }
  auto zero = cfg;
  zero.rounds = 0;
  const auto r = run_experiment(zero, StrategyConfig(FedAvgStrategy{}, "x"), 1);
  EXPECT_TRUE(r.traces.empty());
  EXPECT_EQ(r.summary.total_time, 0.0);
}

TEST(Engine, RejectsInvalidConfig) {
  auto cfg = small_config({1.0, 0.5}, 1);
  cfg.clients_per_round = 3;
  EXPECT_THROW(Simulation(cfg, StrategyConfig(FedAvgStrategy{}, "x"), 1), std::invalid_argument);
  cfg = small_config({1.0, 0.5}, 1);
  AergiaStrategy a;
  a.profile_batches = 0;
  EXPECT_THROW(Simulation(cfg, StrategyConfig(a, "x"), 1), std::invalid_argument);
}

TEST(EventQueueTest, OrderAndPastEvents) {
  EventQueue q;
  q.push({2.0, 0, 0, EventType::ModelSubmit, 1});
  q.push({1.0, 0, 0, EventType::ModelSubmit, 2});
  q.push({1.0, 0, 0, EventType::ModelSubmit, 3});
  EXPECT_EQ(q.pop().client, 2);
  EXPECT_EQ(q.pop().client, 3);
  EXPECT_EQ(q.now(), 1.0);
  EXPECT_THROW(q.push({0.5, 0, 0, EventType::RoundEnd, -1}), std::logic_error);
  EXPECT_EQ(q.pop().client, 1);
  EXPECT_THROW(q.pop(), std::logic_error);
}

TEST(Summary, Statistics) {
  std::vector<RoundTrace> ts(4);
  const double d[] = {1.0, 3.0, 2.0, 6.0};
  const double acc[] = {0.2, 0.6, 0.5, 0.4};
  for (int i = 0; i < 4; ++i) {
    ts[static_cast<std::size_t>(i)].duration = d[i];
    ts[static_cast<std::size_t>(i)].accuracy = acc[i];
  }
  const auto s = summarize(ts);
  EXPECT_EQ(s.total_time, 12.0);
  EXPECT_EQ(s.mean_duration, 3.0);
  EXPECT_EQ(s.median_duration, 2.5);
  EXPECT_EQ(s.final_accuracy, 0.4);
  EXPECT_EQ(s.best_accuracy, 0.6);
  EXPECT_NEAR(s.sd_duration, std::sqrt(3.5), 1e-12);
}
