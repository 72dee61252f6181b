#include <gtest/gtest.h>

#include "support.hpp"

using namespace aergia;
using aergia::testing::profile;

TEST(CalcOp, HandExamples) {
  auto op = calc_op(4, 1, 1, 10, 10);
  EXPECT_DOUBLE_EQ(op.completion, 10.0);
  EXPECT_EQ(op.updates, 10);

  op = calc_op(5, 2, 3, 1, 1);
  EXPECT_DOUBLE_EQ(op.completion, 3.0);
  EXPECT_EQ(op.updates, 1);

  op = calc_op(2, 3, 5, 10, 10);
  EXPECT_DOUBLE_EQ(op.completion, 26.0);
  EXPECT_EQ(op.updates, 2);
}

TEST(CalcOp, Preconditions) {
  EXPECT_THROW(calc_op(0, 1, 1, 2, 2), std::invalid_argument);
  EXPECT_THROW(calc_op(1, 1, -1, 2, 2), std::invalid_argument);
  EXPECT_THROW(calc_op(1, 1, 1, 0, 2), std::invalid_argument);
}

TEST(CalcOp, MatchesExhaustiveScan) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> t(1e-3, 10.0);
  std::uniform_int_distribution<int> r(1, 200);
  for (int i = 0; i < 2000; ++i) {
    const double ta = t(rng), tb = t(rng), xb = t(rng);
    const int ra = r(rng), rb = r(rng);
    const auto got = calc_op(ta, tb, xb, ra, rb);
    if (aergia::testing::is_unimodal(ta, tb, xb, ra, rb)) {
      const auto want = aergia::testing::brute_force_op(ta, tb, xb, ra, rb);
      EXPECT_EQ(got.completion, want.completion);
      EXPECT_EQ(got.updates, want.updates);
    } else {
      EXPECT_TRUE(aergia::testing::is_local_min(got, ta, tb, xb, ra, rb));
    }
  }
}

TEST(Mct, Examples) {
  const std::vector<ClientProfile> two{profile(0, 2.0, 10), profile(1, 4.0, 10)};
  EXPECT_DOUBLE_EQ(mean_compute_time(two), 30.0);
  const std::vector<ClientProfile> one{profile(3, 1.5, 8)};
  EXPECT_DOUBLE_EQ(mean_compute_time(one), 12.0);
  const std::vector<ClientProfile> same{profile(0, 2.0, 5), profile(1, 2.0, 5), profile(2, 2.0, 5)};
  EXPECT_DOUBLE_EQ(mean_compute_time(same), 10.0);
  EXPECT_THROW(mean_compute_time({}), std::invalid_argument);
}

TEST(PartitionClients, SetsAndOrder) {
  const std::vector<ClientProfile> ps{profile(0, 1.0, 10), profile(1, 4.0, 10), profile(2, 4.0, 10),
                                      profile(3, 1.0, 10)};
  const double mct = mean_compute_time(ps);
  EXPECT_DOUBLE_EQ(mct, 25.0);
  const auto split = partition_clients(ps, mct);
  EXPECT_EQ(split.sending, (std::vector<int>{1, 2}));
  EXPECT_EQ(split.receiving, (std::vector<int>{0, 3}));

  const std::vector<ClientProfile> same{profile(0, 2.0, 5), profile(1, 2.0, 5)};
  EXPECT_TRUE(partition_clients(same, mean_compute_time(same)).sending.empty());

  const std::vector<ClientProfile> mixed{profile(5, 3.0, 10), profile(1, 9.0, 10), profile(2, 5.0, 10),
                                         profile(0, 0.5, 10), profile(4, 1.0, 10)};
  const auto s2 = partition_clients(mixed, mean_compute_time(mixed));
  EXPECT_EQ(s2.sending, (std::vector<int>{2, 1}));
  EXPECT_EQ(s2.receiving, (std::vector<int>{5, 4, 0}));
}

TEST(BuildSchedule, TwoWeakTwoStrong) {
  const std::vector<ClientProfile> ps{profile(0, 4.0, 10), profile(1, 4.0, 10), profile(2, 1.0, 10),
                                      profile(3, 1.0, 10)};
  const auto s = build_schedule(ps, SimilarityMatrix::zeros({0, 1, 2, 3}), 0.0);
  ASSERT_EQ(s.assignments.size(), 2u);
  EXPECT_EQ(s.assignments[0].weak_client, 0);
  EXPECT_EQ(s.assignments[0].strong_client, 2);
  EXPECT_EQ(s.assignments[1].weak_client, 1);
  EXPECT_EQ(s.assignments[1].strong_client, 3);
  const auto op = calc_op(ps[0].timings.total(), ps[2].timings.total(), ps[2].timings.bf, 10, 10);
  EXPECT_EQ(s.assignments[0].offload_point, op.updates);
  EXPECT_EQ(s.assignments[0].estimated_completion, op.completion);
  EXPECT_EQ(aergia::testing::schedule_violation(s, ps), "");
}

TEST(BuildSchedule, SimilarityBreaksTie) {
  const std::vector<ClientProfile> ps{profile(0, 4.0, 10), profile(1, 1.0, 10), profile(2, 1.0, 10)};
  const SimilarityMatrix sim({0, 1, 2}, {0, 2, 0, 2, 0, 1, 0, 1, 0});
  const auto s = build_schedule(ps, sim, 1.0);
  ASSERT_EQ(s.assignments.size(), 1u);
  EXPECT_EQ(s.assignments[0].strong_client, 2);
  EXPECT_DOUBLE_EQ(s.assignments[0].adjusted_cost, s.assignments[0].estimated_completion);
}

TEST(BuildSchedule, SkipsReceiversWithNothingLeft) {
  const std::vector<ClientProfile> ps{profile(0, 10.0, 10), profile(1, 1.0, 0), profile(2, 1.0, 3)};
  const auto s = build_schedule(ps, SimilarityMatrix::zeros({0, 1, 2}), 1.0);
  ASSERT_EQ(s.assignments.size(), 1u);
  EXPECT_EQ(s.assignments[0].strong_client, 2);
  EXPECT_LE(s.assignments[0].offload_point, 3);
}

TEST(BuildSchedule, RandomInvariantsAndOracle) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 47);
    const auto ps = aergia::testing::random_profiles(rng, n);
    const auto sim = aergia::testing::random_similarity(rng, ps);
    const double f = (rng() % 4 == 0) ? 0.0 : std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    const auto s = build_schedule(ps, sim, f);
    ASSERT_EQ(aergia::testing::schedule_violation(s, ps), "") << "trial " << trial;
    std::vector<std::pair<int, int>> got;
    for (const auto& a : s.assignments) got.emplace_back(a.weak_client, a.strong_client);
    EXPECT_EQ(got, aergia::testing::oracle_pairs(ps, sim, f)) << "trial " << trial;

    std::vector<int> ids;
    for (const auto& p : ps) ids.push_back(p.client_id);
    EXPECT_EQ(to_json(build_schedule(ps, sim, 0.0)), to_json(build_schedule(ps, SimilarityMatrix::zeros(ids), 0.0)));
  }
}

TEST(BuildSchedule, RejectsNegativeFactor) {
  const std::vector<ClientProfile> ps{profile(0, 1.0, 1)};
  EXPECT_THROW(build_schedule(ps, SimilarityMatrix::zeros({0}), -1.0), std::invalid_argument);
}
