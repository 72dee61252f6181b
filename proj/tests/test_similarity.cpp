#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "support.hpp"

using namespace aergia;

TEST(Histogram, HandExamples) {
  using V = std::vector<std::int64_t>;
  EXPECT_DOUBLE_EQ(histogram_distance(V{5, 0, 0}, V{0, 7, 0}), 2.0);
  EXPECT_DOUBLE_EQ(histogram_distance(V{2, 3, 4}, V{2, 3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(histogram_distance(V{3, 1, 0, 0}, V{1, 1, 1, 1}), 1.0);
  EXPECT_THROW(histogram_distance(V{1, 2}, V{1, 2, 3}), std::invalid_argument);
}

TEST(Histogram, MatchesNaiveWithinGrid) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> count(0, 40);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::int64_t> a(6), b(6);
    for (auto& v : a) v = count(rng);
    for (auto& v : b) v = count(rng);
    a[0] += 1;
    b[1] += 1;
    double ta = 0.0, tb = 0.0, naive = 0.0;
    for (int c = 0; c < 6; ++c) {
      ta += static_cast<double>(a[c]);
      tb += static_cast<double>(b[c]);
    }
    for (int c = 0; c < 6; ++c) naive += std::abs(static_cast<double>(a[c]) / ta - static_cast<double>(b[c]) / tb);
    const double d = histogram_distance(a, b);
    EXPECT_NEAR(d, naive, 1e-13);
    EXPECT_EQ(d, histogram_distance(b, a));
  }
  using V = std::vector<std::int64_t>;
  EXPECT_THROW(histogram_distance(V{-1, 2}, V{1, 2}), std::invalid_argument);
  EXPECT_THROW(histogram_distance(V{0, 0}, V{1, 2}), std::invalid_argument);
}

TEST(Oracle, SubmissionContract) {
  SimilarityOracle o(3, {4, 7});
  const auto r = o.submit({4, {1, 2, 3}});
  EXPECT_EQ(r.client_id, 4);
  EXPECT_THROW(o.submit({4, {1, 1, 1}}), std::invalid_argument);
  EXPECT_THROW(o.submit({7, {0, 0, 0}}), std::invalid_argument);
  EXPECT_THROW(o.submit({7, {1, -1, 3}}), std::invalid_argument);
  EXPECT_THROW(o.submit({7, {1, 2}}), std::invalid_argument);
  EXPECT_THROW(o.submit({9, {1, 2, 3}}), std::invalid_argument);
  EXPECT_THROW((void)o.compute_matrix(), std::runtime_error);
  o.submit({7, {3, 2, 1}});
  const auto s = o.compute_matrix();
  EXPECT_DOUBLE_EQ(s(4, 7), histogram_distance(std::vector<std::int64_t>{1, 2, 3}, std::vector<std::int64_t>{3, 2, 1}));
  EXPECT_DOUBLE_EQ(s(4, 4), 0.0);
}

TEST(Oracle, ConcurrentSubmissions) {
  std::vector<int> ids(32);
  std::iota(ids.begin(), ids.end(), 0);
  SimilarityOracle o(4, ids);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&o, t] {
      for (int id = t; id < 32; id += 4) o.submit({id, {id + 1, 1, 2, 3}});
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(o.compute_matrix().size(), 32u);
}

TEST(Oracle, MatrixProperties) {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 8);
    const int c = 1 + static_cast<int>(rng() % 10);
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    SimilarityOracle o(c, ids);
    std::vector<std::vector<std::int64_t>> counts;
    for (int id = 0; id < n; ++id) {
      std::vector<std::int64_t> v(static_cast<std::size_t>(c));
      do {
        for (auto& x : v) x = static_cast<std::int64_t>(rng() % 5);
      } while (std::accumulate(v.begin(), v.end(), std::int64_t{0}) == 0);
      counts.push_back(v);
      o.submit({id, v});
    }
    const auto s = o.compute_matrix();
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(s(i, i), 0.0);
      for (int j = 0; j < n; ++j) {
        EXPECT_EQ(s(i, j), s(j, i));
        EXPECT_GE(s(i, j), 0.0);
        EXPECT_LE(s(i, j), 2.0);
        for (int k = 0; k < n; ++k) EXPECT_LE(s(i, k), s(i, j) + s(j, k));
      }
    }
    auto scaled = counts[0];
    for (auto& x : scaled) x *= 7;
    for (int j = 1; j < n; ++j) {
      EXPECT_EQ(histogram_distance(scaled, counts[static_cast<std::size_t>(j)]), s(0, j));
    }
  }
}
