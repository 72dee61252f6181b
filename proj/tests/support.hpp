#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <random>
#include <vector>

#include "aergia/aergia.hpp"

namespace aergia::testing {

inline Batch random_batch(int rows, int input_dim, int num_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, num_classes - 1);
  Batch b;
  b.inputs.resize(rows, input_dim);
  for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = g(rng);
  for (int i = 0; i < rows; ++i) b.labels.push_back(label(rng));
  return b;
}

inline double batch_loss(const PartitionedModel& m, const Batch& b) {
  return loss_cross_entropy(forward(m, b).probs, b.labels);
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / scale;
}

// Max relative error of `grad` against central differences of the loss with
// respect to the parameters selected by `pick`.
template <typename Pick>
double fd_check(const PartitionedModel& model, const Batch& batch, const DenseParams& grad, Pick pick,
                double step = 1e-5) {
  double worst = 0.0;
  auto probe = [&](auto index_param) {
    PartitionedModel plus = model;
    PartitionedModel minus = model;
    index_param(pick(plus)) += step;
    index_param(pick(minus)) -= step;
    return (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2.0 * step);
  };
  for (Eigen::Index i = 0; i < grad.weights.size(); ++i) {
    const double n = probe([i](DenseParams& p) -> double& { return p.weights.data()[i]; });
    worst = std::max(worst, relative_error(grad.weights.data()[i], n));
  }
  for (Eigen::Index i = 0; i < grad.bias.size(); ++i) {
    const double n = probe([i](DenseParams& p) -> double& { return p.bias[i]; });
    worst = std::max(worst, relative_error(grad.bias[i], n));
  }
  return worst;
}

inline double fd_check_full(const PartitionedModel& model, const Batch& batch) {
  const auto g = backward_full(model, batch);
  const double f = fd_check(model, batch, *g.feature, [](PartitionedModel& m) -> DenseParams& { return m.feature; });
  const double c =
      fd_check(model, batch, g.classifier, [](PartitionedModel& m) -> DenseParams& { return m.classifier; });
  return std::max(f, c);
}

inline PartitionedModel scalar_model(double value) {
  PartitionedModel m;
  m.feature.weights = Matrix::Constant(1, 1, value);
  m.feature.bias = Vector::Constant(1, value);
  m.classifier.weights = Matrix::Constant(1, 1, value);
  m.classifier.bias = Vector::Constant(1, value);
  return m;
}

inline ClientProfile profile(int id, double total_per_batch, int remaining, double bf_share = 0.65) {
  const double rest = total_per_batch * (1.0 - bf_share) / 3.0;
  return {id, PhaseTimings{rest, rest, rest, total_per_batch * bf_share}, remaining};
}

// Small simulation used by engine tests: fixed speeds, short rounds.
inline SimulationConfig small_config(std::vector<double> speeds, int rounds = 2) {
  SimulationConfig c;
  c.dataset = SyntheticSpec{4, 60, 2, 0.4, 0};
  c.num_clients = static_cast<int>(speeds.size());
  c.clients_per_round = c.num_clients;
  c.samples_per_client = 30;
  c.speeds.fixed = std::move(speeds);
  c.hidden_dim = 6;
  c.rounds = rounds;
  c.local_updates = 8;
  c.batch_size = 8;
  return c;
}

// Exhaustive scan; ties resolve to the largest d, matching the early exit
// walking across a plateau.
inline OffloadPoint brute_force_op(double t_a, double t_b, double x_b, int r_a, int r_b) {
  OffloadPoint best{std::numeric_limits<double>::infinity(), 0};
  for (int d = 1; d <= std::min(r_a, r_b); ++d) {
    const double c = offload_cost(t_a, t_b, x_b, r_a, r_b, d);
    if (c <= best.completion) best = {c, d};
  }
  return best;
}

inline bool is_unimodal(double t_a, double t_b, double x_b, int r_a, int r_b) {
  bool rising = false;
  for (int d = 2; d <= std::min(r_a, r_b); ++d) {
    const double prev = offload_cost(t_a, t_b, x_b, r_a, r_b, d - 1);
    const double cur = offload_cost(t_a, t_b, x_b, r_a, r_b, d);
    if (cur > prev) rising = true;
    if (rising && cur < prev) return false;
  }
  return true;
}

inline bool is_local_min(const OffloadPoint& op, double t_a, double t_b, double x_b, int r_a, int r_b) {
  auto cost = [&](int d) { return offload_cost(t_a, t_b, x_b, r_a, r_b, d); };
  const int last = std::min(r_a, r_b);
  if (op.updates < 1 || op.updates > last || op.completion != cost(op.updates)) return false;
  if (op.updates > 1 && cost(op.updates - 1) < op.completion) return false;
  if (op.updates < last && cost(op.updates + 1) < op.completion) return false;
  return op.completion <= cost(1);
}

inline std::vector<ClientProfile> random_profiles(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> phase(0.01, 2.0);
  std::uniform_int_distribution<int> ru(0, 40);
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<ClientProfile> out;
  for (int i = 0; i < n; ++i) {
    // Duplicate an earlier client now and then to exercise tie rules.
    if (i > 0 && rng() % 6 == 0) {
      auto copy = out[rng() % out.size()];
      copy.client_id = ids[static_cast<std::size_t>(i)];
      out.push_back(copy);
      continue;
    }
    out.push_back({ids[static_cast<std::size_t>(i)], PhaseTimings{phase(rng), phase(rng), phase(rng), phase(rng)},
                   ru(rng)});
  }
  return out;
}

inline SimilarityMatrix random_similarity(std::mt19937_64& rng, const std::vector<ClientProfile>& profiles) {
  std::vector<int> ids;
  for (const auto& p : profiles) ids.push_back(p.client_id);
  const auto n = ids.size();
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) v[i * n + j] = v[j * n + i] = u(rng);
  }
  return {ids, v};
}

// Empty string when every structural invariant holds, otherwise a description.
inline std::string schedule_violation(const OffloadSchedule& s, std::span<const ClientProfile> profiles) {
  std::map<int, const ClientProfile*> by_id;
  for (const auto& p : profiles) by_id[p.client_id] = &p;
  const double mct = mean_compute_time(profiles);
  if (s.mct != mct) return "mct differs from the mean estimate";
  std::set<int> sending(s.sending.begin(), s.sending.end());
  std::set<int> receiving(s.receiving.begin(), s.receiving.end());
  if (sending.size() != s.sending.size() || receiving.size() != s.receiving.size()) return "duplicate id in a set";
  if (sending.size() + receiving.size() != profiles.size()) return "sets do not cover the clients";
  for (const auto& [id, p] : by_id) {
    const bool weak = p->estimated_remaining() > mct;
    if (weak != (sending.count(id) > 0) || weak == (receiving.count(id) > 0)) return "client in the wrong set";
  }
  std::set<int> weak_used;
  std::set<int> strong_used;
  for (const auto& a : s.assignments) {
    if (!sending.count(a.weak_client) || !receiving.count(a.strong_client)) return "assignment outside its set";
    if (!weak_used.insert(a.weak_client).second) return "weak client assigned twice";
    if (!strong_used.insert(a.strong_client).second) return "receiver used twice";
    const int bound = std::min(by_id[a.weak_client]->remaining_updates, by_id[a.strong_client]->remaining_updates);
    if (a.offload_point < 1 || a.offload_point > bound) return "offload point out of bounds";
  }
  return {};
}

// Independent greedy over the same order with exhaustive offload-point scans.
inline std::vector<std::pair<int, int>> oracle_pairs(std::span<const ClientProfile> profiles,
                                                     const SimilarityMatrix& sim, double f) {
  std::map<int, const ClientProfile*> by_id;
  for (const auto& p : profiles) by_id[p.client_id] = &p;
  const auto split = partition_clients(profiles, mean_compute_time(profiles));
  std::vector<int> free = split.receiving;
  std::vector<std::pair<int, int>> out;
  for (int w : split.sending) {
    int best = -1;
    double best_cost = 0.0;
    for (int r : free) {
      const auto* a = by_id[w];
      const auto* b = by_id[r];
      if (a->remaining_updates < 1 || b->remaining_updates < 1) continue;
      const auto op = brute_force_op(a->timings.total(), b->timings.total(), b->timings.bf, a->remaining_updates,
                                     b->remaining_updates);
      const double cost = op.completion * (1.0 + std::log(1.0 + sim(w, r) * f));
      if (best < 0 || cost < best_cost || (cost == best_cost && r < best)) {
        best = r;
        best_cost = cost;
      }
    }
    if (best < 0) continue;
    free.erase(std::find(free.begin(), free.end(), best));
    out.emplace_back(w, best);
  }
  return out;
}

}  // namespace aergia::testing
