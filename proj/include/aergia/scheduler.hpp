#pragma once

// Federator-side freeze-and-offload scheduling.
//
// Clients whose estimated remaining time exceeds the mean compute time (mct)
// are senders; the rest are receivers. Each sender, in ascending order of its
// estimate, is matched greedily with the receiver minimising the
// similarity-adjusted completion estimate, and each receiver is used at most
// once per round.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aergia/profiler.hpp"
#include "aergia/similarity.hpp"

namespace aergia {

struct OffloadPoint {
  double completion = 0.0;  // ct
  int updates = 0;          // d
};

struct OffloadAssignment {
  int weak_client = 0;
  int strong_client = 0;
  int offload_point = 0;            // d: updates whose feature-block training moves to the strong client
  double estimated_completion = 0;  // ct from calc_op, before the similarity factor
  double adjusted_cost = 0;         // ct * (1 + ln(1 + S * f))
};

struct OffloadSchedule {
  int round = 0;
  double mct = 0.0;
  std::vector<int> sending;    // ascending estimate
  std::vector<int> receiving;  // descending estimate
  std::vector<OffloadAssignment> assignments;

  [[nodiscard]] const OffloadAssignment* for_weak(int client) const {
    for (const auto& a : assignments) {
      if (a.weak_client == client) return &a;
    }
    return nullptr;
  }
  [[nodiscard]] const OffloadAssignment* for_strong(int client) const {
    for (const auto& a : assignments) {
      if (a.strong_client == client) return &a;
    }
    return nullptr;
  }
};

// Cost of offloading the last d updates of client a to client b: a runs
// (r_a - d) full batches, then its frozen block is trained on b at x_b per
// batch; b's own share is (r_b - d) * t_b.
inline double offload_cost(double t_a, double t_b, double x_b, int r_a, int r_b, int d) {
  return std::max((r_a - d) * t_a + d * x_b, (r_b - d) * t_b);
}

// Scans d = 1..min(r_a, r_b) and stops at the first increase of the cost.
// Returns the d that produced the returned cost.
inline OffloadPoint calc_op(double t_a, double t_b, double x_b, int r_a, int r_b) {
  for (double v : {t_a, t_b, x_b}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("calc_op: batch times must be positive and finite");
  }
  if (r_a < 1 || r_b < 1) throw std::invalid_argument("calc_op: remaining updates must be >= 1");
  const int last = std::min(r_a, r_b);
  OffloadPoint best{std::numeric_limits<double>::infinity(), 0};
  for (int d = 1; d <= last; ++d) {
    const double cost = offload_cost(t_a, t_b, x_b, r_a, r_b, d);
    if (cost > best.completion) return best;
    best = {cost, d};
  }
  return best;
}

inline double mean_compute_time(std::span<const ClientProfile> profiles) {
  if (profiles.empty()) throw std::invalid_argument("mean_compute_time: no profiles");
  double sum = 0.0;
  for (const auto& p : profiles) sum += p.estimated_remaining();
  return sum / static_cast<double>(profiles.size());
}

struct ClientSplit {
  std::vector<int> sending;
  std::vector<int> receiving;
};

inline ClientSplit partition_clients(std::span<const ClientProfile> profiles, double mct) {
  std::vector<const ClientProfile*> weak;
  std::vector<const ClientProfile*> strong;
  for (const auto& p : profiles) (p.estimated_remaining() > mct ? weak : strong).push_back(&p);
  std::sort(weak.begin(), weak.end(), [](const ClientProfile* a, const ClientProfile* b) {
    if (a->estimated_remaining() != b->estimated_remaining()) return a->estimated_remaining() < b->estimated_remaining();
    return a->client_id < b->client_id;
  });
  std::sort(strong.begin(), strong.end(), [](const ClientProfile* a, const ClientProfile* b) {
    if (a->estimated_remaining() != b->estimated_remaining()) return a->estimated_remaining() > b->estimated_remaining();
    return a->client_id < b->client_id;
  });
  ClientSplit out;
  for (const auto* p : weak) out.sending.push_back(p->client_id);
  for (const auto* p : strong) out.receiving.push_back(p->client_id);
  return out;
}

inline double similarity_penalty(double similarity, double factor) {
  return 1.0 + std::log(similarity * factor + 1.0);
}

inline OffloadSchedule build_schedule(std::span<const ClientProfile> profiles, const SimilarityMatrix& similarity,
                                      double factor, int round = 0) {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw std::invalid_argument("similarity factor must be >= 0");
  OffloadSchedule schedule;
  schedule.round = round;
  if (profiles.empty()) return schedule;

  auto profile_of = [&](int id) -> const ClientProfile& {
    for (const auto& p : profiles) {
      if (p.client_id == id) return p;
    }
    throw std::out_of_range("no profile for client " + std::to_string(id));
  };

  schedule.mct = mean_compute_time(profiles);
  auto split = partition_clients(profiles, schedule.mct);
  schedule.sending = split.sending;
  schedule.receiving = split.receiving;

  std::vector<int> available = split.receiving;
  for (int weak_id : split.sending) {
    if (available.empty()) break;
    const auto& weak = profile_of(weak_id);
    std::optional<OffloadAssignment> chosen;
    for (int strong_id : available) {
      const auto& strong = profile_of(strong_id);
      // A receiver with nothing left to run cannot host d >= 1 updates.
      if (strong.remaining_updates < 1 || weak.remaining_updates < 1) continue;
      const auto op = calc_op(weak.timings.total(), strong.timings.total(), strong.timings.bf,
                              weak.remaining_updates, strong.remaining_updates);
      const double cost = op.completion * similarity_penalty(similarity(weak_id, strong_id), factor);
      if (!chosen || cost < chosen->adjusted_cost ||
          (cost == chosen->adjusted_cost && strong_id < chosen->strong_client)) {
        chosen = OffloadAssignment{weak_id, strong_id, op.updates, op.completion, cost};
      }
    }
    if (!chosen) continue;
    available.erase(std::find(available.begin(), available.end(), chosen->strong_client));
    schedule.assignments.push_back(*chosen);
  }
  return schedule;
}

inline nlohmann::json to_json(const OffloadSchedule& s) {
  nlohmann::json assignments = nlohmann::json::array();
  for (const auto& a : s.assignments) {
    assignments.push_back({{"weak", a.weak_client},
                           {"strong", a.strong_client},
                           {"offload_point", a.offload_point},
                           {"estimated_completion", a.estimated_completion},
                           {"adjusted_cost", a.adjusted_cost}});
  }
  return {{"round", s.round},
          {"mct", s.mct},
          {"sending", s.sending},
          {"receiving", s.receiving},
          {"assignments", assignments}};
}

}  // namespace aergia
