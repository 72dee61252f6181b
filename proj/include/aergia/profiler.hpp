#pragma once

// Per-phase batch costs: ground truth from a client's speed factor, and the
// estimate a client reports after profiling its first batches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "aergia/random.hpp"

namespace aergia {

// Virtual seconds per batch for each training phase.
struct PhaseTimings {
  double ff = 0.15;  // forward, feature block
  double fc = 0.05;  // forward, classifier block
  double bc = 0.15;  // backward, classifier block
  double bf = 0.65;  // backward, feature block

  [[nodiscard]] double classifier_part() const { return ff + fc + bc; }
  [[nodiscard]] double total() const { return ff + fc + bc + bf; }

  [[nodiscard]] bool valid() const {
    for (double v : {ff, fc, bc, bf}) {
      if (!(v > 0.0) || !std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const PhaseTimings&, const PhaseTimings&) = default;
};

struct ClientProfile {
  int client_id = 0;
  PhaseTimings timings;
  int remaining_updates = 0;

  // Estimated time to finish the remaining updates at full training cost.
  [[nodiscard]] double estimated_remaining() const { return remaining_updates * timings.total(); }
};

inline PhaseTimings ground_truth_timings(const PhaseTimings& base, double speed_factor) {
  if (!(speed_factor > 0.0) || speed_factor > 1.0 || !std::isfinite(speed_factor)) {
    throw std::invalid_argument("speed factor must be in (0, 1], got " + std::to_string(speed_factor));
  }
  if (!base.valid()) throw std::invalid_argument("base phase timings must be positive and finite");
  return {base.ff / speed_factor, base.fc / speed_factor, base.bc / speed_factor, base.bf / speed_factor};
}

struct MeasureSpec {
  int profiled_batches = 1;   // P
  int total_updates = 16;     // per-round local update budget
  int waiting_batches = 0;    // batches run after profiling while awaiting the schedule
  double noise = 0.0;         // relative sigma of multiplicative Gaussian noise
  std::uint64_t seed = 0;
};

// Reported timings are the per-phase mean over P noisy batch samples.
inline ClientProfile measure(int client_id, const PhaseTimings& truth, const MeasureSpec& spec) {
  if (spec.profiled_batches < 1 || spec.profiled_batches > spec.total_updates) {
    throw std::invalid_argument("profiled batches must be in [1, total_updates]");
  }
  if (spec.waiting_batches < 0) throw std::invalid_argument("waiting batches must be >= 0");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw std::invalid_argument("profiling noise must be >= 0");
  if (!truth.valid()) throw std::invalid_argument("ground-truth timings must be positive and finite");

  ClientProfile profile;
  profile.client_id = client_id;
  profile.remaining_updates = std::max(0, spec.total_updates - spec.profiled_batches - spec.waiting_batches);
  if (spec.noise == 0.0) {
    profile.timings = truth;
    return profile;
  }

  std::mt19937_64 rng(derive_seed(spec.seed, {stream::kProfiler, static_cast<std::uint64_t>(client_id)}));
  std::normal_distribution<double> gauss(0.0, spec.noise);
  auto sample_mean = [&](double t) {
    double sum = 0.0;
    for (int i = 0; i < spec.profiled_batches; ++i) sum += t * std::max(1e-6, 1.0 + gauss(rng));
    return sum / spec.profiled_batches;
  };
  profile.timings.ff = sample_mean(truth.ff);
  profile.timings.fc = sample_mean(truth.fc);
  profile.timings.bc = sample_mean(truth.bc);
  profile.timings.bf = sample_mean(truth.bf);
  return profile;
}

}  // namespace aergia
