#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "aergia/model.hpp"

namespace aergia {

namespace detail {

inline void check_same_shape(const PartitionedModel& a, const PartitionedModel& b) {
  check_model(a);
  check_model(b);
  if (a.input_dim() != b.input_dim() || a.hidden_dim() != b.hidden_dim() || a.num_classes() != b.num_classes()) {
    throw ShapeError("models to aggregate have different dimensions");
  }
}

template <typename F>
void zip_params(PartitionedModel& dst, const PartitionedModel& src, F&& fn) {
  fn(dst.feature.weights, src.feature.weights);
  fn(dst.feature.bias, src.feature.bias);
  fn(dst.classifier.weights, src.classifier.weights);
  fn(dst.classifier.bias, src.classifier.bias);
}

}  // namespace detail

// w = sum_k (n_k / sum n) w_k, accumulated as a running mean so that
// aggregating identical models returns that model bit-for-bit.
inline PartitionedModel aggregate_fedavg(std::span<const PartitionedModel> models, std::span<const double> sizes) {
  if (models.empty()) throw std::invalid_argument("aggregate_fedavg: no models");
  if (models.size() != sizes.size()) throw std::invalid_argument("aggregate_fedavg: one size per model required");
  for (double n : sizes) {
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("aggregate_fedavg: sizes must be positive");
  }
  for (const auto& m : models) detail::check_same_shape(models[0], m);

  PartitionedModel acc = models[0];
  double seen = sizes[0];
  for (std::size_t k = 1; k < models.size(); ++k) {
    seen += sizes[k];
    const double share = sizes[k] / seen;
    detail::zip_params(acc, models[k], [share](auto& a, const auto& w) { a += share * (w - a); });
  }
  return acc;
}

// Normalised averaging: each client's update is divided by its local step
// count tau_k and the averaged direction is rescaled by sum_k p_k tau_k.
inline PartitionedModel aggregate_fednova(const PartitionedModel& global, std::span<const PartitionedModel> models,
                                          std::span<const double> sizes, std::span<const int> local_steps) {
  if (models.empty()) throw std::invalid_argument("aggregate_fednova: no models");
  if (models.size() != sizes.size() || models.size() != local_steps.size()) {
    throw std::invalid_argument("aggregate_fednova: sizes and step counts must match models");
  }
  for (int tau : local_steps) {
    if (tau < 1) throw std::invalid_argument("aggregate_fednova: local step counts must be >= 1");
  }
  for (const auto& m : models) detail::check_same_shape(global, m);
  // Uniform tau: the normalisation cancels and the rule is FedAvg.
  if (std::all_of(local_steps.begin(), local_steps.end(), [&](int t) { return t == local_steps[0]; })) {
    return aggregate_fedavg(models, sizes);
  }

  double total = 0.0;
  for (double n : sizes) {
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("aggregate_fednova: sizes must be positive");
    total += n;
  }
  double tau_eff = 0.0;
  PartitionedModel direction = zeros_like(global);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double p = sizes[k] / total;
    const double tau = local_steps[k];
    tau_eff += p * tau;
    PartitionedModel delta = models[k];
    detail::zip_params(delta, global, [](auto& d, const auto& g) { d -= g; });
    detail::zip_params(direction, delta, [p, tau](auto& acc, const auto& d) { acc += (p / tau) * d; });
  }
  PartitionedModel out = global;
  detail::zip_params(out, direction, [tau_eff](auto& w, const auto& d) { w += tau_eff * d; });
  return out;
}

// Rebuilds an offloading client's model from the feature block trained by its
// helper and the classifier block it trained itself.
inline PartitionedModel recombine(FeatureBlock from_strong, ClassifierBlock from_weak) {
  return merge(std::move(from_strong), std::move(from_weak));
}

}  // namespace aergia
