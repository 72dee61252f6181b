#pragma once

// Synthetic classification data and its federated partitioning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aergia/model.hpp"
#include "aergia/random.hpp"

namespace aergia {

class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SyntheticSpec {
  int num_classes = 10;
  int samples_per_class = 500;
  int input_dim = 2;
  double noise = 0.5;  // per-coordinate Gaussian sigma around the class mean
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;

  [[nodiscard]] std::size_t size() const { return labels.size(); }

  [[nodiscard]] Batch gather(std::span<const std::size_t> indices) const {
    Batch b;
    b.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
    b.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      b.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(indices[i]));
      b.labels[i] = labels[indices[i]];
    }
    return b;
  }

  [[nodiscard]] Batch test_batch() const { return gather(test_indices); }
  [[nodiscard]] Batch train_batch() const { return gather(train_indices); }
};

// Class c sits at the base-`side` digits of c, one digit per input coordinate,
// where side is the smallest integer with side^input_dim >= num_classes. Means
// are therefore distinct points of a unit-spacing grid.
inline std::vector<Vector> class_means(int num_classes, int input_dim) {
  int side = 1;
  auto capacity = [&](int s) {
    double cap = 1.0;
    for (int d = 0; d < input_dim; ++d) cap *= s;
    return cap;
  };
  while (capacity(side) < num_classes) ++side;
  std::vector<Vector> means;
  for (int c = 0; c < num_classes; ++c) {
    Vector mu = Vector::Zero(input_dim);
    int rest = c;
    for (int d = 0; d < input_dim; ++d) {
      mu[d] = static_cast<double>(rest % side);
      rest /= side;
    }
    means.push_back(mu);
  }
  return means;
}

inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.samples_per_class < 1 || spec.input_dim < 1) {
    throw std::invalid_argument("synthetic dataset parameters must be >= 1");
  }
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) {
    throw std::invalid_argument("synthetic noise must be finite and >= 0");
  }
  const auto means = class_means(spec.num_classes, spec.input_dim);
  const auto n = static_cast<std::size_t>(spec.num_classes) * static_cast<std::size_t>(spec.samples_per_class);

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.inputs.resize(static_cast<Eigen::Index>(n), spec.input_dim);
  ds.labels.resize(n);
  std::mt19937_64 rng(derive_seed(spec.seed, {stream::kDataset}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int d = 0; d < spec.input_dim; ++d) {
        ds.inputs(static_cast<Eigen::Index>(row), d) = means[static_cast<std::size_t>(c)][d] + spec.noise * gauss(rng);
      }
      ds.labels[row] = c;
    }
  }

  // Stratified 80/20 split.
  std::mt19937_64 split_rng(derive_seed(spec.seed, {stream::kSplit}));
  for (int c = 0; c < spec.num_classes; ++c) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(spec.samples_per_class));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(c) * idx.size());
    std::shuffle(idx.begin(), idx.end(), split_rng);
    const std::size_t n_test = idx.size() / 5;
    ds.test_indices.insert(ds.test_indices.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    ds.train_indices.insert(ds.train_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(ds.train_indices.begin(), ds.train_indices.end());
  std::sort(ds.test_indices.begin(), ds.test_indices.end());
  return ds;
}

struct PartitionMode {
  enum class Kind { Iid, NonIid };
  Kind kind = Kind::Iid;
  int classes_per_client = 0;  // k for NonIid(k)

  static PartitionMode iid() { return {Kind::Iid, 0}; }
  static PartitionMode non_iid(int k) { return {Kind::NonIid, k}; }
};

struct PartitionSpec {
  int num_clients = 1;
  PartitionMode mode;
  // Samples per client for equal sizes. 0 means floor(train size / num_clients).
  int samples_per_client = 0;
  // Relative client sizes; empty means equal sizes. When set, the total
  // allocation is samples_per_client * num_clients split proportionally.
  std::vector<double> size_weights;
  std::uint64_t seed = 0;
  int max_retries = 100;
};

struct ClientPartition {
  int client_id = 0;
  std::vector<std::size_t> sample_indices;
  std::vector<int> class_counts;

  [[nodiscard]] std::size_t size() const { return sample_indices.size(); }
};

namespace detail {

// Largest-remainder apportionment of `total` by `weights`; ties go to the lower index.
inline std::vector<int> apportion(int total, std::span<const double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    rema.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) out[rema[j % rema.size()].second] += 1;
  return out;
}

}  // namespace detail

inline std::vector<ClientPartition> partition(const Dataset& ds, const PartitionSpec& spec) {
  const int m = spec.num_clients;
  const int C = ds.num_classes;
  if (m < 1) throw std::invalid_argument("num_clients must be >= 1");
  if (spec.mode.kind == PartitionMode::Kind::NonIid &&
      (spec.mode.classes_per_client < 1 || spec.mode.classes_per_client > C)) {
    throw std::invalid_argument("non-IID classes per client must be in [1, " + std::to_string(C) + "]");
  }
  if (spec.samples_per_client < 0) throw std::invalid_argument("samples_per_client must be >= 0");

  std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(C));
  for (std::size_t i : ds.train_indices) pools[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  const int per_client = spec.samples_per_client > 0
                             ? spec.samples_per_client
                             : static_cast<int>(ds.train_indices.size() / static_cast<std::size_t>(m));
  std::vector<int> sizes;
  if (spec.size_weights.empty()) {
    sizes.assign(static_cast<std::size_t>(m), per_client);
  } else {
    if (static_cast<int>(spec.size_weights.size()) != m) {
      throw std::invalid_argument("size_weights must have one entry per client");
    }
    for (double w : spec.size_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("size weights must be positive");
    }
    sizes = detail::apportion(per_client * m, spec.size_weights);
  }
  for (int s : sizes) {
    if (s < 1) throw PartitionError("a client would receive no samples; increase samples_per_client");
  }

  std::vector<int> remaining(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) remaining[static_cast<std::size_t>(c)] = static_cast<int>(pools[static_cast<std::size_t>(c)].size());

  std::mt19937_64 rng(derive_seed(spec.seed, {stream::kPartition}));
  std::vector<std::vector<int>> quotas(static_cast<std::size_t>(m), std::vector<int>(static_cast<std::size_t>(C), 0));

  if (spec.mode.kind == PartitionMode::Kind::Iid) {
    std::vector<double> global(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) global[static_cast<std::size_t>(c)] = static_cast<double>(pools[static_cast<std::size_t>(c)].size());
    for (int k = 0; k < m; ++k) {
      auto q = detail::apportion(sizes[static_cast<std::size_t>(k)], global);
      for (int c = 0; c < C; ++c) {
        remaining[static_cast<std::size_t>(c)] -= q[static_cast<std::size_t>(c)];
        if (remaining[static_cast<std::size_t>(c)] < 0) {
          throw PartitionError("IID partition needs more samples of class " + std::to_string(c) +
                               " than the training split holds");
        }
      }
      quotas[static_cast<std::size_t>(k)] = std::move(q);
    }
  } else {
    const int k_cls = spec.mode.classes_per_client;
    std::vector<int> classes(static_cast<std::size_t>(C));
    for (int client = 0; client < m; ++client) {
      const int n = sizes[static_cast<std::size_t>(client)];
      if (n < k_cls) {
        throw PartitionError("client " + std::to_string(client) + " has " + std::to_string(n) +
                             " samples, fewer than the " + std::to_string(k_cls) + " classes it must hold");
      }
      bool placed = false;
      for (int attempt = 0; attempt <= spec.max_retries && !placed; ++attempt) {
        std::iota(classes.begin(), classes.end(), 0);
        // Partial Fisher-Yates: the first k entries are a uniform draw without replacement.
        for (int i = 0; i < k_cls; ++i) {
          std::uniform_int_distribution<int> pick(i, C - 1);
          std::swap(classes[static_cast<std::size_t>(i)], classes[static_cast<std::size_t>(pick(rng))]);
        }
        std::vector<int> chosen(classes.begin(), classes.begin() + k_cls);
        std::sort(chosen.begin(), chosen.end());
        bool feasible = true;
        for (int i = 0; i < k_cls; ++i) {
          const int need = n / k_cls + (i < n % k_cls ? 1 : 0);
          if (remaining[static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)])] < need) feasible = false;
        }
        if (!feasible) continue;
        for (int i = 0; i < k_cls; ++i) {
          const int need = n / k_cls + (i < n % k_cls ? 1 : 0);
          const auto c = static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)]);
          quotas[static_cast<std::size_t>(client)][c] = need;
          remaining[c] -= need;
        }
        placed = true;
      }
      if (!placed) {
        throw PartitionError("could not place client " + std::to_string(client) + " with " +
                             std::to_string(k_cls) + " classes of " + std::to_string(n / k_cls) +
                             "+ samples each after " + std::to_string(spec.max_retries) +
                             " redraws; reduce samples_per_client or increase samples_per_class");
      }
    }
  }

  std::vector<ClientPartition> parts(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    parts[static_cast<std::size_t>(k)].client_id = k;
    parts[static_cast<std::size_t>(k)].class_counts = quotas[static_cast<std::size_t>(k)];
  }
  // Deal each class pool round-robin over the clients that still need it.
  for (int c = 0; c < C; ++c) {
    auto pool = pools[static_cast<std::size_t>(c)];
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<int> owed(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) owed[static_cast<std::size_t>(k)] = quotas[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
    std::size_t next = 0;
    bool progress = true;
    while (progress) {
      progress = false;
      for (int k = 0; k < m; ++k) {
        if (owed[static_cast<std::size_t>(k)] == 0) continue;
        parts[static_cast<std::size_t>(k)].sample_indices.push_back(pool[next++]);
        --owed[static_cast<std::size_t>(k)];
        progress = true;
      }
    }
  }
  for (auto& p : parts) std::sort(p.sample_indices.begin(), p.sample_indices.end());
  return parts;
}

inline nlohmann::json partition_manifest(std::span<const ClientPartition> parts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : parts) {
    out.push_back({{"client_id", p.client_id}, {"size", p.size()}, {"class_counts", p.class_counts}});
  }
  return out;
}

}  // namespace aergia
