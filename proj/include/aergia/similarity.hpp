#pragma once

// Pairwise data-distribution distance between clients, computed behind an
// isolation boundary. Clients submit label histograms; the federator only
// ever sees the resulting matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace aergia {

struct ClassCountSubmission {
  int client_id = 0;
  std::vector<std::int64_t> counts;
};

struct SubmissionReceipt {
  int client_id = 0;
};

// EMD with unit ground distance between distinct labels: the L1 distance of
// the normalised histograms. Range [0, 2].
inline double histogram_distance(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("histograms differ in length");
  using wide = __int128;
  constexpr std::int64_t kMaxTotal = std::int64_t{1} << 36;
  constexpr int kGridBits = 50;
  std::int64_t ta = 0;
  std::int64_t tb = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c] < 0 || b[c] < 0) throw std::invalid_argument("histogram counts must be non-negative");
    ta += a[c];
    tb += b[c];
    if (ta > kMaxTotal || tb > kMaxTotal) throw std::invalid_argument("histogram total too large");
  }
  if (ta == 0 || tb == 0) throw std::invalid_argument("histogram total must be positive");
  // Exact rational sum |a/ta - b/tb| = num / (ta * tb), rounded up onto a
  // 2^-50 grid. Grid values add exactly, so the triangle inequality and the
  // upper bound of 2 survive in floating point.
  wide num = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const wide diff = wide{a[c]} * tb - wide{b[c]} * ta;
    num += diff < 0 ? -diff : diff;
  }
  const wide den = wide{ta} * tb;
  const wide scaled = num << kGridBits;
  const wide q = scaled / den + (scaled % den != 0 ? 1 : 0);
  return std::ldexp(static_cast<double>(static_cast<std::int64_t>(q)), -kGridBits);
}

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::vector<int> client_ids, std::vector<double> values)
      : ids_(std::move(client_ids)), values_(std::move(values)) {
    if (values_.size() != ids_.size() * ids_.size()) throw std::invalid_argument("matrix size mismatch");
  }

  // All-zero matrix over the given clients (every pair considered identical).
  static SimilarityMatrix zeros(std::vector<int> client_ids) {
    const auto n = client_ids.size();
    return {std::move(client_ids), std::vector<double>(n * n, 0.0)};
  }

  [[nodiscard]] std::size_t size() const { return ids_.size(); }
  [[nodiscard]] const std::vector<int>& client_ids() const { return ids_; }

  [[nodiscard]] double at_index(std::size_t i, std::size_t j) const { return values_.at(i * ids_.size() + j); }

  [[nodiscard]] double operator()(int client_a, int client_b) const {
    return at_index(index_of(client_a), index_of(client_b));
  }

  [[nodiscard]] std::size_t index_of(int client_id) const {
    auto it = std::find(ids_.begin(), ids_.end(), client_id);
    if (it == ids_.end()) throw std::out_of_range("client " + std::to_string(client_id) + " not in similarity matrix");
    return static_cast<std::size_t>(it - ids_.begin());
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      rows.push_back(std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(i * ids_.size()),
                                         values_.begin() + static_cast<std::ptrdiff_t>((i + 1) * ids_.size())));
    }
    return {{"client_ids", ids_}, {"matrix", rows}};
  }

 private:
  std::vector<int> ids_;
  std::vector<double> values_;
};

// Stores submitted histograms; there is deliberately no accessor for them.
class SimilarityOracle {
 public:
  SimilarityOracle(int num_classes, std::vector<int> expected_clients)
      : num_classes_(num_classes), expected_(std::move(expected_clients)) {
    if (num_classes_ < 1) throw std::invalid_argument("num_classes must be >= 1");
    std::sort(expected_.begin(), expected_.end());
  }

  SubmissionReceipt submit(const ClassCountSubmission& submission) {
    if (static_cast<int>(submission.counts.size()) != num_classes_) {
      throw std::invalid_argument("client " + std::to_string(submission.client_id) + " submitted " +
                                  std::to_string(submission.counts.size()) + " counts, expected " +
                                  std::to_string(num_classes_));
    }
    std::int64_t total = 0;
    for (auto c : submission.counts) {
      if (c < 0) throw std::invalid_argument("class counts must be non-negative");
      total += c;
    }
    if (total <= 0) throw std::invalid_argument("class counts must not all be zero");
    if (!std::binary_search(expected_.begin(), expected_.end(), submission.client_id)) {
      throw std::invalid_argument("client " + std::to_string(submission.client_id) + " is not expected");
    }
    std::lock_guard lock(mutex_);
    if (!store_.emplace(submission.client_id, submission.counts).second) {
      throw std::invalid_argument("client " + std::to_string(submission.client_id) + " already submitted");
    }
    return SubmissionReceipt{submission.client_id};
  }

  [[nodiscard]] SimilarityMatrix compute_matrix() const {
    std::lock_guard lock(mutex_);
    std::vector<int> missing;
    for (int id : expected_) {
      if (!store_.contains(id)) missing.push_back(id);
    }
    if (!missing.empty()) {
      std::string list;
      for (int id : missing) list += (list.empty() ? "" : ", ") + std::to_string(id);
      throw std::runtime_error("missing class-count submissions from clients: " + list);
    }
    const auto n = expected_.size();
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = histogram_distance(store_.at(expected_[i]), store_.at(expected_[j]));
        values[i * n + j] = d;
        values[j * n + i] = d;
      }
    }
    return {expected_, std::move(values)};
  }

 private:
  int num_classes_;
  std::vector<int> expected_;
  mutable std::mutex mutex_;
  std::map<int, std::vector<std::int64_t>> store_;
};

}  // namespace aergia
