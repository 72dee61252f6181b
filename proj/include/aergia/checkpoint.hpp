#pragma once

// Model checkpoints.
//
// Binary layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       8     magic "AERGCKPT"
//   8       4     u32 format version (1)
//   12      4     u32 input_dim
//   16      4     u32 hidden_dim
//   20      4     u32 num_classes
//   24      8     u64 seed the model was initialised from
//   32      8*N   f64 parameters, in order:
//                   feature weights   (input_dim x hidden_dim, row-major)
//                   feature bias      (hidden_dim)
//                   classifier weights (hidden_dim x num_classes, row-major)
//                   classifier bias   (num_classes)
//
// N = input_dim*hidden_dim + hidden_dim + hidden_dim*num_classes + num_classes.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aergia/model.hpp"

namespace aergia {

inline constexpr std::array<char, 8> kCheckpointMagic{'A', 'E', 'R', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PartitionedModel model;
  std::uint64_t seed = 0;
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

template <typename F>
void for_each_parameter(const PartitionedModel& m, F&& fn) {
  for (const DenseParams* p : {static_cast<const DenseParams*>(&m.feature),
                               static_cast<const DenseParams*>(&m.classifier)}) {
    for (Eigen::Index i = 0; i < p->weights.size(); ++i) fn(p->weights.data()[i]);
    for (Eigen::Index i = 0; i < p->bias.size(); ++i) fn(p->bias[i]);
  }
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  detail::check_model(ckpt.model);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.model.input_dim()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.model.hidden_dim()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.model.num_classes()));
  detail::put_le<std::uint64_t>(out, ckpt.seed);
  detail::for_each_parameter(ckpt.model, [&out](double v) { detail::put_le<double>(out, v); });
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw std::runtime_error("not a checkpoint (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto in_dim = detail::get_le<std::uint32_t>(in);
  const auto hidden = detail::get_le<std::uint32_t>(in);
  const auto classes = detail::get_le<std::uint32_t>(in);
  Checkpoint ckpt;
  ckpt.seed = detail::get_le<std::uint64_t>(in);
  if (in_dim == 0 || hidden == 0 || classes == 0) throw ShapeError("checkpoint has zero dimension");
  auto& m = ckpt.model;
  m.feature.weights.resize(in_dim, hidden);
  m.feature.bias.resize(hidden);
  m.classifier.weights.resize(hidden, classes);
  m.classifier.bias.resize(classes);
  for (DenseParams* p : {static_cast<DenseParams*>(&m.feature), static_cast<DenseParams*>(&m.classifier)}) {
    for (Eigen::Index i = 0; i < p->weights.size(); ++i) p->weights.data()[i] = detail::get_le<double>(in);
    for (Eigen::Index i = 0; i < p->bias.size(); ++i) p->bias[i] = detail::get_le<double>(in);
  }
  if (!m.feature.all_finite() || !m.classifier.all_finite()) {
    throw std::runtime_error("checkpoint contains non-finite weights");
  }
  return ckpt;
}

// Human-readable dump for debugging; not meant to be read back bit-exactly.
inline nlohmann::json to_json(const PartitionedModel& m) {
  auto dense = [](const DenseParams& p) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < p.weights.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(p.weights.cols()));
      for (Eigen::Index c = 0; c < p.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = p.weights(r, c);
      rows.push_back(row);
    }
    return nlohmann::json{{"weights", rows},
                          {"bias", std::vector<double>(p.bias.data(), p.bias.data() + p.bias.size())}};
  };
  return {{"input_dim", m.input_dim()},
          {"hidden_dim", m.hidden_dim()},
          {"num_classes", m.num_classes()},
          {"feature", dense(m.feature)},
          {"classifier", dense(m.classifier)}};
}

}  // namespace aergia
