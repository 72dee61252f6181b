#pragma once

// Two-block dense classifier used as the federated model.
//
// The "feature" block is a dense layer followed by tanh; the "classifier"
// block is a dense layer followed by softmax. A training step is made of the
// four phases ff (feature forward), fc (classifier forward), bc (classifier
// backward) and bf (feature backward). Freezing the feature block skips bf.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace aergia {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense layer parameters: weights are (fan_in x fan_out), bias is fan_out.
struct DenseParams {
  Matrix weights;
  Vector bias;

  [[nodiscard]] Eigen::Index fan_in() const { return weights.rows(); }
  [[nodiscard]] Eigen::Index fan_out() const { return weights.cols(); }
  [[nodiscard]] bool all_finite() const { return weights.allFinite() && bias.allFinite(); }
  [[nodiscard]] Eigen::Index size() const { return weights.size() + bias.size(); }

  friend bool operator==(const DenseParams& a, const DenseParams& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
  }
};

struct FeatureBlock : DenseParams {};
struct ClassifierBlock : DenseParams {};

struct PartitionedModel {
  FeatureBlock feature;
  ClassifierBlock classifier;

  [[nodiscard]] Eigen::Index input_dim() const { return feature.fan_in(); }
  [[nodiscard]] Eigen::Index hidden_dim() const { return feature.fan_out(); }
  [[nodiscard]] Eigen::Index num_classes() const { return classifier.fan_out(); }

  friend bool operator==(const PartitionedModel&, const PartitionedModel&) = default;
};

struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
};

struct Gradients {
  std::optional<FeatureBlock> feature;  // absent for frozen training
  ClassifierBlock classifier;
};

struct ForwardResult {
  Matrix hidden;  // tanh activations of the feature block
  Matrix probs;   // row-wise softmax of the classifier output
};

struct ProximalTerm {
  double mu = 0.0;
  const PartitionedModel* anchor = nullptr;
  const PartitionedModel* current = nullptr;
};

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

inline void check_dense(const DenseParams& p, const char* what) {
  if (p.bias.size() != p.weights.cols()) {
    throw ShapeError(std::string(what) + ": bias length does not match weight columns");
  }
}

inline void check_model(const PartitionedModel& m) {
  check_dense(m.feature, "feature block");
  check_dense(m.classifier, "classifier block");
  if (m.feature.fan_out() != m.classifier.fan_in()) {
    throw ShapeError("feature output dim " + std::to_string(m.feature.fan_out()) +
                     " does not match classifier input dim " +
                     std::to_string(m.classifier.fan_in()));
  }
  if (m.classifier.fan_out() < 1) throw ShapeError("model has no classes");
}

inline void check_batch(const PartitionedModel& m, const Batch& b) {
  check_model(m);
  if (b.inputs.rows() < 1) throw ShapeError("batch is empty");
  if (b.inputs.cols() != m.input_dim()) {
    throw ShapeError("batch input dim " + std::to_string(b.inputs.cols()) +
                     " does not match model input dim " + std::to_string(m.input_dim()));
  }
  if (static_cast<Eigen::Index>(b.labels.size()) != b.inputs.rows()) {
    throw ShapeError("label count does not match batch size");
  }
  for (int y : b.labels) {
    if (y < 0 || y >= m.num_classes()) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(m.num_classes()) + ")");
    }
  }
}

inline Matrix affine(const Matrix& x, const DenseParams& p) {
  Matrix z = x * p.weights;
  z.rowwise() += p.bias.transpose();
  return z;
}

inline void softmax_rows(Matrix& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

// dL/dlogits for mean cross-entropy.
inline Matrix logit_gradient(const Matrix& probs, std::span<const int> labels) {
  Matrix g = probs;
  for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  g /= static_cast<double>(g.rows());
  return g;
}

inline ClassifierBlock classifier_gradient(const Matrix& hidden, const Matrix& dlogits) {
  ClassifierBlock g;
  g.weights = hidden.transpose() * dlogits;
  g.bias = dlogits.colwise().sum().transpose();
  return g;
}

inline FeatureBlock feature_gradient(const PartitionedModel& m, const Batch& b,
                                     const Matrix& hidden, const Matrix& dlogits) {
  Matrix dhidden = dlogits * m.classifier.weights.transpose();
  Matrix dpre = (dhidden.array() * (1.0 - hidden.array().square())).matrix();
  FeatureBlock g;
  g.weights = b.inputs.transpose() * dpre;
  g.bias = dpre.colwise().sum().transpose();
  return g;
}

inline double squared_distance(const DenseParams& a, const DenseParams& b) {
  return (a.weights - b.weights).squaredNorm() + (a.bias - b.bias).squaredNorm();
}

inline void descend(DenseParams& p, const DenseParams& g, double lr) {
  if (g.weights.rows() != p.weights.rows() || g.weights.cols() != p.weights.cols() ||
      g.bias.size() != p.bias.size()) {
    throw ShapeError("gradient shape does not match parameters");
  }
  if (!g.all_finite()) throw std::invalid_argument("non-finite gradient");
  p.weights -= lr * g.weights;
  p.bias -= lr * g.bias;
}

}  // namespace detail

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline PartitionedModel make_model(int input_dim, int hidden_dim, int num_classes,
                                   std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1) {
    throw ShapeError("model dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  auto init = [&rng](DenseParams& p, int fan_in, int fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    p.weights.resize(fan_in, fan_out);
    p.bias.resize(fan_out);
    for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias[i] = dist(rng);
  };
  PartitionedModel m;
  init(m.feature, input_dim, hidden_dim);
  init(m.classifier, hidden_dim, num_classes);
  return m;
}

inline PartitionedModel zeros_like(const PartitionedModel& m) {
  PartitionedModel z = m;
  z.feature.weights.setZero();
  z.feature.bias.setZero();
  z.classifier.weights.setZero();
  z.classifier.bias.setZero();
  return z;
}

inline ForwardResult forward(const PartitionedModel& model, const Batch& batch) {
  detail::check_batch(model, batch);
  ForwardResult out;
  out.hidden = detail::affine(batch.inputs, model.feature).array().tanh().matrix();
  out.probs = detail::affine(out.hidden, model.classifier);
  detail::softmax_rows(out.probs);
  return out;
}

inline double loss_cross_entropy(const Matrix& probs, std::span<const int> labels,
                                 std::optional<ProximalTerm> proximal = std::nullopt) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() || probs.rows() < 1) {
    throw ShapeError("probability rows do not match label count");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.cols()) throw ShapeError("label outside probability columns");
    total -= std::log(std::max(probs(i, y), kProbabilityFloor));
  }
  double loss = total / static_cast<double>(probs.rows());
  if (proximal && proximal->mu != 0.0) {
    if (proximal->anchor == nullptr || proximal->current == nullptr) {
      throw std::invalid_argument("proximal term needs anchor and current models");
    }
    const auto& a = *proximal->anchor;
    const auto& c = *proximal->current;
    detail::check_model(a);
    detail::check_model(c);
    if (a.feature.weights.rows() != c.feature.weights.rows() ||
        a.hidden_dim() != c.hidden_dim() || a.num_classes() != c.num_classes()) {
      throw ShapeError("proximal anchor shape differs from current model");
    }
    loss += 0.5 * proximal->mu *
            (detail::squared_distance(c.feature, a.feature) +
             detail::squared_distance(c.classifier, a.classifier));
  }
  return loss;
}

inline Gradients backward_full(const PartitionedModel& model, const Batch& batch) {
  const ForwardResult fwd = forward(model, batch);
  const Matrix dlogits = detail::logit_gradient(fwd.probs, batch.labels);
  Gradients g;
  g.classifier = detail::classifier_gradient(fwd.hidden, dlogits);
  g.feature = detail::feature_gradient(model, batch, fwd.hidden, dlogits);
  return g;
}

// Classifier-only gradients; the bf phase is never executed.
inline Gradients backward_frozen(const PartitionedModel& model, const Batch& batch) {
  const ForwardResult fwd = forward(model, batch);
  const Matrix dlogits = detail::logit_gradient(fwd.probs, batch.labels);
  return Gradients{std::nullopt, detail::classifier_gradient(fwd.hidden, dlogits)};
}

// Adds mu * (current - anchor) to every present gradient block.
inline void add_proximal_gradient(Gradients& grads, const PartitionedModel& current,
                                  const PartitionedModel& anchor, double mu) {
  if (mu == 0.0) return;
  auto pull = [mu](DenseParams& g, const DenseParams& cur, const DenseParams& anc) {
    g.weights += mu * (cur.weights - anc.weights);
    g.bias += mu * (cur.bias - anc.bias);
  };
  pull(grads.classifier, current.classifier, anchor.classifier);
  if (grads.feature) pull(*grads.feature, current.feature, anchor.feature);
}

inline PartitionedModel sgd_step(PartitionedModel model, const Gradients& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
  if (grads.feature) detail::descend(model.feature, *grads.feature, lr);
  detail::descend(model.classifier, grads.classifier, lr);
  return model;
}

inline FeatureBlock sgd_step(FeatureBlock block, const FeatureBlock& grad, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
  detail::descend(block, grad, lr);
  return block;
}

inline std::pair<FeatureBlock, ClassifierBlock> split(const PartitionedModel& model) {
  return {model.feature, model.classifier};
}

inline PartitionedModel merge(FeatureBlock feature, ClassifierBlock classifier) {
  PartitionedModel m{std::move(feature), std::move(classifier)};
  detail::check_model(m);
  return m;
}

inline std::vector<int> predict(const PartitionedModel& model, const Batch& batch) {
  const ForwardResult fwd = forward(model, batch);
  std::vector<int> out(static_cast<std::size_t>(fwd.probs.rows()));
  for (Eigen::Index i = 0; i < fwd.probs.rows(); ++i) {
    Eigen::Index arg = 0;
    fwd.probs.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

inline double accuracy(const PartitionedModel& model, const Batch& batch) {
  const auto pred = predict(model, batch);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == batch.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace aergia
