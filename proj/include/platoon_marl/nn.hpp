#pragma once

// Dense feed-forward networks with exact reverse-mode gradients, an Adam
// optimizer and soft target updates. Batches are column-major: one sample per
// column.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "platoon_marl/errors.hpp"
#include "platoon_marl/rng.hpp"

namespace platoon_marl::nn {

enum class Activation { identity, relu, tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ShapeError("unknown activation '" + s + "'");
}

template <typename Scalar>
class BasicDenseNet {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;  // d(sum of upstream-weighted outputs) / d(input), same shape as the batch
  };

  BasicDenseNet() = default;

  /// `layer_sizes` = {inputs, hidden..., outputs}. Hidden layers use ReLU;
  /// `output_activations` holds one activation per output unit, or a single
  /// entry applied to all of them.
  BasicDenseNet(std::vector<int> layer_sizes, std::vector<Activation> output_activations)
      : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ShapeError("DenseNet needs at least an input and an output layer");
    for (int n : sizes_)
      if (n < 1) throw ShapeError("DenseNet layer sizes must be positive");
    const int outputs = sizes_.back();
    if (output_activations.size() == 1) output_activations.assign(static_cast<std::size_t>(outputs), output_activations[0]);
    if (output_activations.size() != static_cast<std::size_t>(outputs))
      throw ShapeError("DenseNet: one output activation per output unit expected");
    out_act_ = std::move(output_activations);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.push_back(Matrix::Zero(sizes_[l + 1], sizes_[l]));
      biases_.push_back(Vector::Zero(sizes_[l + 1]));
    }
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  void initialize(Rng& rng) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(weights_[l].cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) weights_[l](r, c) = static_cast<Scalar>(u(rng));
      for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l](r) = static_cast<Scalar>(u(rng));
    }
  }

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& output_activations() const { return out_act_; }
  std::size_t num_layers() const { return weights_.size(); }
  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  Vector& bias(std::size_t l) { return biases_[l]; }
  const Vector& bias(std::size_t l) const { return biases_[l]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
  }

  /// Batched forward pass; caches activations for `backward`.
  const Matrix& forward(const Matrix& batch) {
    if (batch.rows() != input_size()) throw ShapeError("DenseNet::forward: input size mismatch");
    activations_.resize(weights_.size() + 1);
    activations_[0] = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = weights_[l] * activations_[l];
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) {
        activations_[l + 1] = z.cwiseMax(Scalar(0));
      } else {
        apply_output(z);
        activations_[l + 1] = std::move(z);
      }
    }
    cached_ = true;
    return activations_.back();
  }

  /// Single-sample evaluation without touching the cache.
  Vector predict(const Vector& x) const { return evaluate(x).col(0); }

  /// Batched evaluation without touching the cache.
  Matrix evaluate(const Matrix& batch) const {
    if (batch.rows() != input_size()) throw ShapeError("DenseNet::evaluate: input size mismatch");
    Matrix a = batch;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) {
        a = z.cwiseMax(Scalar(0));
      } else {
        apply_output(z);
        a = std::move(z);
      }
    }
    return a;
  }

  /// Pre-activation of the output layer for the cached batch.
  Matrix output_preactivation() const {
    if (!cached_) throw std::logic_error("DenseNet::output_preactivation called without a cached forward pass");
    Matrix z = weights_.back() * activations_[activations_.size() - 2];
    z.colwise() += biases_.back();
    return z;
  }

  /// Reverse pass for the cached batch. `upstream` holds dL/d(output) per
  /// sample; parameter gradients are summed over the batch. `preactivation`,
  /// when given, is added to dL/d(output pre-activation) after the output
  /// activation's derivative.
  Gradients backward(const Matrix& upstream, const Matrix* preactivation = nullptr) const {
    if (!cached_) throw std::logic_error("DenseNet::backward called without a cached forward pass");
    const Matrix& out = activations_.back();
    if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
      throw ShapeError("DenseNet::backward: upstream gradient shape mismatch");
    Gradients g;
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    Matrix delta = upstream;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      switch (out_act_[static_cast<std::size_t>(r)]) {
        case Activation::identity: break;
        case Activation::relu:
          delta.row(r) = (out.row(r).array() > Scalar(0)).select(delta.row(r), Scalar(0));
          break;
        case Activation::tanh:
          delta.row(r).array() *= (Scalar(1) - out.row(r).array().square());
          break;
      }
    }
    if (preactivation != nullptr) {
      if (preactivation->rows() != delta.rows() || preactivation->cols() != delta.cols())
        throw ShapeError("DenseNet::backward: pre-activation gradient shape mismatch");
      delta += *preactivation;
    }
    for (std::size_t l = weights_.size(); l-- > 0;) {
      g.weights[l] = delta * activations_[l].transpose();
      g.biases[l] = delta.rowwise().sum();
      Matrix prev = weights_[l].transpose() * delta;
      if (l > 0) {
        delta = (activations_[l].array() > Scalar(0)).select(prev, Scalar(0));
      } else {
        g.input = std::move(prev);
      }
    }
    return g;
  }

  bool same_shape(const BasicDenseNet& o) const { return sizes_ == o.sizes_; }

  bool operator==(const BasicDenseNet& o) const {
    if (sizes_ != o.sizes_ || out_act_ != o.out_act_) return false;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      if (weights_[l] != o.weights_[l] || biases_[l] != o.biases_[l]) return false;
    return true;
  }

 private:
  void apply_output(Matrix& z) const {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      switch (out_act_[static_cast<std::size_t>(r)]) {
        case Activation::identity: break;
        case Activation::relu: z.row(r) = z.row(r).cwiseMax(Scalar(0)); break;
        case Activation::tanh: z.row(r) = z.row(r).array().tanh(); break;
      }
    }
  }

  std::vector<int> sizes_;
  std::vector<Activation> out_act_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
  std::vector<Matrix> activations_;
  bool cached_ = false;
};

using DenseNet = BasicDenseNet<double>;
using Matrix = DenseNet::Matrix;
using Vector = DenseNet::Vector;

// ---------------------------------------------------------------------------
// Adam

template <typename Scalar>
struct BasicAdamState {
  using Net = BasicDenseNet<Scalar>;
  std::vector<typename Net::Matrix> m_w, v_w;
  std::vector<typename Net::Vector> m_b, v_b;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  BasicAdamState() = default;
  BasicAdamState(const Net& net, double lr) : learning_rate(lr) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      m_w.push_back(Net::Matrix::Zero(net.weight(l).rows(), net.weight(l).cols()));
      v_w.push_back(m_w.back());
      m_b.push_back(Net::Vector::Zero(net.bias(l).size()));
      v_b.push_back(m_b.back());
    }
  }
};

using AdamState = BasicAdamState<double>;

template <typename Scalar>
bool gradients_finite(const typename BasicDenseNet<Scalar>::Gradients& g) {
  for (const auto& w : g.weights)
    if (!w.allFinite()) return false;
  for (const auto& b : g.biases)
    if (!b.allFinite()) return false;
  return true;
}

/// One Adam descent step. Returns false (and leaves everything untouched)
/// when any gradient entry is non-finite.
template <typename Scalar>
bool optimize_step(BasicDenseNet<Scalar>& net, const typename BasicDenseNet<Scalar>::Gradients& grads,
                   BasicAdamState<Scalar>& opt) {
  if (grads.weights.size() != net.num_layers() || grads.biases.size() != net.num_layers())
    throw ShapeError("optimize_step: gradient layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (grads.weights[l].rows() != net.weight(l).rows() || grads.weights[l].cols() != net.weight(l).cols() ||
        grads.biases[l].size() != net.bias(l).size())
      throw ShapeError("optimize_step: gradient shape mismatch");
  }
  if (!gradients_finite<Scalar>(grads)) return false;
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  const auto b1 = static_cast<Scalar>(opt.beta1);
  const auto b2 = static_cast<Scalar>(opt.beta2);
  const auto lr = static_cast<Scalar>(opt.learning_rate);
  const auto eps = static_cast<Scalar>(opt.epsilon);
  auto apply = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / Scalar(c1)) / ((v.array() / Scalar(c2)).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    apply(net.weight(l), opt.m_w[l], opt.v_w[l], grads.weights[l]);
    apply(net.bias(l), opt.m_b[l], opt.v_b[l], grads.biases[l]);
  }
  return true;
}

/// target <- tau * main + (1 - tau) * target, parameter-wise.
template <typename Scalar>
void soft_update(BasicDenseNet<Scalar>& target, const BasicDenseNet<Scalar>& main, double tau) {
  if (!target.same_shape(main)) throw ShapeError("soft_update: target and main shapes differ");
  const auto t = static_cast<Scalar>(tau);
  for (std::size_t l = 0; l < main.num_layers(); ++l) {
    target.weight(l) = t * main.weight(l) + (Scalar(1) - t) * target.weight(l);
    target.bias(l) = t * main.bias(l) + (Scalar(1) - t) * target.bias(l);
  }
}

/// FNV-1a over the raw bytes of every parameter.
template <typename Scalar>
std::uint64_t parameter_hash(const BasicDenseNet<Scalar>& net) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Scalar* data, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(Scalar); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    mix(net.weight(l).data(), net.weight(l).size());
    mix(net.bias(l).data(), net.bias(l).size());
  }
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Text format, exact round trip (C99 hex floats):
//   densenet 1
//   layers <n> <size_0> ... <size_{n-1}>
//   activations <one name per output unit>
//   then per layer l: "weight <l> <rows> <cols>" followed by rows*cols values
//   in row-major order, and "bias <l> <n>" followed by n values.

inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_exact(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ShapeError("checkpoint: malformed number '" + s + "'");
  return v;
}

inline void write_checkpoint(std::ostream& os, const DenseNet& net) {
  os << "densenet 1\nlayers " << net.layer_sizes().size();
  for (int n : net.layer_sizes()) os << ' ' << n;
  os << "\nactivations";
  for (auto a : net.output_activations()) os << ' ' << to_string(a);
  os << '\n';
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weight(l);
    os << "weight " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) os << (c ? " " : "") << format_exact(w(r, c));
      os << '\n';
    }
    const auto& b = net.bias(l);
    os << "bias " << l << ' ' << b.size() << '\n';
    for (Eigen::Index r = 0; r < b.size(); ++r) os << (r ? " " : "") << format_exact(b(r));
    os << '\n';
  }
}

inline DenseNet read_checkpoint(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "densenet" || version != 1) throw ShapeError("checkpoint: bad header");
  std::size_t n = 0;
  if (!(is >> tag >> n) || tag != "layers" || n < 2) throw ShapeError("checkpoint: bad layer line");
  std::vector<int> sizes(n);
  for (auto& s : sizes)
    if (!(is >> s)) throw ShapeError("checkpoint: bad layer sizes");
  if (!(is >> tag) || tag != "activations") throw ShapeError("checkpoint: missing activations");
  std::vector<Activation> acts(static_cast<std::size_t>(sizes.back()));
  for (auto& a : acts) {
    std::string name;
    if (!(is >> name)) throw ShapeError("checkpoint: truncated activations");
    a = activation_from_string(name);
  }
  DenseNet net(sizes, acts);
  std::string token;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> tag >> idx >> rows >> cols) || tag != "weight" || idx != l || rows != net.weight(l).rows() ||
        cols != net.weight(l).cols())
      throw ShapeError("checkpoint: bad weight block");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(is >> token)) throw ShapeError("checkpoint: truncated weights");
        net.weight(l)(r, c) = parse_exact(token);
      }
    Eigen::Index len = 0;
    if (!(is >> tag >> idx >> len) || tag != "bias" || idx != l || len != net.bias(l).size())
      throw ShapeError("checkpoint: bad bias block");
    for (Eigen::Index r = 0; r < len; ++r) {
      if (!(is >> token)) throw ShapeError("checkpoint: truncated biases");
      net.bias(l)(r) = parse_exact(token);
    }
  }
  return net;
}

inline void save_checkpoint(const std::string& path, const DenseNet& net) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, net);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

inline DenseNet load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

}  // namespace platoon_marl::nn
