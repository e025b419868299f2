#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nptc/error.hpp"
#include "nptc/nptc_operator.hpp"
#include "nptc/tensor.hpp"

namespace nptc {

using Index = Eigen::Index;

/// Named trainable tensors with gradient buffers of the same shape.
template <typename T>
struct Parameters {
  struct Entry {
    std::string name;
    Tensor2<T> value;
    Tensor2<T> grad;
  };
  std::vector<Entry> entries;

  std::size_t add(std::string name, Index rows, Index cols) {
    entries.push_back({std::move(name), Tensor2<T>::Zero(rows, cols),
                       Tensor2<T>::Zero(rows, cols)});
    return entries.size() - 1;
  }
  Tensor2<T>& value(std::size_t id) { return entries[id].value; }
  const Tensor2<T>& value(std::size_t id) const { return entries[id].value; }
  Tensor2<T>& grad(std::size_t id) { return entries[id].grad; }

  void zero_grad() {
    for (auto& e : entries) e.grad.setZero();
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += static_cast<std::size_t>(e.value.size());
    return n;
  }
};

/// Uniform(-sqrt(6 / fan_in), +sqrt(6 / fan_in)).
template <typename T>
void init_uniform(Tensor2<T>& w, Index fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(dist(rng));
}

template <typename T>
Tensor2<T> relu(const Tensor2<T>& x) {
  return x.cwiseMax(T(0));
}

// Gradient through a ReLU given its output.
template <typename T>
Tensor2<T> relu_backward(const Tensor2<T>& y, const Tensor2<T>& dy) {
  return (y.array() > T(0)).select(dy, Tensor2<T>::Zero(dy.rows(), dy.cols()));
}

template <typename T>
void check_finite(const Tensor2<T>& x, const char* where) {
#ifndef NDEBUG
  if (!x.allFinite()) throw ShapeError(std::string("non-finite values at ") + where);
#else
  (void)x;
  (void)where;
#endif
}

/// Affine map x W + b with an optional trailing ReLU.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(Parameters<T>& params, const std::string& name, Index in, Index out,
         bool relu_after)
      : in_(in), out_(out), relu_(relu_after) {
    w_ = params.add(name + ".weight", in, out);
    b_ = params.add(name + ".bias", 1, out);
  }

  void init(Parameters<T>& params, std::mt19937_64& rng) const {
    init_uniform(params.value(w_), in_, rng);
    params.value(b_).setZero();
  }

  Tensor2<T> forward(const Parameters<T>& params, const Tensor2<T>& x) {
    if (x.cols() != in_)
      throw ShapeError("linear layer expects " + std::to_string(in_) +
                       " channels, got " + std::to_string(x.cols()));
    x_ = x;
    y_ = x * params.value(w_);
    y_.rowwise() += params.value(b_).row(0);
    if (relu_) y_ = relu(y_);
    return y_;
  }

  Tensor2<T> backward(Parameters<T>& params, const Tensor2<T>& dy) {
    const Tensor2<T> dz = relu_ ? relu_backward(y_, dy) : dy;
    params.grad(w_).noalias() += x_.transpose() * dz;
    params.grad(b_).row(0) += dz.colwise().sum();
    return dz * params.value(w_).transpose();
  }

  Index in() const { return in_; }
  Index out() const { return out_; }

 private:
  Index in_ = 0, out_ = 0;
  bool relu_ = false;
  std::size_t w_ = 0, b_ = 0;
  Tensor2<T> x_, y_;
};

/// Chain of Linear layers. Every layer is followed by a ReLU unless
/// `linear_last` is set, in which case the final one stays affine.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(Parameters<T>& params, const std::string& name,
      const std::vector<Index>& widths, bool linear_last) {
    if (widths.size() < 2) throw ConfigError("an MLP needs at least two widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool last = i + 2 == widths.size();
      layers_.emplace_back(params, name + "." + std::to_string(i), widths[i],
                           widths[i + 1], !(last && linear_last));
    }
  }
  void init(Parameters<T>& params, std::mt19937_64& rng) const {
    for (const auto& l : layers_) l.init(params, rng);
  }
  Tensor2<T> forward(const Parameters<T>& params, Tensor2<T> x) {
    for (auto& l : layers_) x = l.forward(params, x);
    return x;
  }
  Tensor2<T> backward(Parameters<T>& params, Tensor2<T> dy) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      dy = it->backward(params, dy);
    return dy;
  }

 private:
  std::vector<Linear<T>> layers_;
};

/// NPTC convolution layer: apply(op, W, x) + b, optional ReLU.
template <typename T>
class NptcConv {
 public:
  NptcConv() = default;
  NptcConv(Parameters<T>& params, const std::string& name, int tap_count,
           Index in, Index out, bool relu_after)
      : taps_(tap_count), in_(in), out_(out), relu_(relu_after) {
    w_ = params.add(name + ".weight", tap_count * in, out);
    b_ = params.add(name + ".bias", 1, out);
  }

  void init(Parameters<T>& params, std::mt19937_64& rng) const {
    init_uniform(params.value(w_), taps_ * in_, rng);
    params.value(b_).setZero();
  }

  Tensor2<T> forward(const Parameters<T>& params, const NptcOperator& op,
                     const Tensor2<T>& x) {
    if (op.tap_count() != taps_)
      throw ShapeError("operator has " + std::to_string(op.tap_count()) +
                       " taps, layer was built for " + std::to_string(taps_));
    if (x.cols() != in_) throw ShapeError("convolution channel mismatch");
    op_ = &op;
    x_ = x;
    y_ = apply(op, params.value(w_), x);
    y_.rowwise() += params.value(b_).row(0);
    if (relu_) y_ = relu(y_);
    return y_;
  }

  Tensor2<T> backward(Parameters<T>& params, const Tensor2<T>& dy) {
    const Tensor2<T> dz = relu_ ? relu_backward(y_, dy) : dy;
    auto adj = apply_adjoint(*op_, params.value(w_), x_, dz);
    params.grad(w_) += adj.weights_grad;
    params.grad(b_).row(0) += dz.colwise().sum();
    return std::move(adj.features_grad);
  }

 private:
  int taps_ = 1;
  Index in_ = 0, out_ = 0;
  bool relu_ = false;
  std::size_t w_ = 0, b_ = 0;
  const NptcOperator* op_ = nullptr;
  Tensor2<T> x_, y_;
};

/// x + Linear(c/2 -> c)(ReLU(conv(ReLU(Linear(c -> c/2)(x))))). The operator
/// must map a point set onto itself.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(Parameters<T>& params, const std::string& name, int tap_count,
                Index channels) {
    if (channels % 2 != 0 || channels < 2)
      throw ConfigError("residual block width " + std::to_string(channels) +
                        " must be even");
    const Index half = channels / 2;
    reduce_ = Linear<T>(params, name + ".reduce", channels, half, true);
    conv_ = NptcConv<T>(params, name + ".conv", tap_count, half, half, true);
    expand_ = Linear<T>(params, name + ".expand", half, channels, false);
  }

  void init(Parameters<T>& params, std::mt19937_64& rng) const {
    reduce_.init(params, rng);
    conv_.init(params, rng);
    expand_.init(params, rng);
  }

  Tensor2<T> forward(const Parameters<T>& params, const NptcOperator& op,
                     const Tensor2<T>& x) {
    if (op.out_size() != op.input_size)
      throw ShapeError("residual blocks need an operator onto its own points");
    Tensor2<T> h = reduce_.forward(params, x);
    h = conv_.forward(params, op, h);
    return x + expand_.forward(params, h);
  }

  Tensor2<T> backward(Parameters<T>& params, const Tensor2<T>& dy) {
    Tensor2<T> d = expand_.backward(params, dy);
    d = conv_.backward(params, d);
    return dy + reduce_.backward(params, d);
  }

 private:
  Linear<T> reduce_;
  NptcConv<T> conv_;
  Linear<T> expand_;
};

template <typename T>
struct MaxPoolResult {
  RowVector<T> values;
  std::vector<Index> argmax;  // first row attaining each column max
};

template <typename T>
MaxPoolResult<T> global_max_pool(const Tensor2<T>& f) {
  if (f.rows() == 0) throw ShapeError("global max pool of an empty tensor");
  MaxPoolResult<T> r;
  r.values = f.row(0);
  r.argmax.assign(static_cast<std::size_t>(f.cols()), 0);
  for (Index i = 1; i < f.rows(); ++i)
    for (Index c = 0; c < f.cols(); ++c)
      if (f(i, c) > r.values(c)) {
        r.values(c) = f(i, c);
        r.argmax[static_cast<std::size_t>(c)] = i;
      }
  return r;
}

template <typename T>
Tensor2<T> global_max_pool_backward(const RowVector<T>& grad,
                                    const std::vector<Index>& argmax,
                                    Index rows) {
  Tensor2<T> d = Tensor2<T>::Zero(rows, grad.cols());
  for (Index c = 0; c < grad.cols(); ++c)
    d(argmax[static_cast<std::size_t>(c)], c) = grad(c);
  return d;
}

template <typename T>
Tensor2<T> concat(const Tensor2<T>& a, const Tensor2<T>& b) {
  if (a.rows() != b.rows())
    throw ShapeError("cannot concatenate " + std::to_string(a.rows()) +
                     " rows with " + std::to_string(b.rows()));
  Tensor2<T> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

template <typename T>
Tensor2<T> softmax_rows(const Tensor2<T>& logits) {
  Tensor2<T> p(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const T m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor2<T> grad;
};

/// Mean over rows of -log softmax(logits)[label]; grad = (softmax - onehot) / rows.
template <typename T>
LossResult<T> cross_entropy(const Tensor2<T>& logits,
                            const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != logits.rows())
    throw ShapeError("label count does not match logit rows");
  LossResult<T> r;
  r.grad = softmax_rows(logits);
  const auto rows = static_cast<double>(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw ArgumentError("label " + std::to_string(y) + " outside [0, " +
                          std::to_string(logits.cols()) + ")");
    const double m = static_cast<double>(logits.row(i).maxCoeff());
    double sum = 0.0;
    for (Index c = 0; c < logits.cols(); ++c)
      sum += std::exp(static_cast<double>(logits(i, c)) - m);
    r.loss += (m + std::log(sum) - static_cast<double>(logits(i, y))) / rows;
    r.grad(i, y) -= T(1);
  }
  r.grad /= static_cast<T>(rows);
  return r;
}

}  // namespace nptc
