#pragma once

#include <cmath>
#include <random>
#include <string>

#include "halluc/core/rng.hpp"
#include "halluc/nn/params.hpp"
#include "halluc/nn/tensor.hpp"

namespace halluc::nn {

// Every layer offers three entry points:
//   apply(x) const   pure inference, no state touched
//   forward(x)       training pass; caches what backward needs
//   backward(dy)     accumulates parameter gradients, returns dL/dx
// Gradients accumulate (+=) so several backward passes can share one step.

template <class S>
void init_normal(Matrix<S>& m, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng));
}

/// y = W x + b on feature-layout (or spatial-layout, for 1x1 convs) input.
template <class S>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out)
      : weight(Matrix<S>::Zero(out, in)),
        bias(Matrix<S>::Zero(out, 1)),
        grad_weight(Matrix<S>::Zero(out, in)),
        grad_bias(Matrix<S>::Zero(out, 1)) {}

  int in_features() const { return static_cast<int>(weight.cols()); }
  int out_features() const { return static_cast<int>(weight.rows()); }

  void init(Rng& rng, double gain = 1.0) {
    init_normal(weight, rng, gain / std::sqrt(static_cast<double>(in_features())));
    bias.setZero();
  }

  Matrix<S> apply(const Matrix<S>& x) const {
    if (x.rows() != weight.cols()) throw DimensionError("Linear: input has wrong feature count");
    Matrix<S> y = weight * x;
    y.colwise() += bias.col(0);
    return y;
  }

  Matrix<S> forward(const Matrix<S>& x) {
    input_ = x;
    return apply(x);
  }

  Matrix<S> backward(const Matrix<S>& dy) {
    grad_weight.noalias() += dy * input_.transpose();
    grad_bias.col(0) += dy.rowwise().sum();
    return weight.transpose() * dy;
  }

  void collect(ParamList<S>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight, &grad_weight});
    out.push_back({prefix + ".bias", &bias, &grad_bias});
  }

  Matrix<S> weight, bias, grad_weight, grad_bias;

 private:
  Matrix<S> input_;
};

/// Strided 2-D convolution in spatial layout. Weight is C_out x (C_in*k*k).
template <class S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Shape3 in, int out_channels, int kernel, int stride, int pad)
      : geom_{in, kernel, stride, pad},
        weight(Matrix<S>::Zero(out_channels, in.channels * kernel * kernel)),
        bias(Matrix<S>::Zero(out_channels, 1)),
        grad_weight(Matrix<S>::Zero(out_channels, in.channels * kernel * kernel)),
        grad_bias(Matrix<S>::Zero(out_channels, 1)) {}

  Shape3 input_shape() const { return geom_.in; }
  Shape3 output_shape() const {
    return {static_cast<int>(weight.rows()), geom_.out_height(), geom_.out_width()};
  }

  void init(Rng& rng, double gain = 1.0) {
    init_normal(weight, rng, gain / std::sqrt(static_cast<double>(geom_.patch_size())));
    bias.setZero();
  }

  Matrix<S> apply(const Matrix<S>& x) const { return apply_cols(unfold(x)); }

  Matrix<S> forward(const Matrix<S>& x) {
    cols_ = unfold(x);
    batch_ = x.cols() / geom_.in.pixels();
    return apply_cols(cols_);
  }

  Matrix<S> backward(const Matrix<S>& dy) {
    grad_weight.noalias() += dy * cols_.transpose();
    grad_bias.col(0) += dy.rowwise().sum();
    Matrix<S> dcols = weight.transpose() * dy;
    return col2im(dcols, geom_, batch_);
  }

  void collect(ParamList<S>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight, &grad_weight});
    out.push_back({prefix + ".bias", &bias, &grad_bias});
  }

 private:
  Matrix<S> unfold(const Matrix<S>& x) const {
    if (x.rows() != geom_.in.channels || x.cols() % geom_.in.pixels() != 0)
      throw DimensionError("Conv2d: input shape mismatch");
    return im2col(x, geom_, x.cols() / geom_.in.pixels());
  }

  Matrix<S> apply_cols(const Matrix<S>& cols) const {
    Matrix<S> y = weight * cols;
    y.colwise() += bias.col(0);
    return y;
  }

  ConvGeometry geom_;
  Eigen::Index batch_ = 0;
  Matrix<S> cols_;

 public:
  Matrix<S> weight, bias, grad_weight, grad_bias;
};

/// Transposed convolution (fractionally strided), the adjoint of Conv2d with
/// the same geometry read from output to input. Weight is C_in x (C_out*k*k).
template <class S>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(Shape3 in, int out_channels, int kernel, int stride, int pad)
      : in_(in),
        geom_{{out_channels, (in.height - 1) * stride - 2 * pad + kernel,
               (in.width - 1) * stride - 2 * pad + kernel},
              kernel, stride, pad},
        weight(Matrix<S>::Zero(in.channels, out_channels * kernel * kernel)),
        bias(Matrix<S>::Zero(out_channels, 1)),
        grad_weight(Matrix<S>::Zero(in.channels, out_channels * kernel * kernel)),
        grad_bias(Matrix<S>::Zero(out_channels, 1)) {}

  Shape3 input_shape() const { return in_; }
  Shape3 output_shape() const { return geom_.in; }

  void init(Rng& rng, double gain = 1.0) {
    // Each output pixel receives about C_in*k*k/stride^2 contributions.
    const double fan = static_cast<double>(in_.channels * geom_.kernel * geom_.kernel) /
                       static_cast<double>(geom_.stride * geom_.stride);
    init_normal(weight, rng, gain / std::sqrt(fan));
    bias.setZero();
  }

  Matrix<S> apply(const Matrix<S>& x) const {
    check(x);
    const Eigen::Index n = x.cols() / in_.pixels();
    Matrix<S> cols = weight.transpose() * x;
    Matrix<S> y = col2im(cols, geom_, n);
    y.colwise() += bias.col(0);
    return y;
  }

  Matrix<S> forward(const Matrix<S>& x) {
    input_ = x;
    batch_ = x.cols() / in_.pixels();
    return apply(x);
  }

  Matrix<S> backward(const Matrix<S>& dy) {
    Matrix<S> dcols = im2col(dy, geom_, batch_);
    grad_weight.noalias() += input_ * dcols.transpose();
    grad_bias.col(0) += dy.rowwise().sum();
    return weight * dcols;
  }

  void collect(ParamList<S>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight, &grad_weight});
    out.push_back({prefix + ".bias", &bias, &grad_bias});
  }

 private:
  void check(const Matrix<S>& x) const {
    if (x.rows() != in_.channels || x.cols() % in_.pixels() != 0)
      throw DimensionError("ConvTranspose2d: input shape mismatch");
  }

  Shape3 in_;
  ConvGeometry geom_;  // geometry of the equivalent forward convolution
  Eigen::Index batch_ = 0;
  Matrix<S> input_;

 public:
  Matrix<S> weight, bias, grad_weight, grad_bias;
};

/// max(x, slope*x). slope = 0 gives ReLU.
template <class S>
class LeakyRelu {
 public:
  explicit LeakyRelu(S slope = S(0.2)) : slope_(slope) {}

  Matrix<S> apply(const Matrix<S>& x) const {
    return x.unaryExpr([s = slope_](S v) { return v > S(0) ? v : s * v; });
  }

  Matrix<S> forward(const Matrix<S>& x) {
    input_ = x;
    return apply(x);
  }

  Matrix<S> backward(const Matrix<S>& dy) const {
    return dy.binaryExpr(input_, [s = slope_](S g, S v) { return v > S(0) ? g : s * g; });
  }

  /// Distance of the closest cached input to the kink at zero.
  S kink_margin() const { return input_.size() ? input_.cwiseAbs().minCoeff() : S(1); }

 private:
  S slope_;
  Matrix<S> input_;
};

template <class S>
class Tanh {
 public:
  Matrix<S> apply(const Matrix<S>& x) const { return x.array().tanh().matrix(); }

  Matrix<S> forward(const Matrix<S>& x) {
    output_ = apply(x);
    return output_;
  }

  Matrix<S> backward(const Matrix<S>& dy) const {
    return (dy.array() * (S(1) - output_.array().square())).matrix();
  }

 private:
  Matrix<S> output_;
};

}  // namespace halluc::nn
