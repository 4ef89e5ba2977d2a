#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "halluc/core/error.hpp"

namespace halluc::nn {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Two activation layouts are used throughout:
//
//   feature layout  F x N          one column per sample
//   spatial layout  C x (N*H*W)    one column per (sample, row, col), the
//                                  column index being (n*H + y)*W + x
//
// Dense layers consume the feature layout; convolutions the spatial one.
// A 1x1 convolution is a dense layer applied to spatial columns.

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  int pixels() const { return height * width; }
  int size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// (C*H*W) x N  ->  C x (N*H*W). Feature rows are channel-major: row = c*H*W + p.
template <class S>
Matrix<S> features_to_spatial(const Matrix<S>& f, const Shape3& shape) {
  const int hw = shape.pixels();
  if (f.rows() != shape.size()) throw DimensionError("features_to_spatial: row count mismatch");
  const auto n = f.cols();
  Matrix<S> out(shape.channels, n * hw);
  for (Eigen::Index s = 0; s < n; ++s)
    for (int c = 0; c < shape.channels; ++c)
      for (int p = 0; p < hw; ++p) out(c, s * hw + p) = f(c * hw + p, s);
  return out;
}

/// Inverse of features_to_spatial.
template <class S>
Matrix<S> spatial_to_features(const Matrix<S>& x, const Shape3& shape) {
  const int hw = shape.pixels();
  if (x.rows() != shape.channels || x.cols() % hw != 0)
    throw DimensionError("spatial_to_features: shape mismatch");
  const auto n = x.cols() / hw;
  Matrix<S> out(shape.size(), n);
  for (Eigen::Index s = 0; s < n; ++s)
    for (int c = 0; c < shape.channels; ++c)
      for (int p = 0; p < hw; ++p) out(c * hw + p, s) = x(c, s * hw + p);
  return out;
}

/// Repeats every column of a feature-layout matrix `pixels` times, giving a
/// spatial-layout matrix whose every location carries the sample's vector.
template <class S>
Matrix<S> tile_columns(const Matrix<S>& f, int pixels) {
  Matrix<S> out(f.rows(), f.cols() * pixels);
  for (Eigen::Index s = 0; s < f.cols(); ++s)
    out.middleCols(s * pixels, pixels) = f.col(s).replicate(1, pixels);
  return out;
}

/// Adjoint of tile_columns: sums each group of `pixels` columns.
template <class S>
Matrix<S> untile_columns(const Matrix<S>& x, int pixels) {
  const auto n = x.cols() / pixels;
  Matrix<S> out(x.rows(), n);
  for (Eigen::Index s = 0; s < n; ++s) out.col(s) = x.middleCols(s * pixels, pixels).rowwise().sum();
  return out;
}

struct ConvGeometry {
  Shape3 in;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_height() const { return (in.height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (in.width + 2 * pad - kernel) / stride + 1; }
  int patch_size() const { return in.channels * kernel * kernel; }
};

/// Unfolds receptive fields: result is (C*k*k) x (N*Ho*Wo).
template <class S>
Matrix<S> im2col(const Matrix<S>& x, const ConvGeometry& g, Eigen::Index batch) {
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const int h = g.in.height, w = g.in.width;
  Matrix<S> cols = Matrix<S>::Zero(g.patch_size(), batch * ho * wo);
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const Eigen::Index col = (n * ho + oy) * wo + ox;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= w) continue;
            const Eigen::Index src = (n * h + iy) * w + ix;
            for (int c = 0; c < g.in.channels; ++c) cols((c * k + ky) * k + kx, col) = x(c, src);
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters-and-adds patches back onto the input grid.
template <class S>
Matrix<S> col2im(const Matrix<S>& cols, const ConvGeometry& g, Eigen::Index batch) {
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const int h = g.in.height, w = g.in.width;
  Matrix<S> x = Matrix<S>::Zero(g.in.channels, batch * h * w);
  for (Eigen::Index n = 0; n < batch; ++n) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const Eigen::Index col = (n * ho + oy) * wo + ox;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= w) continue;
            const Eigen::Index dst = (n * h + iy) * w + ix;
            for (int c = 0; c < g.in.channels; ++c) x(c, dst) += cols((c * k + ky) * k + kx, col);
          }
        }
      }
    }
  }
  return x;
}

/// Index of the largest entry of column `j`; ties go to the lowest index.
template <class S>
Eigen::Index argmax_column(const Matrix<S>& m, Eigen::Index j) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.rows(); ++i)
    if (m(i, j) > m(best, j)) best = i;
  return best;
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <class Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError(what + ": non-finite value");
}

}  // namespace halluc::nn
