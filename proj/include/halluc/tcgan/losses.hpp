#pragma once

#include <cmath>
#include <span>
#include <string>

#include "halluc/core/error.hpp"
#include "halluc/nn/tensor.hpp"

namespace halluc::tcgan {

using nn::Matrix;

/// log(1 + e^x) without overflow.
template <class S>
S softplus(S x) {
  return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

/// Which functional of the class posterior the class term uses.
enum class ClassObjective {
  log_likelihood,  // -mean log P(c | I)
  probability,     // 1 - mean P(c | I)
};

// Loss values come with the gradient of the loss with respect to the logits,
// shaped like the logits.

template <class S>
struct AdvDGrad {
  S value;
  Matrix<S> d_real, d_fake;  // 1 x N_real, 1 x N_fake
};

template <class S>
struct LogitGrad {
  S value;
  Matrix<S> d_logits;
};

namespace detail {
template <class Derived>
void require_logits(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.size() == 0) throw DimensionError(std::string(what) + ": empty logits");
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite logits");
}
}  // namespace detail

/// Discriminator BCE: mean softplus(-real) + mean softplus(fake).
template <class S>
AdvDGrad<S> adv_loss_D_grad(const Matrix<S>& real_logits, const Matrix<S>& fake_logits) {
  detail::require_logits(real_logits, "adv_loss_D");
  detail::require_logits(fake_logits, "adv_loss_D");
  const S nr = static_cast<S>(real_logits.size()), nf = static_cast<S>(fake_logits.size());
  AdvDGrad<S> out{S(0), Matrix<S>(real_logits.rows(), real_logits.cols()),
                  Matrix<S>(fake_logits.rows(), fake_logits.cols())};
  S real_sum = 0, fake_sum = 0;
  for (Eigen::Index i = 0; i < real_logits.size(); ++i) {
    const S x = real_logits.data()[i];
    real_sum += softplus(-x);
    out.d_real.data()[i] = -sigmoid(-x) / nr;
  }
  for (Eigen::Index i = 0; i < fake_logits.size(); ++i) {
    const S x = fake_logits.data()[i];
    fake_sum += softplus(x);
    out.d_fake.data()[i] = sigmoid(x) / nf;
  }
  out.value = real_sum / nr + fake_sum / nf;
  return out;
}

template <class S>
S adv_loss_D(const Matrix<S>& real_logits, const Matrix<S>& fake_logits) {
  return adv_loss_D_grad(real_logits, fake_logits).value;
}

/// Non-saturating generator loss: mean softplus(-fake).
template <class S>
LogitGrad<S> adv_loss_G_grad(const Matrix<S>& fake_logits) {
  detail::require_logits(fake_logits, "adv_loss_G");
  const S n = static_cast<S>(fake_logits.size());
  LogitGrad<S> out{S(0), Matrix<S>(fake_logits.rows(), fake_logits.cols())};
  S sum = 0;
  for (Eigen::Index i = 0; i < fake_logits.size(); ++i) {
    const S x = fake_logits.data()[i];
    sum += softplus(-x);
    out.d_logits.data()[i] = -sigmoid(-x) / n;
  }
  out.value = sum / n;
  return out;
}

template <class S>
S adv_loss_G(const Matrix<S>& fake_logits) {
  return adv_loss_G_grad(fake_logits).value;
}

/// Column-wise softmax of a K x N logit matrix.
template <class S>
Matrix<S> softmax_columns(const Matrix<S>& logits) {
  Matrix<S> p(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    const S mx = logits.col(n).maxCoeff();
    p.col(n) = (logits.col(n).array() - mx).exp().matrix();
    p.col(n) /= p.col(n).sum();
  }
  return p;
}

/// Class term over K x N logits and N labels in [0, K). With the default
/// objective this is the mean cross-entropy; ln K at uniform logits.
template <class S>
LogitGrad<S> class_loss_grad(const Matrix<S>& logits, std::span<const int> labels,
                             ClassObjective objective = ClassObjective::log_likelihood) {
  detail::require_logits(logits, "class_loss");
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols())
    throw DimensionError("class_loss: label count " + std::to_string(labels.size()) + " != logit columns " +
                         std::to_string(logits.cols()));
  const auto k = logits.rows();
  for (int c : labels)
    if (c < 0 || c >= k)
      throw DimensionError("class_loss: label " + std::to_string(c) + " outside [0, " + std::to_string(k) + ")");

  const S n = static_cast<S>(logits.cols());
  LogitGrad<S> out{S(0), Matrix<S>(k, logits.cols())};
  S sum = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto col = logits.col(j);
    const S mx = col.maxCoeff();
    const S lse = mx + std::log((col.array() - mx).exp().sum());
    const int y = labels[static_cast<std::size_t>(j)];
    const auto prob = (col.array() - lse).exp();
    if (objective == ClassObjective::log_likelihood) {
      sum += lse - col(y);
      out.d_logits.col(j) = prob.matrix() / n;
      out.d_logits(y, j) -= S(1) / n;
    } else {
      const S py = prob(y);
      sum += S(1) - py;
      // d(-p_y)/dz_i = -p_y (1[i=y] - p_i)
      out.d_logits.col(j) = (py * prob).matrix() / n;
      out.d_logits(y, j) -= py / n;
    }
  }
  out.value = sum / n;
  return out;
}

template <class S>
S class_loss(const Matrix<S>& logits, std::span<const int> labels,
             ClassObjective objective = ClassObjective::log_likelihood) {
  return class_loss_grad(logits, labels, objective).value;
}

}  // namespace halluc::tcgan
