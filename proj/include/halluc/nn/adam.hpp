#pragma once

#include <cmath>
#include <vector>

#include "halluc/nn/params.hpp"

namespace halluc::nn {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Moment buffers are sized on construction
/// and bound to list order, so the list must not change afterwards.
template <class S>
class Adam {
 public:
  Adam(ParamList<S> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
      m_.push_back(Matrix<S>::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix<S>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void zero_grad() { zero_grads(params_); }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const S b1 = static_cast<S>(opts_.beta1), b2 = static_cast<S>(opts_.beta2);
    const S step_size = static_cast<S>(opts_.lr * std::sqrt(bc2) / bc1);
    const S eps = static_cast<S>(opts_.eps * std::sqrt(bc2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& g = *params_[i].grad;
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseAbs2();
      params_[i].value->array() -= step_size * m_[i].array() / (v_[i].array().sqrt() + eps);
    }
  }

  long steps_taken() const { return t_; }
  const ParamList<S>& params() const { return params_; }

 private:
  ParamList<S> params_;
  AdamOptions opts_;
  std::vector<Matrix<S>> m_, v_;
  long t_ = 0;
};

}  // namespace halluc::nn
