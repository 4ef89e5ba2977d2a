#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "halluc/nn/tensor.hpp"

namespace halluc::nn {

/// Non-owning handle on one trainable tensor and its gradient accumulator.
template <class S>
struct ParamRef {
  std::string name;
  Matrix<S>* value = nullptr;
  Matrix<S>* grad = nullptr;
};

template <class S>
using ParamList = std::vector<ParamRef<S>>;

template <class S>
void zero_grads(const ParamList<S>& params) {
  for (const auto& p : params) p.grad->setZero();
}

template <class S>
std::size_t parameter_count(const ParamList<S>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value->size());
  return n;
}

/// FNV-1a over the raw bytes of every parameter value, in list order.
template <class S>
std::uint64_t param_checksum(const ParamList<S>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data());
    const auto len = static_cast<std::size_t>(p.value->size()) * sizeof(S);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// Flattens all parameter values into one vector (list order, column-major).
template <class S>
Vector<S> flatten_values(const ParamList<S>& params) {
  Vector<S> out(static_cast<Eigen::Index>(parameter_count(params)));
  Eigen::Index at = 0;
  for (const auto& p : params) {
    out.segment(at, p.value->size()) = p.value->reshaped();
    at += p.value->size();
  }
  return out;
}

template <class S>
Vector<S> flatten_grads(const ParamList<S>& params) {
  Vector<S> out(static_cast<Eigen::Index>(parameter_count(params)));
  Eigen::Index at = 0;
  for (const auto& p : params) {
    out.segment(at, p.grad->size()) = p.grad->reshaped();
    at += p.grad->size();
  }
  return out;
}

}  // namespace halluc::nn
