#pragma once

#include <span>
#include <vector>

#include "halluc/tcgan/losses.hpp"
#include "halluc/tcgan/networks.hpp"

namespace halluc::tcgan {

/// A batch in network layout. `labels` are class-head indices.
template <class S>
struct Batch {
  Matrix<S> images;  // spatial layout
  Matrix<S> text;    // d_T x N
  std::vector<int> labels;

  Eigen::Index size() const { return text.cols(); }
};

template <class S>
struct LossParts {
  S total = 0;
  S adversarial = 0;
  S classification = 0;
};

namespace detail {

template <class S>
Matrix<S> hcat(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

inline void require_weight(double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("class weight must be >= 0");
}

}  // namespace detail

/// L(D) = adv_loss_D(D(real), D(fake)) + lambda * class_loss(D_class(real), labels).
/// Real and fake share one discriminator pass. Fakes are paired with the
/// text they were generated from.
template <class S>
LossParts<S> loss_D(const Discriminator<S>& d, const Batch<S>& real, const Matrix<S>& fake_images,
                    const Matrix<S>& fake_text, S lambda, ClassObjective obj = ClassObjective::log_likelihood) {
  detail::require_weight(static_cast<double>(lambda));
  const auto out = d.apply(detail::hcat(real.images, fake_images), detail::hcat(real.text, fake_text));
  const auto nr = real.size();
  LossParts<S> p;
  p.adversarial = adv_loss_D<S>(out.realism.leftCols(nr), out.realism.rightCols(out.realism.cols() - nr));
  p.classification = class_loss<S>(out.class_logits.leftCols(nr), real.labels, obj);
  p.total = p.adversarial + lambda * p.classification;
  return p;
}

/// Training version of loss_D: accumulates D's parameter gradients.
template <class S>
LossParts<S> loss_D_backward(Discriminator<S>& d, const Batch<S>& real, const Matrix<S>& fake_images,
                             const Matrix<S>& fake_text, S lambda, ClassObjective obj = ClassObjective::log_likelihood) {
  detail::require_weight(static_cast<double>(lambda));
  const auto out = d.forward(detail::hcat(real.images, fake_images), detail::hcat(real.text, fake_text));
  const auto nr = real.size();
  const auto nf = out.realism.cols() - nr;
  const auto adv = adv_loss_D_grad<S>(out.realism.leftCols(nr), out.realism.rightCols(nf));

  Matrix<S> d_realism(1, out.realism.cols());
  d_realism << adv.d_real, adv.d_fake;
  Matrix<S> d_class = Matrix<S>::Zero(out.class_logits.rows(), out.class_logits.cols());
  LossParts<S> p;
  p.adversarial = adv.value;
  if (lambda != S(0)) {
    const auto cls = class_loss_grad<S>(out.class_logits.leftCols(nr), real.labels, obj);
    p.classification = cls.value;
    d_class.leftCols(nr) = lambda * cls.d_logits;
  } else {
    p.classification = class_loss<S>(out.class_logits.leftCols(nr), real.labels, obj);
  }
  p.total = p.adversarial + lambda * p.classification;
  d.backward(d_realism, d_class);
  return p;
}

/// L(G) = adv_loss_G(D(fake)) + lambda * class_loss(D_class(fake), intended).
/// Minimizing the class cross-entropy of the fakes maximizes the class
/// posterior of the intended label.
template <class S>
LossParts<S> loss_G(const Discriminator<S>& d, const Matrix<S>& fake_images, const Matrix<S>& fake_text,
                    std::span<const int> intended, S lambda, ClassObjective obj = ClassObjective::log_likelihood) {
  detail::require_weight(static_cast<double>(lambda));
  const auto out = d.apply(fake_images, fake_text);
  LossParts<S> p;
  p.adversarial = adv_loss_G<S>(out.realism);
  p.classification = class_loss<S>(out.class_logits, intended, obj);
  p.total = p.adversarial + lambda * p.classification;
  return p;
}

/// Training version of loss_G: runs G forward, D forward, and backpropagates
/// through D into G. D's gradients are accumulated too; callers updating only
/// G discard them.
template <class S>
LossParts<S> loss_G_backward(Generator<S>& g, Discriminator<S>& d, const Matrix<S>& text, const Matrix<S>& noise,
                             std::span<const int> intended, S lambda,
                             ClassObjective obj = ClassObjective::log_likelihood) {
  detail::require_weight(static_cast<double>(lambda));
  const Matrix<S> fakes = g.forward(text, noise);
  const auto out = d.forward(fakes, text);
  const auto adv = adv_loss_G_grad<S>(out.realism);
  Matrix<S> d_class = Matrix<S>::Zero(out.class_logits.rows(), out.class_logits.cols());
  LossParts<S> p;
  p.adversarial = adv.value;
  if (lambda != S(0)) {
    const auto cls = class_loss_grad<S>(out.class_logits, intended, obj);
    p.classification = cls.value;
    d_class = lambda * cls.d_logits;
  } else {
    p.classification = class_loss<S>(out.class_logits, intended, obj);
  }
  p.total = p.adversarial + lambda * p.classification;
  g.backward(d.backward(adv.d_logits, d_class));
  return p;
}

}  // namespace halluc::tcgan
