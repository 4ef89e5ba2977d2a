#include <gtest/gtest.h>

#include "support/oracles.hpp"

using namespace halluc;
using halluc::testing::central_differences;
using halluc::testing::relative_error;
using halluc::testing::uniform_matrix;
using Mat = Eigen::MatrixXd;

namespace {

constexpr double kTol = 1e-4;

struct MicroProblem {
  tcgan::GanModel<double> model;
  tcgan::Batch<double> real;
  Mat fake_images, fake_text, noise;
  std::vector<int> intended;
  double lambda;
};

MicroProblem draw_problem(std::uint64_t seed) {
  Rng rng(seed);
  auto arch = halluc::testing::micro_arch();
  MicroProblem p{tcgan::init_model<double>(arch, {0, 1}, seed), {}, {}, {}, {}, {}, 0.0};
  std::uniform_int_distribution<int> n_dist(1, 4), lab(0, arch.num_classes - 1);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  const int nr = n_dist(rng), nf = n_dist(rng);
  p.real.images = uniform_matrix(arch.image.channels, nr * arch.image.pixels(), -1, 1, rng);
  p.real.text = uniform_matrix(arch.embed_dim, nr, -1, 1, rng);
  for (int i = 0; i < nr; ++i) p.real.labels.push_back(lab(rng));
  p.fake_images = uniform_matrix(arch.image.channels, nf * arch.image.pixels(), -1, 1, rng);
  p.fake_text = uniform_matrix(arch.embed_dim, nf, -1, 1, rng);
  p.noise = uniform_matrix(arch.noise_dim, nf, -2, 2, rng);
  for (int i = 0; i < nf; ++i) p.intended.push_back(lab(rng));
  p.lambda = lam(rng);
  return p;
}

}  // namespace

TEST(Gradients, AdvLossDMatchesCentralDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat real = uniform_matrix(1, 1 + trial % 5, -6, 6, rng);
    const Mat fake = uniform_matrix(1, 1 + trial % 3, -6, 6, rng);
    const auto g = tcgan::adv_loss_D_grad<double>(real, fake);
    const Mat nr = central_differences(real, [&](const Mat& x) { return tcgan::adv_loss_D<double>(x, fake); });
    const Mat nf = central_differences(fake, [&](const Mat& x) { return tcgan::adv_loss_D<double>(real, x); });
    EXPECT_LT(relative_error(g.d_real.reshaped(), nr.reshaped()), kTol);
    EXPECT_LT(relative_error(g.d_fake.reshaped(), nf.reshaped()), kTol);
  }
}

TEST(Gradients, AdvLossGMatchesCentralDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat fake = uniform_matrix(1, 1 + trial % 6, -6, 6, rng);
    const auto g = tcgan::adv_loss_G_grad<double>(fake);
    const Mat n = central_differences(fake, [](const Mat& x) { return tcgan::adv_loss_G<double>(x); });
    EXPECT_LT(relative_error(g.d_logits.reshaped(), n.reshaped()), kTol);
  }
}

TEST(Gradients, ClassLossMatchesCentralDifferencesForBothObjectives) {
  Rng rng(13);
  for (auto obj : {tcgan::ClassObjective::log_likelihood, tcgan::ClassObjective::probability}) {
    for (int trial = 0; trial < 50; ++trial) {
      const int k = 2 + trial % 4, n = 1 + trial % 5;
      const Mat logits = uniform_matrix(k, n, -4, 4, rng);
      std::vector<int> labels;
      for (int i = 0; i < n; ++i) labels.push_back((trial + i) % k);
      const auto g = tcgan::class_loss_grad<double>(logits, labels, obj);
      const Mat num =
          central_differences(logits, [&](const Mat& x) { return tcgan::class_loss<double>(x, labels, obj); });
      EXPECT_LT(relative_error(g.d_logits.reshaped(), num.reshaped()), kTol);
    }
  }
}

TEST(Gradients, MicroNetworkIsUnderFiveHundredParameters) {
  auto m = tcgan::init_model<double>(halluc::testing::micro_arch(), {0, 1}, 1);
  EXPECT_LE(nn::parameter_count(m.params()), 500u);
}

TEST(Gradients, LossDParameterGradientMatchesCentralDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 30; ++seed) {
    auto p = draw_problem(seed);
    auto params = p.model.d.params();
    nn::zero_grads(params);
    tcgan::loss_D_backward(p.model.d, p.real, p.fake_images, p.fake_text, p.lambda);
    if (p.model.d.kink_margin() < 1e-4) continue;
    const Eigen::VectorXd analytic = nn::flatten_grads(params);
    const auto numeric = central_differences(
        params, [&] { return tcgan::loss_D(p.model.d, p.real, p.fake_images, p.fake_text, p.lambda).total; });
    EXPECT_LT(relative_error(analytic, numeric), kTol) << "seed " << seed;
    ++checked;
  }
}

TEST(Gradients, LossGParameterGradientMatchesCentralDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 100; checked < 30; ++seed) {
    auto p = draw_problem(seed);
    auto params = p.model.params();
    nn::zero_grads(params);
    tcgan::loss_G_backward(p.model.g, p.model.d, p.fake_text, p.noise, p.intended, p.lambda);
    if (p.model.g.kink_margin() < 1e-4 || p.model.d.kink_margin() < 1e-4) continue;
    const Eigen::VectorXd analytic = nn::flatten_grads(params);
    const auto numeric = central_differences(params, [&] {
      return tcgan::loss_G(p.model.d, p.model.g.apply(p.fake_text, p.noise), p.fake_text, p.intended, p.lambda).total;
    });
    EXPECT_LT(relative_error(analytic, numeric), kTol) << "seed " << seed;
    ++checked;
  }
}

TEST(Gradients, ClassifierBackwardMatchesCentralDifferences) {
  Rng rng(5);
  classifier::ClassifierModel<double> model({2, 8, 8}, {3, 2}, {0, 1, 2});
  model.init(rng);
  const Mat images = uniform_matrix(2, 3 * 64, -1, 1, rng);
  const std::vector<int> labels{2, 0, 1};
  auto params = model.params();
  nn::zero_grads(params);
  const auto logits = model.forward(images);
  model.backward(tcgan::class_loss_grad<double>(logits, labels).d_logits);
  const Eigen::VectorXd analytic = nn::flatten_grads(params);
  const auto numeric =
      central_differences(params, [&] { return tcgan::class_loss<double>(model.apply(images), labels); });
  EXPECT_LT(relative_error(analytic, numeric), kTol);
}

TEST(Gradients, DiscriminatorInputGradientMatchesCentralDifferences) {
  auto p = draw_problem(77);
  Mat d_realism = Mat::Ones(1, p.fake_text.cols());
  Mat d_class = Mat::Ones(p.model.arch.num_classes, p.fake_text.cols());
  const auto out = p.model.d.forward(p.fake_images, p.fake_text);
  (void)out;
  const Mat analytic = p.model.d.backward(d_realism, d_class);
  const Mat numeric = central_differences(p.fake_images, [&](const Mat& x) {
    const auto o = p.model.d.apply(x, p.fake_text);
    return o.realism.sum() + o.class_logits.sum();
  });
  EXPECT_LT(relative_error(analytic.reshaped(), numeric.reshaped()), kTol);
}
