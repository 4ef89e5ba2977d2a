#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"

using namespace halluc;
using halluc::testing::softplus_ref;
using Mat = Eigen::MatrixXd;

namespace {
Mat row(std::initializer_list<double> v) {
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}
}  // namespace

TEST(AdvLossD, SaturatesAtPerfectDiscriminator) {
  EXPECT_NEAR(tcgan::adv_loss_D<double>(row({20}), row({-20})), 0.0, 1e-6);
}

TEST(AdvLossD, IndifferentDiscriminatorCostsTwoLn2) {
  EXPECT_NEAR(tcgan::adv_loss_D<double>(row({0}), row({0})), 2.0 * std::log(2.0), 1e-12);
}

TEST(AdvLossD, MatchesSoftplusClosedForm) {
  // Oracle: 2 * log(1 + e^-1) evaluated directly.
  const double expected = 2.0 * softplus_ref(-1.0);
  EXPECT_NEAR(expected, 0.6265233, 1e-6);
  EXPECT_NEAR(tcgan::adv_loss_D<double>(row({1.0}), row({-1.0})), expected, 1e-12);
}

TEST(AdvLossG, ClosedForms) {
  EXPECT_NEAR(tcgan::adv_loss_G<double>(row({20})), 0.0, 1e-6);
  EXPECT_NEAR(tcgan::adv_loss_G<double>(row({0})), std::log(2.0), 1e-12);
  EXPECT_NEAR(tcgan::adv_loss_G<double>(row({-1.0})), softplus_ref(1.0), 1e-12);
  EXPECT_NEAR(softplus_ref(1.0), 1.3132617, 1e-6);
}

TEST(AdvLoss, StableForExtremeLogits) {
  EXPECT_TRUE(std::isfinite(tcgan::adv_loss_D<double>(row({-800}), row({800}))));
  EXPECT_NEAR(tcgan::adv_loss_G<double>(row({-800})), 800.0, 1e-9);
  EXPECT_TRUE(std::isfinite(tcgan::adv_loss_G<float>(Eigen::MatrixXf::Constant(1, 3, -200.0f))));
}

TEST(AdvLoss, RejectsNonFiniteAndEmptyInput) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(tcgan::adv_loss_D<double>(row({nan}), row({0})), NumericalError);
  EXPECT_THROW(tcgan::adv_loss_G<double>(row({INFINITY})), NumericalError);
  EXPECT_THROW(tcgan::adv_loss_G<double>(Mat(1, 0)), DimensionError);
}

TEST(ClassLoss, UniformLogitsGiveLnK) {
  const Mat logits = Mat::Zero(4, 3);
  const std::vector<int> labels{0, 2, 3};
  EXPECT_NEAR(tcgan::class_loss<double>(logits, labels), std::log(4.0), 1e-12);
}

TEST(ClassLoss, ConfidentCorrectIsNearZero) {
  Mat logits = Mat::Zero(3, 1);
  logits(1, 0) = 20;
  const std::vector<int> labels{1};
  EXPECT_NEAR(tcgan::class_loss<double>(logits, labels), 0.0, 1e-6);
}

TEST(ClassLoss, MatchesSoftmaxClosedForm) {
  Mat logits(2, 1);
  logits << 2, 0;
  const std::vector<int> labels{0};
  const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
  EXPECT_NEAR(expected, 0.1269280, 1e-6);
  EXPECT_NEAR(tcgan::class_loss<double>(logits, labels), expected, 1e-12);
}

TEST(ClassLoss, ProbabilityObjectiveIsOneMinusPosterior) {
  Mat logits(2, 1);
  logits << 2, 0;
  const std::vector<int> labels{0};
  const double p = std::exp(2.0) / (std::exp(2.0) + 1.0);
  EXPECT_NEAR(tcgan::class_loss<double>(logits, labels, tcgan::ClassObjective::probability), 1.0 - p, 1e-12);
}

TEST(ClassLoss, RejectsBadLabels) {
  const Mat logits = Mat::Zero(2, 2);
  const std::vector<int> out_of_range{0, 2};
  const std::vector<int> too_few{0};
  EXPECT_THROW(tcgan::class_loss<double>(logits, out_of_range), DimensionError);
  EXPECT_THROW(tcgan::class_loss<double>(logits, too_few), DimensionError);
  Mat bad = logits;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> ok{0, 1};
  EXPECT_THROW(tcgan::class_loss<double>(bad, ok), NumericalError);
}

TEST(LossProperties, NonNegativeAndFiniteOnRandomLogits) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Mat r = halluc::testing::uniform_matrix(1, 5, -30, 30, rng);
    const Mat f = halluc::testing::uniform_matrix(1, 4, -30, 30, rng);
    const Mat c = halluc::testing::uniform_matrix(3, 4, -30, 30, rng);
    const std::vector<int> labels{0, 1, 2, 1};
    for (double v : {tcgan::adv_loss_D<double>(r, f), tcgan::adv_loss_G<double>(f), tcgan::class_loss<double>(c, labels),
                     tcgan::class_loss<double>(c, labels, tcgan::ClassObjective::probability)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
    }
  }
}

class CompoundLoss : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(21);
    model = tcgan::init_model<double>(halluc::testing::micro_arch(), {4, 9}, 21);
    real.images = halluc::testing::uniform_matrix(1, 3 * 16, -1, 1, rng);
    real.text = halluc::testing::uniform_matrix(2, 3, -1, 1, rng);
    real.labels = {0, 1, 1};
    fake_text = halluc::testing::uniform_matrix(2, 2, -1, 1, rng);
    noise = halluc::testing::uniform_matrix(2, 2, -1, 1, rng);
    fakes = model.g.apply(fake_text, noise);
  }

  tcgan::GanModel<double> model;
  tcgan::Batch<double> real;
  Mat fake_text, noise, fakes;
  std::vector<int> intended{1, 0};
};

TEST_F(CompoundLoss, LossDIsSumOfPublishedComponents) {
  const auto parts = tcgan::loss_D(model.d, real, fakes, fake_text, 0.7);
  const auto both = model.d.apply(real.images, real.text);
  const auto fake_out = model.d.apply(fakes, fake_text);
  const double adv = tcgan::adv_loss_D<double>(both.realism, fake_out.realism);
  const double cls = tcgan::class_loss<double>(both.class_logits, real.labels);
  EXPECT_NEAR(parts.total, adv + 0.7 * cls, 1e-6 * std::abs(parts.total));
}

TEST_F(CompoundLoss, LambdaZeroReducesToAdversarialTerm) {
  const auto d = tcgan::loss_D(model.d, real, fakes, fake_text, 0.0);
  EXPECT_EQ(d.total, d.adversarial);
  const auto g = tcgan::loss_G(model.d, fakes, fake_text, intended, 0.0);
  EXPECT_EQ(g.total, g.adversarial);
}

TEST_F(CompoundLoss, LossGIsSumOfPublishedComponents) {
  const auto parts = tcgan::loss_G(model.d, fakes, fake_text, intended, 1.3);
  const auto out = model.d.apply(fakes, fake_text);
  const double expected = tcgan::adv_loss_G<double>(out.realism) + 1.3 * tcgan::class_loss<double>(out.class_logits, intended);
  EXPECT_NEAR(parts.total, expected, 1e-6 * std::abs(expected));
}

TEST_F(CompoundLoss, DeterministicAcrossCalls) {
  EXPECT_EQ(tcgan::loss_D(model.d, real, fakes, fake_text, 1.0).total,
            tcgan::loss_D(model.d, real, fakes, fake_text, 1.0).total);
}

TEST_F(CompoundLoss, TrainingPathAgreesWithValuePath) {
  auto params = model.d.params();
  nn::zero_grads(params);
  const auto train = tcgan::loss_D_backward(model.d, real, fakes, fake_text, 0.5);
  const auto value = tcgan::loss_D(model.d, real, fakes, fake_text, 0.5);
  EXPECT_NEAR(train.total, value.total, 1e-12);
}

TEST_F(CompoundLoss, RejectsNegativeWeight) {
  EXPECT_THROW(tcgan::loss_D(model.d, real, fakes, fake_text, -0.1), ConfigError);
  EXPECT_THROW(tcgan::loss_G(model.d, fakes, fake_text, intended, -1.0), ConfigError);
}
