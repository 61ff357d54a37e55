#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fairenc/errors.hpp"
#include "fairenc/losses.hpp"
#include "fairenc/objective.hpp"
#include "test_util.hpp"

using namespace fairenc;
using fairenc::testing::batch_of;
using fairenc::testing::permute_rows;
using fairenc::testing::random_matrix;

namespace {

const ContrastiveConfig kUnit{1.0};

Matrix scaled(Matrix m, double s) {
  m *= s;
  return m;
}

}  // namespace

TEST(NtXent, Examples) {
  const Matrix eye = Matrix::from_rows({{1, 0}, {0, 1}});
  EXPECT_NEAR(nt_xent(batch_of(eye, Provenance::text1), batch_of(eye, Provenance::text2), kUnit).value,
              -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0)), 1e-12);
  EXPECT_NEAR(nt_xent(batch_of(eye, Provenance::text1), batch_of(eye, Provenance::text2), kUnit).value, 0.551445, 1e-6);
  Rng rng(1);
  const Matrix a = random_matrix(rng, 1, 5), b = random_matrix(rng, 1, 5);
  EXPECT_EQ(nt_xent(batch_of(a), batch_of(b), kUnit).value, 0.0);
}

TEST(NtXent, ScaleInvariant) {
  Rng rng(2);
  const Matrix a = random_matrix(rng, 8, 6), b = random_matrix(rng, 8, 6);
  const ContrastiveConfig cfg;
  EXPECT_NEAR(nt_xent(batch_of(a), batch_of(b), cfg).value,
              nt_xent(batch_of(scaled(a, 7.3)), batch_of(scaled(b, 7.3)), cfg).value, 1e-12);
}

TEST(NtXent, PermutationInvariant) {
  Rng rng(3);
  const Matrix a = random_matrix(rng, 6, 4), b = random_matrix(rng, 6, 4);
  const std::vector<std::size_t> perm = {5, 2, 0, 4, 1, 3};
  EXPECT_NEAR(nt_xent(batch_of(a), batch_of(b), ContrastiveConfig{}).value,
              nt_xent(batch_of(permute_rows(a, perm)), batch_of(permute_rows(b, perm)), ContrastiveConfig{}).value, 1e-9);
}

TEST(NtXent, RejectsMisalignedIds) {
  Rng rng(4);
  EmbeddingBatch a = batch_of(random_matrix(rng, 3, 2)), b = batch_of(random_matrix(rng, 3, 2));
  b.sample_ids = {0, 2, 1};
  EXPECT_THROW(nt_xent(a, b, kUnit), PairingError);
  EXPECT_THROW(nt_xent(a, batch_of(random_matrix(rng, 4, 2)), kUnit), PairingError);
  EXPECT_THROW(nt_xent(a, a, ContrastiveConfig{0.0}), ConfigError);
}

TEST(Alignment, Examples) {
  const Matrix eye = Matrix::from_rows({{1, 0}, {0, 1}});
  const AlignmentLoss l = alignment_loss(batch_of(eye, Provenance::text1), batch_of(eye),
                                         batch_of(eye, Provenance::reconstructed), kUnit, 10.0);
  EXPECT_NEAR(l.txt_img, 0.313262, 1e-6);
  EXPECT_NEAR(l.txt_rimg, l.txt_img, 1e-15);
  EXPECT_NEAR(l.value, 11.0 * l.txt_img, 1e-12);
  Rng rng(5);
  const Matrix t = random_matrix(rng, 1, 3), i = random_matrix(rng, 1, 3);
  EXPECT_EQ(alignment_loss(batch_of(t), batch_of(i), batch_of(i), kUnit, 10.0).txt_img, 0.0);
}

TEST(Alignment, ScaleAndPermutationInvariant) {
  Rng rng(6);
  const Matrix t = random_matrix(rng, 7, 5), f = random_matrix(rng, 7, 5), r = random_matrix(rng, 7, 5);
  const ContrastiveConfig cfg;
  const double base = alignment_loss(batch_of(t), batch_of(f), batch_of(r), cfg, 10.0).value;
  EXPECT_NEAR(alignment_loss(batch_of(scaled(t, 3.0)), batch_of(scaled(f, 0.2)), batch_of(scaled(r, 9.0)), cfg, 10.0).value,
              base, 1e-12);
  const std::vector<std::size_t> perm = {6, 0, 5, 1, 4, 2, 3};
  EXPECT_NEAR(alignment_loss(batch_of(permute_rows(t, perm)), batch_of(permute_rows(f, perm)),
                             batch_of(permute_rows(r, perm)), cfg, 10.0)
                  .value,
              base, 1e-9);
}

TEST(Discriminator, ShapesAndSoftmaxRows) {
  const DiscriminatorStack s(16, {256, 128, 64}, {3, 2, 2, 3});
  ParamStore p;
  Rng rng(7);
  s.init_params(p, rng);
  EXPECT_EQ(s.attribute_count(), 4u);
  const auto probs = predict_attributes(s, p, batch_of(random_matrix(rng, 5, 16)));
  ASSERT_EQ(probs.size(), 4u);
  for (std::size_t m = 0; m < 4; ++m) {
    EXPECT_EQ(probs[m].cols(), s.head_size(m));
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < probs[m].cols(); ++k) sum += probs[m](i, k);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
  const DiscriminatorStack back = DiscriminatorStack::from_store(p);
  EXPECT_EQ(back.attribute_count(), 4u);
  EXPECT_EQ(back.head_size(3), 3u);
}

TEST(Discriminator, ZeroWeightsGiveUniformRows) {
  const DiscriminatorStack s(4, {8, 8, 8}, {3, 2});
  ParamStore p;
  Rng rng(8);
  s.init_params(p, rng);
  for (const auto& n : p.names()) p.set(n, Matrix(p.at(n).rows(), p.at(n).cols()));
  const auto probs = s.predict(p, random_matrix(rng, 3, 4));
  for (double v : probs[0].values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  for (double v : probs[1].values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(AttributeCls, Examples) {
  const Matrix onehot = Matrix::from_rows({{1, 0}, {0, 1}});
  const AttributeClsLoss perfect = attribute_cls_loss({onehot}, {{0}, {1}});
  EXPECT_LE(perfect.value, 2.8e-11);
  EXPECT_GE(perfect.value, 0.0);
  EXPECT_NEAR(attribute_cls_loss({Matrix(1, 2, 0.5)}, {{0}}).value, std::numbers::ln2, 1e-12);
  std::vector<Matrix> uniform;
  for (std::size_t k : {3, 2, 2, 3}) uniform.emplace_back(1, k, 1.0 / static_cast<double>(k));
  EXPECT_NEAR(attribute_cls_loss(uniform, {{0, 1, 0, 2}}).value, 3.583519, 1e-6);
  const AttributeClsLoss wrong = attribute_cls_loss({onehot}, {{1}, {0}});
  EXPECT_LE(wrong.value, std::log(1e12) + 1e-9);
}

TEST(AttributeCls, MaskDropsAttributes) {
  std::vector<Matrix> uniform = {Matrix(2, 3, 1.0 / 3.0), Matrix(2, 2, 0.5)};
  const AttributeClsLoss l = attribute_cls_loss(uniform, {{0, 1}, {2, 0}}, {false, true});
  EXPECT_NEAR(l.value, std::numbers::ln2, 1e-12);
  for (double g : l.grad_logits[0].values()) EXPECT_EQ(g, 0.0);
}

TEST(Adversarial, ReversesSign) {
  Rng rng(9);
  const Matrix g = random_matrix(rng, 4, 3);
  const AdversarialTerm t = adversarial_coupling(1.7, g, 1.0);
  EXPECT_EQ(t.value, -1.7);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(t.grad_features[i], -g[i]);
  const AdversarialTerm h = adversarial_coupling(1.7, g, 0.5);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(h.grad_features[i], -0.5 * g[i], 1e-15);
}

TEST(TotalLoss, LinearCombination) {
  EXPECT_NEAR(total_loss({0.5, 2.0, 0.1, 0.3, -0.7}, LossWeights{}), 0.22, 1e-12);
  EXPECT_EQ(total_loss({0.0, 5.0, 0.0, 3.0, -2.0}, LossWeights{0.0, 0.0, 0.0, 10.0}), 0.0);
  EXPECT_THROW(total_loss({NAN, 0, 0, 0, 0}, LossWeights{}), NumericalError);
}

namespace {

struct ObjectiveFixture {
  AttributeSchema schema = AttributeSchema::two_attribute_default();
  ParamStore model, disc;
  BatchInputs batch;
  EncoderConfig ec;

  explicit ObjectiveFixture(std::uint64_t seed, std::size_t B = 8) {
    Rng rng(seed);
    init_encoder_params(model, ec, rng);
    model.add(kCodebookGroup, init_codebook(16, ec.embed_dim, 0.5, 0.25, rng).elements);
    DiscriminatorStack(ec.embed_dim, {256, 128, 64}, {3, 2}).init_params(disc, rng);
    batch.image_features = random_matrix(rng, B, ec.d_in);
    batch.text1_tokens = Matrix(B, ec.vocab_dim);
    batch.text2_tokens = Matrix(B, ec.vocab_dim);
    for (std::size_t i = 0; i < B; ++i) {
      for (int t = 0; t < 10; ++t) {
        batch.text1_tokens(i, rng.index(ec.vocab_dim)) += 1.0;
        batch.text2_tokens(i, rng.index(ec.vocab_dim)) += 1.0;
      }
      batch.ids.push_back(static_cast<std::int64_t>(i));
      batch.attributes.push_back({rng.index(3), rng.index(2)});
    }
  }
};

}  // namespace

TEST(Objective, BundleIdentities) {
  ObjectiveFixture fx(10);
  const ObjectiveConfig cfg;
  const LossBundle b = evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, cfg);
  EXPECT_EQ(b.adv, -b.att_cls);
  EXPECT_GE(b.att_cls, 0.0);
  EXPECT_NEAR(b.align, b.txt_img + 10.0 * b.txt_rimg, 1e-12);
  EXPECT_NEAR(b.total, b.align + 0.01 * b.txt_txt + b.vq + b.mi + b.adv, 1e-12);
  EXPECT_EQ(b.named().size(), 9u);
  for (const auto& n : b.discriminator_grad.names()) {
    for (double v : b.discriminator_grad.at(n).values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Objective, NoAdversaryMeansDiscriminatorIrrelevant) {
  ObjectiveFixture fx(11);
  ObjectiveConfig cfg;
  cfg.weights.adv = 0.0;
  ParamStore other;
  Rng rng(99);
  DiscriminatorStack(16, {256, 128, 64}, {3, 2}).init_params(other, rng);
  EXPECT_EQ(evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, cfg).model_grad,
            evaluate_objective(fx.model, other, fx.batch, fx.schema, cfg).model_grad);
}

TEST(Objective, AdversarialGradientIsNegatedClassifierGradient) {
  ObjectiveFixture fx(12);
  ObjectiveConfig off, on;
  off.weights.adv = 0.0;
  on.weights.adv = 1.0;
  const LossBundle a = evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, off);
  const LossBundle b = evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, on);
  // Difference is the reversed classifier gradient through the image encoder.
  const Mlp img = Mlp::from_store(fx.model, kImagePrefix);
  MlpTrace trace;
  const Matrix f = img.forward(fx.model, fx.batch.image_features, &trace);
  const DiscriminatorStack stack = DiscriminatorStack::from_store(fx.disc);
  DiscriminatorStack::Trace dt;
  const AttributeClsLoss cls = attribute_cls_loss(stack.predict(fx.disc, f, &dt), fx.batch.attributes);
  const Matrix df = stack.backward(fx.disc, dt, cls.grad_logits, nullptr);
  ParamStore enc = fx.model.zeros_like();
  img.backward(fx.model, trace, df, &enc);
  for (const auto& n : fx.model.names_with_prefix("img")) {
    const Matrix& ga = a.model_grad.at(n);
    const Matrix& gb = b.model_grad.at(n);
    for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(gb[i] - ga[i], -enc.at(n)[i], 1e-12) << n;
  }
  for (const auto& n : fx.model.names_with_prefix("txt")) EXPECT_EQ(a.model_grad.at(n), b.model_grad.at(n));
}

TEST(Objective, AblationReductionToAlignmentPlusVq) {
  ObjectiveFixture fx(13);
  ObjectiveConfig cfg;
  cfg.weights = LossWeights{0.0, 0.0, 0.0, 0.0};
  const LossBundle b = evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, cfg);
  EXPECT_NEAR(b.total, b.txt_img + b.vq, 1e-12);
}

TEST(Objective, TotalGradientMatchesFiniteDifferences) {
  ObjectiveFixture fx(14);
  const ObjectiveConfig cfg;
  const Codebook cb{fx.model.at(kCodebookGroup), cfg.lambda_cmt};
  const Matrix f0 = encode_image(fx.model, fx.batch.image_features).vectors;
  const StopGradTargets frozen{f0, reconstruct(cb, soft_assign(cb, batch_of(f0))).vectors};
  GradCheckOptions o;
  o.max_coordinates = 200;
  o.seed = 3;
  const GradCheckReport r = check_gradients(
      [&](const ParamStore& q) {
        LossBundle b = evaluate_objective(q, fx.disc, fx.batch, fx.schema, cfg, &frozen);
        return LossEvaluation{b.total, std::move(b.model_grad)};
      },
      fx.model, o);
  EXPECT_TRUE(r.passed) << r.max_relative_error << " at " << r.worst_coordinate;
}

TEST(Objective, StopAssignmentAblationOnlyChangesImagePath) {
  ObjectiveFixture fx(15);
  ObjectiveConfig a, b;
  b.stop_vq_assignment_grad = true;
  const LossBundle x = evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, a);
  const LossBundle y = evaluate_objective(fx.model, fx.disc, fx.batch, fx.schema, b);
  EXPECT_EQ(x.total, y.total);
  for (const auto& n : fx.model.names_with_prefix("txt")) EXPECT_EQ(x.model_grad.at(n), y.model_grad.at(n));
  EXPECT_NE(x.model_grad.at("img.0.w"), y.model_grad.at("img.0.w"));
}

TEST(Objective, DiscriminatorStepGradientMatchesFiniteDifferences) {
  ObjectiveFixture fx(16);
  const Matrix f = encode_image(fx.model, fx.batch.image_features).vectors;
  GradCheckOptions o;
  o.max_coordinates = 200;
  const GradCheckReport r = check_gradients(
      [&](const ParamStore& q) {
        DiscriminatorEvaluation e = evaluate_discriminator(q, f, fx.batch.attributes);
        return LossEvaluation{e.att_cls, std::move(e.grad)};
      },
      fx.disc, o);
  EXPECT_TRUE(r.passed) << r.max_relative_error << " at " << r.worst_coordinate;
}
