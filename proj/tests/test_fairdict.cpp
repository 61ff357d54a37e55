#include <gtest/gtest.h>

#include <cmath>

#include "fairenc/fairdict.hpp"
#include "test_util.hpp"

using namespace fairenc;
using fairenc::testing::batch_of;
using fairenc::testing::random_matrix;

TEST(SoftAssign, Examples) {
  const Codebook cross{Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}}), 0.25};
  const AssignmentMatrix u = soft_assign(cross, batch_of(Matrix(1, 2)));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(u.weights(0, c), 0.25);

  const Codebook line{Matrix::from_rows({{0.0}, {1.0}}), 0.25};
  const AssignmentMatrix w = soft_assign(line, batch_of(Matrix::from_rows({{0.0}})));
  EXPECT_NEAR(w.weights(0, 0), 0.731059, 1e-6);
  EXPECT_NEAR(w.weights(0, 1), 0.268941, 1e-6);
  EXPECT_NEAR(reconstruct(line, w).vectors(0, 0), 0.268941, 1e-6);

  const Codebook one{Matrix::from_rows({{4.0, 4.0}}), 0.25};
  EXPECT_EQ(soft_assign(one, batch_of(Matrix::from_rows({{-3.0, 1.0}}))).weights(0, 0), 1.0);
}

TEST(SoftAssign, RowsAreStrictlyPositiveDistributions) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t B = 1 + rng.index(64), C = 1 + rng.index(128), D = 1 + rng.index(8);
    const Codebook cb{random_matrix(rng, C, D, 0.3), 0.25};
    const AssignmentMatrix w = soft_assign(cb, batch_of(random_matrix(rng, B, D, 0.3)));
    for (std::size_t i = 0; i < B; ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        EXPECT_GT(w.weights(i, c), 0.0);
        EXPECT_LE(w.weights(i, c), 1.0);
        sum += w.weights(i, c);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(SoftAssign, StableForFarEmbeddings) {
  const Codebook cb{Matrix::from_rows({{0.0}, {1.0}}), 0.25};
  const AssignmentMatrix w = soft_assign(cb, batch_of(Matrix::from_rows({{1e3}})));
  EXPECT_TRUE(w.weights.all_finite());
  EXPECT_NEAR(w.weights(0, 1), 1.0, 1e-12);
}

TEST(SoftAssign, TranslationEquivariance) {
  Rng rng(2);
  const Matrix f = random_matrix(rng, 6, 3), e = random_matrix(rng, 5, 3);
  const std::vector<double> t = {0.7, -1.1, 0.25};
  Matrix ft = f, et = e;
  for (std::size_t i = 0; i < ft.rows(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) ft(i, d) += t[d];
  }
  for (std::size_t i = 0; i < et.rows(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) et(i, d) += t[d];
  }
  const Codebook a{e, 0.25}, b{et, 0.25};
  const AssignmentMatrix wa = soft_assign(a, batch_of(f)), wb = soft_assign(b, batch_of(ft));
  for (std::size_t i = 0; i < wa.weights.size(); ++i) EXPECT_NEAR(wa.weights[i], wb.weights[i], 1e-12);
  const Matrix ra = reconstruct(a, wa).vectors, rb = reconstruct(b, wb).vectors;
  for (std::size_t i = 0; i < ra.rows(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(rb(i, d), ra(i, d) + t[d], 1e-12);
  }
}

TEST(Reconstruct, Examples) {
  const Codebook two{Matrix::from_rows({{2, 3}, {7, 7}}), 0.25};
  const EmbeddingBatch v = reconstruct(two, AssignmentMatrix{Matrix::from_rows({{1, 0}})});
  EXPECT_EQ(v.vectors, Matrix::from_rows({{2, 3}}));
  EXPECT_EQ(v.provenance, Provenance::reconstructed);
  const Codebook mid{Matrix::from_rows({{0, 0}, {2, 2}}), 0.25};
  EXPECT_EQ(reconstruct(mid, AssignmentMatrix{Matrix::from_rows({{0.5, 0.5}})}).vectors, Matrix::from_rows({{1, 1}}));
}

TEST(Reconstruct, LiesInConvexHullBoundingBox) {
  Rng rng(3);
  const Codebook cb{random_matrix(rng, 7, 4), 0.25};
  const Matrix r = reconstruct(cb, soft_assign(cb, batch_of(random_matrix(rng, 20, 4)))).vectors;
  for (std::size_t d = 0; d < 4; ++d) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t c = 0; c < 7; ++c) {
      lo = std::min(lo, cb.elements(c, d));
      hi = std::max(hi, cb.elements(c, d));
    }
    for (std::size_t i = 0; i < r.rows(); ++i) {
      EXPECT_GE(r(i, d), lo - 1e-12);
      EXPECT_LE(r(i, d), hi + 1e-12);
    }
  }
}

TEST(VqLoss, Examples) {
  const Codebook cb{Matrix(1, 2), 0.25};
  EXPECT_NEAR(vq_loss(cb, batch_of(Matrix::from_rows({{1, 0}})),
                      batch_of(Matrix::from_rows({{0, 0}}), Provenance::reconstructed))
                  .value,
              1.25, 1e-12);
  Rng rng(4);
  const Matrix f = random_matrix(rng, 5, 2);
  const VqLoss same = vq_loss(cb, batch_of(f), batch_of(f, Provenance::reconstructed));
  EXPECT_EQ(same.value, 0.0);
  for (double g : same.grad_embeddings.values()) EXPECT_EQ(g, 0.0);
  for (double g : same.grad_reconstructed.values()) EXPECT_EQ(g, 0.0);
}

TEST(VqLoss, NonNegativeAndStopGradientPartition) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Matrix f = random_matrix(rng, 4, 3), fh = random_matrix(rng, 4, 3);
    Codebook cb{random_matrix(rng, 2, 3), 0.25};
    const VqLoss a = vq_loss(cb, batch_of(f), batch_of(fh, Provenance::reconstructed));
    EXPECT_GT(a.value, 0.0);
    // Term 1 never reaches f directly; term 2 never reaches f_hat.
    cb.lambda_cmt = 0.0;
    const VqLoss b = vq_loss(cb, batch_of(f), batch_of(fh, Provenance::reconstructed));
    for (double g : b.grad_embeddings.values()) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(a.grad_reconstructed, b.grad_reconstructed);
    // d/df of lambda ||f - sg(f_hat)||^2 / B
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(a.grad_embeddings[i], 0.25 * 2.0 * (f[i] - fh[i]) / 4.0, 1e-15);
  }
}

TEST(VqLoss, CodebookPathGradientCheck) {
  Rng rng(6);
  ParamStore p;
  p.add("f", random_matrix(rng, 10, 4, 0.5));
  p.add(kCodebookGroup, random_matrix(rng, 6, 4, 0.5));
  const Codebook base{p.at(kCodebookGroup), 0.25};
  const Matrix sf = p.at("f");
  const Matrix sfh = reconstruct(base, soft_assign(base, batch_of(sf))).vectors;
  const LossFunction fn = [&](const ParamStore& q) {
    const Codebook cb{q.at(kCodebookGroup), 0.25};
    const EmbeddingBatch f = batch_of(q.at("f"));
    const AssignmentMatrix w = soft_assign(cb, f);
    const EmbeddingBatch fh = reconstruct(cb, w);
    const VqLoss l = vq_loss(cb, f, fh, sf, sfh);
    const ReconstructGrad rb = reconstruct_backward(cb, w, l.grad_reconstructed);
    const SoftAssignGrad sb = soft_assign_backward(cb, f, w, rb.weights);
    Matrix gf = l.grad_embeddings;
    gf += sb.embeddings;
    Matrix ge = rb.elements;
    ge += sb.elements;
    ParamStore g = q.zeros_like();
    g.set("f", gf);
    g.set(kCodebookGroup, ge);
    return LossEvaluation{l.value, std::move(g)};
  };
  const GradCheckReport r = check_gradients(fn, p);
  EXPECT_TRUE(r.passed) << r.max_relative_error << " at " << r.worst_coordinate;
}

TEST(Codebook, InitIsSeededAndSized) {
  Rng a(7), b(7);
  const Codebook x = init_codebook(64, 16, 0.5, 0.25, a), y = init_codebook(64, 16, 0.5, 0.25, b);
  EXPECT_EQ(x.elements, y.elements);
  EXPECT_EQ(x.size(), 64u);
  EXPECT_EQ(x.dim(), 16u);
  EXPECT_EQ(x.lambda_cmt, 0.25);
}
