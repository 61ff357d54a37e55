#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fairenc/check/oracles.hpp"
#include "fairenc/errors.hpp"
#include "fairenc/miestim.hpp"
#include "test_util.hpp"

using namespace fairenc;

namespace {

const AttributeSchema& binary_schema() {
  static const AttributeSchema s({{"a", {"x", "y"}}});
  return s;
}

Matrix random_rows(Rng& rng, std::size_t B, std::size_t C) {
  Matrix w(B, C);
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += (w(i, c) = std::exp(rng.normal()));
    for (std::size_t c = 0; c < C; ++c) w(i, c) /= s;
  }
  return w;
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy(std::vector<double>{1.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5}), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(entropy(std::vector<double>{0.45, 0.55}), 0.688139, 1e-6);
  EXPECT_THROW(entropy(std::vector<double>{1.1, -0.1}), DomainError);
}

TEST(Distributions, WorkedExample) {
  const Matrix w = Matrix::from_rows({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.1, 0.9}});
  const ProxyDistributions d = estimate_distributions(AssignmentMatrix{w}, {{0}, {0}, {1}, {1}}, binary_schema());
  EXPECT_NEAR(d.p_feature[0], 0.45, 1e-12);
  EXPECT_NEAR(d.p_feature[1], 0.55, 1e-12);
  EXPECT_NEAR(d.attributes[0].p_cond(0, 0), 0.7, 1e-12);
  EXPECT_NEAR(d.attributes[0].p_cond(1, 1), 0.8, 1e-12);
  EXPECT_NEAR(d.attributes[0].p_attr[0], 0.5, 1e-12);
  EXPECT_NEAR(mi_loss(d).value, 0.132506, 1e-6);
}

TEST(Distributions, UniformRows) {
  const Matrix w(6, 4, 0.25);
  const ProxyDistributions d = estimate_distributions(AssignmentMatrix{w}, {{0}, {1}, {0}, {1}, {1}, {1}}, binary_schema());
  for (double p : d.p_feature) EXPECT_NEAR(p, 0.25, 1e-15);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(d.attributes[0].p_cond(a, c), 0.25, 1e-15);
  }
}

TEST(Distributions, SingleGroupBatchMasksAbsentGroup) {
  Rng rng(1);
  const Matrix w = random_rows(rng, 5, 3);
  const ProxyDistributions d = estimate_distributions(AssignmentMatrix{w}, {{1}, {1}, {1}, {1}, {1}}, binary_schema());
  EXPECT_FALSE(d.attributes[0].present[0]);
  EXPECT_TRUE(d.attributes[0].present[1]);
  EXPECT_EQ(d.attributes[0].p_attr[1], 1.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(d.attributes[0].p_cond(1, c), d.p_feature[c], 1e-15);
  EXPECT_NEAR(mi_loss(d).value, 0.0, 1e-15);
}

TEST(MiLoss, IndependentAndSeparatingAssignments) {
  const Matrix same = Matrix::from_rows({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}});
  EXPECT_NEAR(mi_loss(estimate_distributions(AssignmentMatrix{same}, {{0}, {0}, {1}, {1}}, binary_schema())).value, 0.0,
              1e-12);
  const Matrix sep = Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  EXPECT_NEAR(mi_loss(estimate_distributions(AssignmentMatrix{sep}, {{0}, {0}, {1}, {1}}, binary_schema())).value,
              std::numbers::ln2, 1e-12);
}

TEST(MiLoss, BoundsAndOracleAgreement) {
  Rng rng(2);
  const AttributeSchema schema({{"a", {"p", "q", "r"}}, {"b", {"s", "t"}}});
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t B = 1 + rng.index(16), C = 1 + rng.index(8);
    const Matrix w = random_rows(rng, B, C);
    std::vector<GroupIndices> g(B, GroupIndices(2));
    for (auto& row : g) row = {rng.index(3), rng.index(2)};
    const ProxyDistributions d = estimate_distributions(AssignmentMatrix{w}, g, schema);
    const MiLoss l = mi_loss(d);
    const auto oracle = check::mi_oracle(w, g, {3, 2});
    for (std::size_t m = 0; m < 2; ++m) {
      EXPECT_NEAR(l.per_attribute[m], oracle[m], 1e-9);
      EXPECT_GE(l.per_attribute[m], -1e-9);
      EXPECT_LE(l.per_attribute[m], std::min(std::log(double(C)), entropy(d.attributes[m].p_attr)) + 1e-9);
    }
    double sum = 0.0;
    for (double p : d.p_feature) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(MiLoss, GroupRelabelingInvariant) {
  Rng rng(3);
  const AttributeSchema schema({{"a", {"p", "q", "r"}}});
  const Matrix w = random_rows(rng, 12, 5);
  std::vector<GroupIndices> g, h;
  const std::size_t perm[] = {2, 0, 1};
  for (std::size_t i = 0; i < 12; ++i) {
    g.push_back({rng.index(3)});
    h.push_back({perm[g.back()[0]]});
  }
  EXPECT_EQ(mi_loss(estimate_distributions(AssignmentMatrix{w}, g, schema)).value,
            mi_loss(estimate_distributions(AssignmentMatrix{w}, h, schema)).value);
}

TEST(MiLoss, RowDuplicationInvariant) {
  Rng rng(4);
  const Matrix w = random_rows(rng, 7, 4);
  std::vector<GroupIndices> g;
  for (std::size_t i = 0; i < 7; ++i) g.push_back({rng.index(2)});
  Matrix w2(14, 4);
  std::vector<GroupIndices> g2 = g;
  g2.insert(g2.end(), g.begin(), g.end());
  for (std::size_t i = 0; i < 14; ++i) {
    for (std::size_t c = 0; c < 4; ++c) w2(i, c) = w(i % 7, c);
  }
  const ProxyDistributions a = estimate_distributions(AssignmentMatrix{w}, g, binary_schema());
  const ProxyDistributions b = estimate_distributions(AssignmentMatrix{w2}, g2, binary_schema());
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a.p_feature[c], b.p_feature[c], 1e-12);
  EXPECT_NEAR(mi_loss(a).value, mi_loss(b).value, 1e-12);
}

TEST(MiLoss, AttributeMaskSelectsTerms) {
  Rng rng(5);
  const AttributeSchema schema({{"a", {"p", "q"}}, {"b", {"s", "t"}}});
  const Matrix w = random_rows(rng, 8, 3);
  std::vector<GroupIndices> g;
  for (std::size_t i = 0; i < 8; ++i) g.push_back({rng.index(2), rng.index(2)});
  const ProxyDistributions d = estimate_distributions(AssignmentMatrix{w}, g, schema);
  const MiLoss all = mi_loss(d), only_b = mi_loss(d, {false, true});
  EXPECT_EQ(only_b.per_attribute[0], 0.0);
  EXPECT_EQ(only_b.value, all.per_attribute[1]);
}

TEST(MiLoss, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  const AttributeSchema schema({{"a", {"p", "q", "r"}}, {"b", {"s", "t"}}});
  std::vector<GroupIndices> g;
  for (std::size_t i = 0; i < 10; ++i) g.push_back({rng.index(3), rng.index(2)});
  ParamStore p;
  p.add("w", random_rows(rng, 10, 6));
  const GradCheckReport r = check_gradients(
      [&](const ParamStore& q) {
        const MiLoss l = mi_loss(estimate_distributions(AssignmentMatrix{q.at("w")}, g, schema));
        ParamStore grad = q.zeros_like();
        grad.set("w", l.grad_weights);
        return LossEvaluation{l.value, std::move(grad)};
      },
      p);
  EXPECT_TRUE(r.passed) << r.max_relative_error << " at " << r.worst_coordinate;
}
