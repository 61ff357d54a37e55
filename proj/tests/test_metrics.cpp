#include <gtest/gtest.h>

#include <algorithm>

#include "fairenc/check/oracles.hpp"
#include "fairenc/errors.hpp"
#include "fairenc/metrics.hpp"
#include "fairenc/random.hpp"

using namespace fairenc;

namespace {

const AttributeSchema& one_attr() {
  static const AttributeSchema s({{"g", {"a", "b"}}});
  return s;
}

PredictionSet dpd_fixture() {
  return PredictionSet::from_scores({0.9, 0.8, 0.1, 0.2, 0.7, 0.3, 0.2, 0.1}, {1, 0, 1, 0, 1, 0, 1, 0},
                                    {{0}, {0}, {0}, {0}, {1}, {1}, {1}, {1}});
}

PredictionSet deodds_fixture() {
  return PredictionSet::from_scores({0.9, 0.1, 0.2, 0.3, 0.8, 0.7}, {1, 1, 0, 0, 1, 0}, {{0}, {0}, {0}, {0}, {1}, {1}});
}

}  // namespace

TEST(Auc, Examples) {
  EXPECT_EQ(*auc({0.9, 0.8, 0.3}, {1, 1, 0}), 1.0);
  EXPECT_EQ(*auc({0.5, 0.5}, {1, 0}), 0.5);
  EXPECT_EQ(*auc({0.8, 0.7, 0.4, 0.3}, {1, 0, 1, 0}), 0.75);
  EXPECT_FALSE(auc({0.1, 0.2}, {1, 1}).has_value());
  EXPECT_FALSE(auc({}, {}).has_value());
  EXPECT_THROW(auc({NAN, 0.2}, {1, 0}), DomainError);
}

TEST(Auc, ReversalWithoutTies) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s, neg;
    std::vector<int> y;
    for (int i = 0; i < 50; ++i) {
      s.push_back(rng.uniform());
      neg.push_back(-s.back());
      y.push_back(i % 3 == 0);
    }
    EXPECT_NEAR(*auc(neg, y), 1.0 - *auc(s, y), 1e-12);
  }
}

TEST(Auc, MatchesPairCounting) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 2 + rng.index(120);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.index(8));
      y[i] = rng.uniform() < 0.4;
    }
    const double o = check::auc_pair_oracle(s, y);
    if (o < 0) {
      EXPECT_FALSE(auc(s, y).has_value());
    } else {
      EXPECT_NEAR(*auc(s, y), o, 1e-12);
    }
  }
}

TEST(Dpd, Examples) {
  EXPECT_EQ(*dpd(dpd_fixture(), 0).value, 0.25);
  const PredictionSet equal = PredictionSet::from_scores({0.9, 0.1, 0.9, 0.1}, {1, 0, 1, 0}, {{0}, {0}, {1}, {1}});
  EXPECT_EQ(*dpd(equal, 0).value, 0.0);
  const PredictionSet single = PredictionSet::from_scores({0.9, 0.1}, {1, 0}, {{0}, {0}});
  EXPECT_FALSE(dpd(single, 0).value.has_value());
}

TEST(Deodds, Examples) {
  const EqualizedOddsResult r = deodds(deodds_fixture(), 0);
  EXPECT_EQ(*r.value, 1.0);
  EXPECT_EQ(*r.tpr.value, 0.5);
  EXPECT_EQ(*r.fpr.value, 1.0);
  const PredictionSet single = PredictionSet::from_scores({0.9, 0.1}, {1, 0}, {{1}, {1}});
  EXPECT_FALSE(deodds(single, 0).value.has_value());
}

TEST(Deodds, GroupWithoutPositivesExcludedFromTprSpread) {
  // group a: y=[0,0]; group b: y=[1,0]; group c: y=[1,0]
  const PredictionSet p = PredictionSet::from_scores({0.9, 0.1, 0.9, 0.1, 0.2, 0.7}, {0, 0, 1, 0, 1, 0},
                                                     {{0}, {0}, {1}, {1}, {2}, {2}});
  const EqualizedOddsResult r = deodds(p, 0);
  ASSERT_EQ(r.tpr.excluded.size(), 1u);
  EXPECT_EQ(r.tpr.excluded[0], 0u);
  EXPECT_EQ(*r.tpr.value, 1.0);
  const FairnessReport rep = build_report(p, AttributeSchema({{"g", {"a", "b", "c"}}}));
  const auto& flags = rep.attributes[0].groups[0].flags;
  EXPECT_NE(std::find(flags.begin(), flags.end(), "no_positives:excluded_from_tpr_spread"), flags.end());
}

TEST(EquityScaled, Examples) {
  EXPECT_EQ(*es_auc(0.8, {0.8, 0.8}), 0.8);
  EXPECT_NEAR(*es_auc(0.8, {0.9, 0.7}), 0.666667, 1e-6);
  EXPECT_NEAR(*es_f1(0.7, {0.8, 0.6}), 0.583333, 1e-6);
  EXPECT_EQ(*es_f1(0.6, {0.6, 0.6, 0.6}), 0.6);
  EXPECT_FALSE(es_auc(0.8, {0.9, std::nullopt}).has_value());
  EXPECT_FALSE(es_auc(std::nullopt, {0.9}).has_value());
}

TEST(EquityScaled, NeverExceedsOverall) {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    const double o = rng.uniform();
    std::vector<std::optional<double>> g;
    for (int k = 0; k < 3; ++k) g.push_back(rng.uniform());
    EXPECT_LE(*es_auc(o, g), o);
    EXPECT_LE(*es_f1(o, g), o);
  }
}

TEST(WeightedF1, Examples) {
  EXPECT_EQ(weighted_f1({1, 0, 1}, {1, 0, 1}), 1.0);
  EXPECT_NEAR(weighted_f1({1, 1, 0, 0}, {1, 0, 0, 0}), 0.733333, 1e-6);
  EXPECT_EQ(weighted_f1({1, 1, 0, 0}, {0, 0, 1, 1}), 0.0);
  EXPECT_EQ(weighted_f1({1, 1}, {1, 1}), 1.0);
  EXPECT_THROW(weighted_f1({}, {}), DomainError);
}

TEST(Report, PerfectFairClassifier) {
  const PredictionSet p = PredictionSet::from_scores({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}, {{0}, {0}, {1}, {1}});
  const FairnessReport r = build_report(p, one_attr());
  EXPECT_EQ(*r.auc, 1.0);
  EXPECT_EQ(*r.attributes[0].dpd, 0.0);
  EXPECT_EQ(*r.attributes[0].deodds, 0.0);
  EXPECT_EQ(*r.attributes[0].es_auc, 1.0);
  EXPECT_EQ(*r.attributes[0].worst_group_auc, 1.0);
}

TEST(Report, ReproducesFixtures) {
  EXPECT_EQ(*build_report(dpd_fixture(), one_attr()).attributes[0].dpd, 0.25);
  EXPECT_EQ(*build_report(deodds_fixture(), one_attr()).attributes[0].deodds, 1.0);
}

TEST(Report, JsonRoundTripAndCsv) {
  const FairnessReport r = build_report(deodds_fixture(), one_attr());
  EXPECT_EQ(FairnessReport::from_json(r.to_json()), r);
  EXPECT_EQ(FairnessReport::from_json(nlohmann::json::parse(r.to_json().dump())), r);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.rfind("attribute,metric,group,value,flag\n", 0), 0u);
  EXPECT_NE(csv.find("g,DPD,"), std::string::npos);
  EXPECT_NE(r.to_table().find("DEOdds"), std::string::npos);
}

TEST(Report, AbsentGroupIsFlaggedNotZeroed) {
  const PredictionSet p = PredictionSet::from_scores({0.9, 0.1, 0.8, 0.2}, {1, 0, 1, 0}, {{0}, {0}, {0}, {0}});
  const FairnessReport r = build_report(p, one_attr());
  EXPECT_FALSE(r.attributes[0].dpd.has_value());
  EXPECT_FALSE(r.attributes[0].groups[1].auc.has_value());
  EXPECT_EQ(r.attributes[0].groups[1].count, 0u);
  EXPECT_FALSE(r.attributes[0].groups[1].flags.empty());
  EXPECT_EQ(*r.attributes[0].es_auc, 1.0);
}

TEST(PredictionSetJson, RoundTripAndValidation) {
  const PredictionSet p = dpd_fixture();
  EXPECT_EQ(PredictionSet::from_json(p.to_json()), p);
  PredictionSet bad = p;
  bad.predicted[0] = 0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = p;
  bad.labels.pop_back();
  EXPECT_THROW(bad.validate(), DimensionError);
  bad = p;
  bad.attributes[0] = {5};
  EXPECT_THROW(bad.validate(&one_attr()), SchemaError);
}

TEST(MeanStdTest, SampleStandardDeviation) {
  const MeanStd m = mean_std({1.0, 2.0, 3.0});
  EXPECT_EQ(m.mean, 2.0);
  EXPECT_EQ(m.std, 1.0);
  EXPECT_EQ(mean_std({4.0}).std, 0.0);
}
