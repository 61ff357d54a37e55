#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fairenc/schema.hpp"
#include "json.hpp"

namespace fairenc {

struct PredictionSet {
  std::vector<double> scores;
  std::vector<int> labels;     // 0 / 1
  std::vector<int> predicted;  // scores >= threshold
  std::vector<GroupIndices> attributes;
  double threshold = 0.5;

  std::size_t size() const { return scores.size(); }

  // Thresholds the scores.
  static PredictionSet from_scores(std::vector<double> scores, std::vector<int> labels,
                                   std::vector<GroupIndices> attributes, double threshold = 0.5);

  // Lengths, binary labels, re-derivable predictions and, if given, group
  // indices that fit the schema. Throws DimensionError / DomainError / SchemaError.
  void validate(const AttributeSchema* schema = nullptr) const;

  nlohmann::json to_json() const;
  static PredictionSet from_json(const nlohmann::json& j);

  bool operator==(const PredictionSet&) const = default;
};

// Rank-statistic AUC with ties counted one half. nullopt when either class is missing.
std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct SpreadResult {
  std::optional<double> value;  // max rate - min rate over the included groups
  std::vector<std::size_t> included;
  std::vector<std::size_t> excluded;  // present in the data but lacking the needed class
};

// Positive-prediction-rate spread over the groups of attribute m present in pred.
SpreadResult dpd(const PredictionSet& pred, std::size_t m);

struct EqualizedOddsResult {
  std::optional<double> value;
  SpreadResult tpr;
  SpreadResult fpr;
};

EqualizedOddsResult deodds(const PredictionSet& pred, std::size_t m);

// overall / (1 + sum_a |overall - group_a|). nullopt if any input is undefined.
std::optional<double> equity_scaled(std::optional<double> overall,
                                    const std::vector<std::optional<double>>& groups);
std::optional<double> es_auc(std::optional<double> overall_auc,
                             const std::vector<std::optional<double>>& group_aucs);
std::optional<double> es_f1(std::optional<double> overall_f1,
                            const std::vector<std::optional<double>>& group_f1s);

// Support-weighted mean of the per-class F1 over both label categories; 0/0 := 0.
double weighted_f1(const std::vector<int>& labels, const std::vector<int>& predicted);
double weighted_f1(const PredictionSet& pred);

struct GroupReport {
  std::string group;
  std::size_t count = 0;
  std::optional<double> auc;
  std::optional<double> f1;
  std::optional<double> positive_rate;
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::vector<std::string> flags;

  bool operator==(const GroupReport&) const = default;
};

struct AttributeReport {
  std::string attribute;
  std::optional<double> dpd;
  std::optional<double> deodds;
  std::optional<double> es_auc;
  std::optional<double> worst_group_auc;
  std::optional<double> es_f1;
  std::optional<double> worst_group_f1;
  std::vector<GroupReport> groups;
  std::vector<std::string> flags;

  bool operator==(const AttributeReport&) const = default;
};

struct FairnessReport {
  std::size_t n = 0;
  double threshold = 0.5;
  std::optional<double> auc;
  double weighted_f1 = 0.0;
  std::vector<AttributeReport> attributes;

  nlohmann::json to_json() const;
  static FairnessReport from_json(const nlohmann::json& j);
  // Header: attribute,metric,group,value,flag
  std::string to_csv() const;
  // DPD, DEOdds, AUC, ES-AUC, group-wise AUC, worst-group AUC, then the F1 counterparts.
  std::string to_table() const;

  bool operator==(const FairnessReport&) const = default;
};

// Group-level metrics skip groups with no members or a missing class and
// record a flag for each; ES-AUC and ES-F1 run over the defined groups.
FairnessReport build_report(const PredictionSet& pred, const AttributeSchema& schema);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace fairenc
