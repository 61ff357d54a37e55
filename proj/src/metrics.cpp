#include "fairenc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "fairenc/errors.hpp"

namespace fairenc {

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

struct Counts {
  std::size_t n = 0, pos = 0, neg = 0, pred_pos = 0, tp = 0, fp = 0;
};

// Counts per present group of attribute m, keyed by group index.
std::map<std::size_t, Counts> group_counts(const PredictionSet& pred, std::size_t m) {
  std::map<std::size_t, Counts> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (m >= pred.attributes[i].size()) throw DimensionError("attribute index out of range");
    Counts& c = out[pred.attributes[i][m]];
    ++c.n;
    const bool y = pred.labels[i] == 1, yh = pred.predicted[i] == 1;
    y ? ++c.pos : ++c.neg;
    if (yh) ++c.pred_pos;
    if (y && yh) ++c.tp;
    if (!y && yh) ++c.fp;
  }
  return out;
}

double ratio(std::size_t a, std::size_t b) { return static_cast<double>(a) / static_cast<double>(b); }

void finish_spread(SpreadResult& r, const std::vector<double>& rates) {
  if (rates.size() < 2) return;
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  r.value = *hi - *lo;
}

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v, const char* spec = "%.12g") {
  return v ? fmt(*v, spec) : std::string();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace

PredictionSet PredictionSet::from_scores(std::vector<double> scores, std::vector<int> labels,
                                         std::vector<GroupIndices> attributes, double threshold) {
  PredictionSet p;
  p.predicted.reserve(scores.size());
  for (double s : scores) p.predicted.push_back(s >= threshold ? 1 : 0);
  p.scores = std::move(scores);
  p.labels = std::move(labels);
  p.attributes = std::move(attributes);
  p.threshold = threshold;
  p.validate();
  return p;
}

void PredictionSet::validate(const AttributeSchema* schema) const {
  const std::size_t n = scores.size();
  if (labels.size() != n || predicted.size() != n || attributes.size() != n) {
    throw DimensionError("prediction set: scores, labels, predictions and attributes differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) throw DomainError("prediction set: non-finite score at " + std::to_string(i));
    if (labels[i] != 0 && labels[i] != 1) throw DomainError("prediction set: label not binary at " + std::to_string(i));
    if (predicted[i] != (scores[i] >= threshold ? 1 : 0)) {
      throw DomainError("prediction set: prediction at " + std::to_string(i) + " disagrees with threshold");
    }
    if (schema) schema->validate(attributes[i]);
  }
}

nlohmann::json PredictionSet::to_json() const {
  return {{"threshold", threshold}, {"scores", scores}, {"labels", labels},
          {"predicted", predicted}, {"attributes", attributes}};
}

PredictionSet PredictionSet::from_json(const nlohmann::json& j) {
  PredictionSet p;
  p.threshold = j.at("threshold").get<double>();
  p.scores = j.at("scores").get<std::vector<double>>();
  p.labels = j.at("labels").get<std::vector<int>>();
  p.predicted = j.at("predicted").get<std::vector<int>>();
  p.attributes = j.at("attributes").get<std::vector<GroupIndices>>();
  p.validate();
  return p;
}

std::optional<double> auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) {
    if (!std::isfinite(s)) throw DomainError("auc: non-finite score");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the number of correctly ordered pairs, ties contributing one: exact in integers.
  std::uint64_t twice = 0, neg_below = 0, n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] == 1 ? ++pos : ++neg;
      ++j;
    }
    twice += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
    n_pos += pos;
    n_neg += neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  return static_cast<double>(twice) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SpreadResult dpd(const PredictionSet& pred, std::size_t m) {
  SpreadResult r;
  std::vector<double> rates;
  for (const auto& [g, c] : group_counts(pred, m)) {
    r.included.push_back(g);
    rates.push_back(ratio(c.pred_pos, c.n));
  }
  finish_spread(r, rates);
  return r;
}

EqualizedOddsResult deodds(const PredictionSet& pred, std::size_t m) {
  EqualizedOddsResult r;
  std::vector<double> tprs, fprs;
  for (const auto& [g, c] : group_counts(pred, m)) {
    if (c.pos > 0) {
      r.tpr.included.push_back(g);
      tprs.push_back(ratio(c.tp, c.pos));
    } else {
      r.tpr.excluded.push_back(g);
    }
    if (c.neg > 0) {
      r.fpr.included.push_back(g);
      fprs.push_back(ratio(c.fp, c.neg));
    } else {
      r.fpr.excluded.push_back(g);
    }
  }
  finish_spread(r.tpr, tprs);
  finish_spread(r.fpr, fprs);
  if (r.tpr.value && r.fpr.value) {
    r.value = std::max(*r.tpr.value, *r.fpr.value);
  } else if (r.tpr.value) {
    r.value = r.tpr.value;
  } else if (r.fpr.value) {
    r.value = r.fpr.value;
  }
  return r;
}

std::optional<double> equity_scaled(std::optional<double> overall, const std::vector<std::optional<double>>& groups) {
  if (!overall) return std::nullopt;
  std::vector<double> dev;
  for (const auto& g : groups) {
    if (!g) return std::nullopt;
    dev.push_back(std::abs(*overall - *g));
  }
  // Summing in sorted order makes the result independent of group order.
  std::sort(dev.begin(), dev.end());
  double penalty = 0.0;
  for (double d : dev) penalty += d;
  return *overall / (1.0 + penalty);
}

std::optional<double> es_auc(std::optional<double> overall_auc, const std::vector<std::optional<double>>& group_aucs) {
  return equity_scaled(overall_auc, group_aucs);
}

std::optional<double> es_f1(std::optional<double> overall_f1, const std::vector<std::optional<double>>& group_f1s) {
  return equity_scaled(overall_f1, group_f1s);
}

double weighted_f1(const std::vector<int>& labels, const std::vector<int>& predicted) {
  if (labels.size() != predicted.size()) throw DimensionError("weighted_f1: labels and predictions differ in length");
  if (labels.empty()) throw DomainError("weighted_f1: empty input");
  std::size_t tp1 = 0, fp1 = 0, fn1 = 0, tn1 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] == 1, yh = predicted[i] == 1;
    if (y && yh) ++tp1;
    else if (!y && yh) ++fp1;
    else if (y && !yh) ++fn1;
    else ++tn1;
  }
  auto f1 = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t den = 2 * tp + fp + fn;
    return den == 0 ? 0.0 : ratio(2 * tp, den);
  };
  // Class 0 as the positive category swaps the roles of FP and FN.
  const double f1_pos = f1(tp1, fp1, fn1);
  const double f1_neg = f1(tn1, fn1, fp1);
  const std::size_t n = labels.size();
  return ratio(tp1 + fn1, n) * f1_pos + ratio(tn1 + fp1, n) * f1_neg;
}

double weighted_f1(const PredictionSet& pred) { return weighted_f1(pred.labels, pred.predicted); }

FairnessReport build_report(const PredictionSet& pred, const AttributeSchema& schema) {
  pred.validate(&schema);
  FairnessReport rep;
  rep.n = pred.size();
  rep.threshold = pred.threshold;
  rep.auc = auc(pred.scores, pred.labels);
  rep.weighted_f1 = pred.size() ? weighted_f1(pred) : 0.0;

  for (std::size_t m = 0; m < schema.size(); ++m) {
    AttributeReport ar;
    ar.attribute = schema[m].name;
    const auto counts = group_counts(pred, m);

    std::vector<std::vector<std::size_t>> members(schema.group_count(m));
    for (std::size_t i = 0; i < pred.size(); ++i) members[pred.attributes[i][m]].push_back(i);

    std::vector<std::optional<double>> defined_aucs, defined_f1s;
    bool auc_skipped = false;
    for (std::size_t g = 0; g < schema.group_count(m); ++g) {
      GroupReport gr;
      gr.group = schema[m].values[g];
      gr.count = members[g].size();
      if (gr.count == 0) {
        gr.flags.push_back("absent");
        auc_skipped = true;
        ar.groups.push_back(std::move(gr));
        continue;
      }
      const Counts& c = counts.at(g);
      std::vector<double> s;
      std::vector<int> y, yh;
      for (std::size_t i : members[g]) {
        s.push_back(pred.scores[i]);
        y.push_back(pred.labels[i]);
        yh.push_back(pred.predicted[i]);
      }
      gr.auc = auc(s, y);
      gr.f1 = weighted_f1(y, yh);
      gr.positive_rate = ratio(c.pred_pos, c.n);
      if (c.pos > 0) gr.tpr = ratio(c.tp, c.pos);
      else gr.flags.push_back("no_positives:excluded_from_tpr_spread");
      if (c.neg > 0) gr.fpr = ratio(c.fp, c.neg);
      else gr.flags.push_back("no_negatives:excluded_from_fpr_spread");
      if (gr.auc) defined_aucs.push_back(gr.auc);
      else {
        gr.flags.push_back("auc_undefined:single_class");
        auc_skipped = true;
      }
      defined_f1s.push_back(gr.f1);
      ar.groups.push_back(std::move(gr));
    }

    const SpreadResult d = dpd(pred, m);
    ar.dpd = d.value;
    if (!ar.dpd) ar.flags.push_back("dpd_undefined:fewer_than_two_groups");
    const EqualizedOddsResult eo = deodds(pred, m);
    ar.deodds = eo.value;
    if (!eo.tpr.value) ar.flags.push_back("tpr_spread_undefined");
    if (!eo.fpr.value) ar.flags.push_back("fpr_spread_undefined");
    if (!ar.deodds) ar.flags.push_back("deodds_undefined");

    if (!defined_aucs.empty()) {
      ar.es_auc = es_auc(rep.auc, defined_aucs);
      ar.worst_group_auc = **std::min_element(defined_aucs.begin(), defined_aucs.end());
    }
    if (auc_skipped) ar.flags.push_back("es_auc:skipped_groups");
    if (!ar.es_auc) ar.flags.push_back("es_auc_undefined");
    if (!defined_f1s.empty()) {
      ar.es_f1 = es_f1(rep.weighted_f1, defined_f1s);
      ar.worst_group_f1 = **std::min_element(defined_f1s.begin(), defined_f1s.end());
    }
    rep.attributes.push_back(std::move(ar));
  }
  return rep;
}

nlohmann::json FairnessReport::to_json() const {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : attributes) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : a.groups) {
      groups.push_back({{"group", g.group},
                        {"count", g.count},
                        {"auc", opt_json(g.auc)},
                        {"f1", opt_json(g.f1)},
                        {"positive_rate", opt_json(g.positive_rate)},
                        {"tpr", opt_json(g.tpr)},
                        {"fpr", opt_json(g.fpr)},
                        {"flags", g.flags}});
    }
    attrs.push_back({{"attribute", a.attribute},
                     {"dpd", opt_json(a.dpd)},
                     {"deodds", opt_json(a.deodds)},
                     {"es_auc", opt_json(a.es_auc)},
                     {"worst_group_auc", opt_json(a.worst_group_auc)},
                     {"es_f1", opt_json(a.es_f1)},
                     {"worst_group_f1", opt_json(a.worst_group_f1)},
                     {"groups", groups},
                     {"flags", a.flags}});
  }
  return {{"n", n}, {"threshold", threshold}, {"auc", opt_json(auc)}, {"weighted_f1", weighted_f1},
          {"attributes", attrs}};
}

FairnessReport FairnessReport::from_json(const nlohmann::json& j) {
  FairnessReport r;
  r.n = j.at("n").get<std::size_t>();
  r.threshold = j.at("threshold").get<double>();
  r.auc = opt_from(j.at("auc"));
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  for (const auto& ja : j.at("attributes")) {
    AttributeReport a;
    a.attribute = ja.at("attribute").get<std::string>();
    a.dpd = opt_from(ja.at("dpd"));
    a.deodds = opt_from(ja.at("deodds"));
    a.es_auc = opt_from(ja.at("es_auc"));
    a.worst_group_auc = opt_from(ja.at("worst_group_auc"));
    a.es_f1 = opt_from(ja.at("es_f1"));
    a.worst_group_f1 = opt_from(ja.at("worst_group_f1"));
    a.flags = ja.at("flags").get<std::vector<std::string>>();
    for (const auto& jg : ja.at("groups")) {
      GroupReport g;
      g.group = jg.at("group").get<std::string>();
      g.count = jg.at("count").get<std::size_t>();
      g.auc = opt_from(jg.at("auc"));
      g.f1 = opt_from(jg.at("f1"));
      g.positive_rate = opt_from(jg.at("positive_rate"));
      g.tpr = opt_from(jg.at("tpr"));
      g.fpr = opt_from(jg.at("fpr"));
      g.flags = jg.at("flags").get<std::vector<std::string>>();
      a.groups.push_back(std::move(g));
    }
    r.attributes.push_back(std::move(a));
  }
  return r;
}

std::string FairnessReport::to_csv() const {
  std::ostringstream os;
  os << "attribute,metric,group,value,flag\n";
  auto row = [&](const std::string& attr, const std::string& metric, const std::string& group,
                 const std::optional<double>& v, const std::vector<std::string>& flags) {
    std::string flag = join(flags, ";");
    if (!v && flag.empty()) flag = "undefined";
    os << attr << ',' << metric << ',' << group << ',' << fmt_opt(v) << ',' << flag << '\n';
  };
  row("all", "AUC", "", auc, {});
  row("all", "weighted_F1", "", weighted_f1, {});
  for (const auto& a : attributes) {
    row(a.attribute, "DPD", "", a.dpd, {});
    row(a.attribute, "DEOdds", "", a.deodds, {});
    row(a.attribute, "ES-AUC", "", a.es_auc, {});
    row(a.attribute, "worst_group_AUC", "", a.worst_group_auc, {});
    row(a.attribute, "ES-F1", "", a.es_f1, {});
    row(a.attribute, "worst_group_F1", "", a.worst_group_f1, {});
    for (const auto& g : a.groups) {
      row(a.attribute, "group_AUC", g.group, g.auc, g.flags);
      row(a.attribute, "group_F1", g.group, g.f1, g.flags);
    }
  }
  return os.str();
}

std::string FairnessReport::to_table() const {
  auto pct = [](const std::optional<double>& v) { return v ? fmt(100.0 * *v, "%.2f") : std::string("n/a"); };
  auto groupwise = [&](const AttributeReport& a, bool use_auc) {
    std::vector<std::string> parts;
    for (const auto& g : a.groups) parts.push_back(g.group + "=" + pct(use_auc ? g.auc : g.f1));
    return join(parts, " ");
  };
  std::ostringstream os;
  os << "n=" << n << "  threshold=" << fmt(threshold) << "  AUC=" << pct(auc)
     << "  weighted F1=" << pct(weighted_f1) << "  (values x100)\n\n";
  char line[512];
  std::snprintf(line, sizeof line, "%-12s %7s %7s %7s %7s  %-40s %7s\n", "attribute", "DPD", "DEOdds", "AUC",
                "ES-AUC", "group-wise AUC", "worst");
  os << line;
  for (const auto& a : attributes) {
    std::snprintf(line, sizeof line, "%-12s %7s %7s %7s %7s  %-40s %7s\n", a.attribute.c_str(), pct(a.dpd).c_str(),
                  pct(a.deodds).c_str(), pct(auc).c_str(), pct(a.es_auc).c_str(), groupwise(a, true).c_str(),
                  pct(a.worst_group_auc).c_str());
    os << line;
  }
  os << '\n';
  std::snprintf(line, sizeof line, "%-12s %7s %7s  %-40s %7s\n", "attribute", "F1", "ES-F1", "group-wise F1", "worst");
  os << line;
  for (const auto& a : attributes) {
    std::snprintf(line, sizeof line, "%-12s %7s %7s  %-40s %7s\n", a.attribute.c_str(), pct(weighted_f1).c_str(),
                  pct(a.es_f1).c_str(), groupwise(a, false).c_str(), pct(a.worst_group_f1).c_str());
    os << line;
  }
  for (const auto& a : attributes) {
    for (const auto& f : a.flags) os << "flag " << a.attribute << ": " << f << '\n';
    for (const auto& g : a.groups) {
      for (const auto& f : g.flags) os << "flag " << a.attribute << "/" << g.group << ": " << f << '\n';
    }
  }
  return os.str();
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  r.n = values.size();
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

}  // namespace fairenc
