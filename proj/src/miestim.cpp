#include "fairenc/miestim.hpp"

#include <algorithm>
#include <cmath>

#include "fairenc/errors.hpp"

namespace fairenc {
namespace {

constexpr double kLogFloor = 1e-12;

// d/dp of -p ln max(p, floor)
double neg_plogp_derivative(double p) {
  return p >= kLogFloor ? -(std::log(p) + 1.0) : -std::log(kLogFloor);
}

double entropy_unchecked(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(std::max(v, kLogFloor));
  }
  return h;
}

}  // namespace

ProxyDistributions estimate_distributions(const AssignmentMatrix& weights,
                                          const std::vector<GroupIndices>& attribute_values,
                                          const AttributeSchema& schema) {
  const Matrix& w = weights.weights;
  const std::size_t B = w.rows(), C = w.cols();
  if (B == 0) throw DimensionError("estimate_distributions: empty batch");
  if (attribute_values.size() != B) throw DimensionError("estimate_distributions: one attribute row per sample");
  ProxyDistributions out;
  out.batch_size = B;
  out.p_feature.assign(C, 0.0);
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t c = 0; c < C; ++c) out.p_feature[c] += w(i, c);
  }
  for (double& p : out.p_feature) p *= inv_b;

  for (std::size_t m = 0; m < schema.size(); ++m) {
    const std::size_t G = schema.group_count(m);
    AttributeDistribution ad{std::vector<double>(G, 0.0), Matrix(G, C), std::vector<bool>(G, false),
                             std::vector<std::size_t>(B)};
    std::vector<std::size_t> counts(G, 0);
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t a = attribute_values[i].at(m);
      if (a >= G) throw SchemaError("estimate_distributions: group index out of range");
      ad.row_group[i] = a;
      ++counts[a];
      for (std::size_t c = 0; c < C; ++c) ad.p_cond(a, c) += w(i, c);
    }
    for (std::size_t a = 0; a < G; ++a) {
      if (counts[a] == 0) continue;
      ad.present[a] = true;
      ad.p_attr[a] = static_cast<double>(counts[a]) * inv_b;
      const double inv_n = 1.0 / static_cast<double>(counts[a]);
      for (std::size_t c = 0; c < C; ++c) ad.p_cond(a, c) *= inv_n;
    }
    out.attributes.push_back(std::move(ad));
  }
  return out;
}

double entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < -1e-12 || !std::isfinite(v)) throw DomainError("entropy: invalid probability entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("entropy: probabilities do not sum to 1");
  return entropy_unchecked(p);
}

MiLoss mi_loss(const ProxyDistributions& dist, const std::vector<bool>& attribute_mask) {
  const std::size_t B = dist.batch_size;
  const std::size_t C = dist.p_feature.size();
  const std::size_t M = dist.attributes.size();
  if (!attribute_mask.empty() && attribute_mask.size() != M) {
    throw DimensionError("mi_loss: attribute mask length != attribute count");
  }
  MiLoss out;
  out.per_attribute.assign(M, 0.0);
  out.grad_weights = Matrix(B, C);
  const double inv_b = 1.0 / static_cast<double>(B);

  const double h_feature = entropy_unchecked(dist.p_feature);
  std::vector<double> d_feature(C);
  for (std::size_t c = 0; c < C; ++c) d_feature[c] = neg_plogp_derivative(dist.p_feature[c]);

  for (std::size_t m = 0; m < M; ++m) {
    if (!attribute_mask.empty() && !attribute_mask[m]) continue;
    const auto& ad = dist.attributes[m];
    double h_cond = 0.0;
    Matrix d_cond(ad.p_cond.rows(), C);
    for (std::size_t a = 0; a < ad.present.size(); ++a) {
      if (!ad.present[a]) continue;
      h_cond += ad.p_attr[a] * entropy_unchecked(ad.p_cond.row(a));
      for (std::size_t c = 0; c < C; ++c) d_cond(a, c) = neg_plogp_derivative(ad.p_cond(a, c));
    }
    out.per_attribute[m] = h_feature - h_cond;
    out.value += out.per_attribute[m];

    // dH(f)/dw_ic = d_feature_c / B
    // d[p_attr(a) H(p_cond(a))]/dw_ic = p_attr(a) d_cond_ac / n_a = d_cond_ac / B  for i in a
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t a = ad.row_group[i];
      for (std::size_t c = 0; c < C; ++c) {
        out.grad_weights(i, c) += inv_b * (d_feature[c] - d_cond(a, c));
      }
    }
  }
  return out;
}

}  // namespace fairenc
