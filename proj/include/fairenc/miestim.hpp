#pragma once

#include <span>
#include <vector>

#include "fairenc/fairdict.hpp"
#include "fairenc/schema.hpp"

namespace fairenc {

// Batch estimates for one attribute. Groups with no batch member are masked
// out (present[a] == false); their p_attr entry is 0 and their p_cond row is
// left at 0 and never read.
struct AttributeDistribution {
  std::vector<double> p_attr;          // |A_m|
  Matrix p_cond;                       // |A_m| x C
  std::vector<bool> present;           // |A_m|
  std::vector<std::size_t> row_group;  // B, group of each batch row
};

struct ProxyDistributions {
  std::size_t batch_size = 0;
  std::vector<double> p_feature;  // C
  std::vector<AttributeDistribution> attributes;
};

// attribute_values holds one GroupIndices per batch row.
ProxyDistributions estimate_distributions(const AssignmentMatrix& weights,
                                          const std::vector<GroupIndices>& attribute_values,
                                          const AttributeSchema& schema);

// -sum p ln p in nats; ln is evaluated at max(p, 1e-12) so 0 ln 0 = 0.
double entropy(std::span<const double> p);

struct MiLoss {
  double value = 0.0;
  std::vector<double> per_attribute;  // 0 for attributes outside the mask
  Matrix grad_weights;                // B x C, unconstrained partials
};

// sum over selected m of H(p_feature) - sum_{a present} p_attr(a) H(p_cond(a)).
// An empty mask selects every attribute.
MiLoss mi_loss(const ProxyDistributions& dist, const std::vector<bool>& attribute_mask = {});

}  // namespace fairenc
