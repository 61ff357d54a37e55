#pragma once

// Reference computations written independently of the library code they
// check: plain loops, no shared helpers, long double where sums matter.

#include <cstddef>
#include <vector>

#include "fairenc/matrix.hpp"

namespace fairenc::check {

// Per-attribute H(f) - H(f|A_m) from raw assignment weights (B x C) and group
// indices, summing over groups with at least one member.
std::vector<double> mi_oracle(const Matrix& weights, const std::vector<std::vector<std::size_t>>& groups,
                              const std::vector<std::size_t>& group_counts);

// Fraction of (positive, negative) pairs ordered correctly, ties one half.
// Returns -1 when a class is missing.
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels);

// Closed-form least-squares probe (normal equations with a bias column) fit on
// one set, thresholded at 0.5 on another; returns accuracy.
double least_squares_probe_accuracy(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_test,
                                    const std::vector<int>& y_test);

// Largest singular value by power iteration on A^T A.
double spectral_norm(const Matrix& a, std::size_t iterations = 500);

}  // namespace fairenc::check
