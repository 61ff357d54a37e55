#pragma once

#include "fairenc/matrix.hpp"

// Dense kernels used by the encoders, losses and codebook.
//
// The functions in `fairenc::kernels` split work across output rows with
// OpenMP. Every output element is accumulated by a single thread in the same
// order as the naive loops in `fairenc::kernels::serial`, so both produce
// bit-identical results regardless of thread count.
namespace fairenc::kernels {

// a (n x k) * b (k x m)
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T (k x n) * b (n x m)
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a (n x k) * b^T (k x m), b given as m x k
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// out(i, j) = ||x_i - y_j||^2
Matrix squared_distances(const Matrix& x, const Matrix& y);
// Row-wise L2 normalization; rows with norm below eps are divided by eps.
Matrix normalize_rows(const Matrix& x, double eps, std::vector<double>* norms = nullptr);

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix squared_distances(const Matrix& x, const Matrix& y);
Matrix normalize_rows(const Matrix& x, double eps, std::vector<double>* norms = nullptr);
}  // namespace serial

}  // namespace fairenc::kernels
