#include "fairenc/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "fairenc/errors.hpp"

namespace fairenc::kernels {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

// Signed loop bounds keep the OpenMP canonical form happy on every compiler.
using Index = long long;

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(n, m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    double* ci = c.data() + i * m;
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(k, m);
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < static_cast<Index>(k); ++p) {
    double* cp = c.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aip = a.data()[i * k + p];
      const double* bi = b.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Matrix c(n, m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c.data()[i * m + j] = s;
    }
  }
  return c;
}

Matrix squared_distances(const Matrix& x, const Matrix& y) {
  require(x.cols() == y.cols(), "squared_distances: dimensions differ");
  const std::size_t n = x.rows(), d = x.cols(), m = y.rows();
  Matrix out(n, m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* xi = x.data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* yj = y.data() + j * d;
      double s = 0.0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = xi[p] - yj[p];
        s += diff * diff;
      }
      out.data()[i * m + j] = s;
    }
  }
  return out;
}

Matrix normalize_rows(const Matrix& x, double eps, std::vector<double>* norms) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix out(n, d);
  if (norms) norms->assign(n, 0.0);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double* xi = x.data() + i * d;
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p) s += xi[p] * xi[p];
    const double norm = std::sqrt(s);
    const double denom = std::max(norm, eps);
    for (std::size_t p = 0; p < d; ++p) out.data()[i * d + p] = xi[p] / denom;
    if (norms) (*norms)[i] = norm;
  }
  return out;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.cols(); ++p) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, p) * b(i, j);
      c(p, j) = s;
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix squared_distances(const Matrix& x, const Matrix& y) {
  require(x.cols() == y.cols(), "squared_distances: dimensions differ");
  Matrix out(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < x.cols(); ++p) {
        const double diff = x(i, p) - y(j, p);
        s += diff * diff;
      }
      out(i, j) = s;
    }
  }
  return out;
}

Matrix normalize_rows(const Matrix& x, double eps, std::vector<double>* norms) {
  Matrix out(x.rows(), x.cols());
  if (norms) norms->assign(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < x.cols(); ++p) s += x(i, p) * x(i, p);
    const double norm = std::sqrt(s);
    for (std::size_t p = 0; p < x.cols(); ++p) out(i, p) = x(i, p) / std::max(norm, eps);
    if (norms) (*norms)[i] = norm;
  }
  return out;
}

}  // namespace serial
}  // namespace fairenc::kernels
