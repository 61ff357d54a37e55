#include "fairenc/check/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace fairenc::check {

namespace {

long double plogp(long double p) { return p > 0.0L ? -p * std::log(p) : 0.0L; }

}  // namespace

std::vector<double> mi_oracle(const Matrix& weights, const std::vector<std::vector<std::size_t>>& groups,
                              const std::vector<std::size_t>& group_counts) {
  const std::size_t B = weights.rows(), C = weights.cols();
  std::vector<double> out;
  for (std::size_t m = 0; m < group_counts.size(); ++m) {
    // Codebook index in the outer loop, samples inner: a different order from the library.
    long double h_f = 0.0L;
    for (std::size_t c = 0; c < C; ++c) {
      long double p = 0.0L;
      for (std::size_t i = 0; i < B; ++i) p += weights(i, c);
      h_f += plogp(p / static_cast<long double>(B));
    }
    long double h_cond = 0.0L;
    for (std::size_t a = 0; a < group_counts[m]; ++a) {
      std::size_t n_a = 0;
      for (std::size_t i = 0; i < B; ++i) n_a += groups[i][m] == a ? 1 : 0;
      if (n_a == 0) continue;
      long double h = 0.0L;
      for (std::size_t c = 0; c < C; ++c) {
        long double num = 0.0L;
        for (std::size_t i = 0; i < B; ++i) num += (groups[i][m] == a ? 1.0L : 0.0L) * weights(i, c);
        h += plogp(num / static_cast<long double>(n_a));
      }
      h_cond += static_cast<long double>(n_a) / static_cast<long double>(B) * h;
    }
    out.push_back(static_cast<double>(h_f - h_cond));
  }
  return out;
}

double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  long double good = 0.0L;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) good += 1.0L;
      else if (scores[i] == scores[j]) good += 0.5L;
    }
  }
  return pairs == 0 ? -1.0 : static_cast<double>(good / static_cast<long double>(pairs));
}

double least_squares_probe_accuracy(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_test,
                                    const std::vector<int>& y_test) {
  const std::size_t n = x_train.rows(), d = x_train.cols() + 1;
  // Normal equations [X 1]^T [X 1] w = [X 1]^T y, augmented with the right-hand side.
  std::vector<std::vector<long double>> a(d, std::vector<long double>(d + 1, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < d; ++r) {
      const long double xr = r + 1 < d ? x_train(i, r) : 1.0L;
      for (std::size_t c = 0; c < d; ++c) a[r][c] += xr * (c + 1 < d ? x_train(i, c) : 1.0L);
      a[r][d] += xr * y_train[i];
    }
  }
  for (std::size_t r = 0; r < d; ++r) a[r][r] += 1e-9L;
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    std::swap(a[piv], a[col]);
    if (a[col][col] == 0.0L) throw std::runtime_error("least squares: singular system");
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const long double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= d; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<long double> w(d);
  for (std::size_t r = 0; r < d; ++r) w[r] = a[r][d] / a[r][r];

  std::size_t correct = 0;
  for (std::size_t i = 0; i < x_test.rows(); ++i) {
    long double z = w[d - 1];
    for (std::size_t c = 0; c + 1 < d; ++c) z += w[c] * x_test(i, c);
    correct += ((z >= 0.5L ? 1 : 0) == y_test[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(x_test.rows());
}

double spectral_norm(const Matrix& a, std::size_t iterations) {
  std::vector<double> v(a.cols(), 1.0), av(a.rows());
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
      av[r] = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) av[r] += a(r, c) * v[c];
    }
    std::vector<double> next(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) next[c] += a(r, c) * av[r];
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = next[c] / norm;
    sigma = std::sqrt(norm);  // ||A^T A v|| -> sigma^2 for unit v
  }
  return sigma;
}

}  // namespace fairenc::check
