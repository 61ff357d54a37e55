#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "fairenc/encoders.hpp"
#include "fairenc/matrix.hpp"
#include "fairenc/random.hpp"

namespace fairenc::testing {

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline EmbeddingBatch batch_of(Matrix v, Provenance p = Provenance::image) {
  std::vector<std::int64_t> ids(v.rows());
  std::iota(ids.begin(), ids.end(), std::int64_t{0});
  return EmbeddingBatch{std::move(v), p, std::move(ids)};
}

inline Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(i, c) = m(perm[i], c);
  }
  return out;
}

}  // namespace fairenc::testing
