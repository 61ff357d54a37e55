#include "fairenc/fairdict.hpp"

#include <algorithm>
#include <cmath>

#include "fairenc/errors.hpp"
#include "fairenc/kernels.hpp"

namespace fairenc {

Codebook init_codebook(std::size_t C, std::size_t D, double scale, double lambda_cmt, Rng& rng) {
  if (C < 1) throw ConfigError("codebook needs at least one element");
  if (!(lambda_cmt >= 0.0)) throw ConfigError("lambda_cmt must be >= 0");
  Codebook cb{Matrix(C, D), lambda_cmt};
  for (double& v : cb.elements.values()) v = rng.uniform(-scale, scale);
  return cb;
}

AssignmentMatrix soft_assign(const Codebook& codebook, const EmbeddingBatch& embeddings) {
  if (embeddings.dim() != codebook.dim()) {
    throw DimensionError("soft_assign: embedding dim " + std::to_string(embeddings.dim()) +
                         " != codebook dim " + std::to_string(codebook.dim()));
  }
  Matrix w = kernels::squared_distances(embeddings.vectors, codebook.elements);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    auto row = w.row(i);
    double best = row[0];
    for (double d : row) best = std::min(best, d);
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(best - v);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return {std::move(w)};
}

EmbeddingBatch reconstruct(const Codebook& codebook, const AssignmentMatrix& weights,
                           const std::vector<std::int64_t>& ids) {
  if (weights.weights.cols() != codebook.size()) throw DimensionError("reconstruct: weight width != C");
  EmbeddingBatch out{kernels::matmul(weights.weights, codebook.elements), Provenance::reconstructed, ids};
  if (out.sample_ids.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) out.sample_ids.push_back(static_cast<std::int64_t>(i));
  }
  return out;
}

SoftAssignGrad soft_assign_backward(const Codebook& codebook, const EmbeddingBatch& embeddings,
                                    const AssignmentMatrix& weights, const Matrix& grad_weights) {
  const Matrix& f = embeddings.vectors;
  const Matrix& e = codebook.elements;
  const Matrix& w = weights.weights;
  const std::size_t B = f.rows(), C = e.rows(), D = e.cols();
  if (!grad_weights.same_shape(w)) throw DimensionError("soft_assign_backward: gradient shape");

  // w = softmax(-d): dL/dd_ic = -w_ic (g_ic - sum_c' w_ic' g_ic')
  Matrix grad_dist(B, C);
  for (std::size_t i = 0; i < B; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < C; ++c) dot += w(i, c) * grad_weights(i, c);
    for (std::size_t c = 0; c < C; ++c) grad_dist(i, c) = -w(i, c) * (grad_weights(i, c) - dot);
  }
  // d_ic = ||f_i - e_c||^2
  SoftAssignGrad out{Matrix(B, D), Matrix(C, D)};
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double g = 2.0 * grad_dist(i, c);
      if (g == 0.0) continue;
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = f(i, d) - e(c, d);
        out.embeddings(i, d) += g * diff;
        out.elements(c, d) -= g * diff;
      }
    }
  }
  return out;
}

ReconstructGrad reconstruct_backward(const Codebook& codebook, const AssignmentMatrix& weights,
                                     const Matrix& grad_reconstructed) {
  return {kernels::matmul_nt(grad_reconstructed, codebook.elements),
          kernels::matmul_tn(weights.weights, grad_reconstructed)};
}

VqLoss vq_loss(const Codebook& codebook, const EmbeddingBatch& embeddings,
               const EmbeddingBatch& reconstructed) {
  return vq_loss(codebook, embeddings, reconstructed, embeddings.vectors, reconstructed.vectors);
}

VqLoss vq_loss(const Codebook& codebook, const EmbeddingBatch& embeddings,
               const EmbeddingBatch& reconstructed, const Matrix& stopped_embeddings,
               const Matrix& stopped_reconstructed) {
  const Matrix& f = embeddings.vectors;
  const Matrix& fh = reconstructed.vectors;
  if (!f.same_shape(fh) || !f.same_shape(stopped_embeddings) || !f.same_shape(stopped_reconstructed)) {
    throw DimensionError("vq_loss: embeddings and reconstructions differ in shape");
  }
  if (f.cols() != codebook.dim()) throw DimensionError("vq_loss: embedding dim != codebook dim");
  const std::size_t B = f.rows();
  VqLoss out;
  out.grad_embeddings = Matrix(B, f.cols());
  out.grad_reconstructed = Matrix(B, f.cols());
  if (B == 0) return out;
  const double inv_b = 1.0 / static_cast<double>(B);
  double rec = 0.0, cmt = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d_rec = fh[i] - stopped_embeddings[i];
    const double d_cmt = f[i] - stopped_reconstructed[i];
    rec += d_rec * d_rec;
    cmt += d_cmt * d_cmt;
    out.grad_reconstructed[i] = 2.0 * inv_b * d_rec;
    out.grad_embeddings[i] = 2.0 * codebook.lambda_cmt * inv_b * d_cmt;
  }
  out.reconstruction_term = inv_b * rec;
  out.commitment_term = codebook.lambda_cmt * inv_b * cmt;
  out.value = out.reconstruction_term + out.commitment_term;
  return out;
}

}  // namespace fairenc
