#pragma once

#include "fairenc/encoders.hpp"
#include "fairenc/matrix.hpp"
#include "fairenc/random.hpp"

namespace fairenc {

inline constexpr const char* kCodebookGroup = "codebook";

// C learnable element vectors in embedding space.
struct Codebook {
  Matrix elements;  // C x D
  double lambda_cmt = 0.25;

  std::size_t size() const { return elements.rows(); }
  std::size_t dim() const { return elements.cols(); }
};

// Seeded uniform draws in [-scale, scale].
Codebook init_codebook(std::size_t C, std::size_t D, double scale, double lambda_cmt, Rng& rng);

// Row i is softmax_c(-||f_i - e_c||^2).
struct AssignmentMatrix {
  Matrix weights;  // B x C
};

AssignmentMatrix soft_assign(const Codebook& codebook, const EmbeddingBatch& embeddings);

// f_hat_i = sum_c w_ic e_c
EmbeddingBatch reconstruct(const Codebook& codebook, const AssignmentMatrix& weights,
                           const std::vector<std::int64_t>& ids = {});

struct SoftAssignGrad {
  Matrix embeddings;  // B x D
  Matrix elements;    // C x D
};
// Pulls dL/dw back through the softmax of negative squared distances.
SoftAssignGrad soft_assign_backward(const Codebook& codebook, const EmbeddingBatch& embeddings,
                                    const AssignmentMatrix& weights, const Matrix& grad_weights);

struct ReconstructGrad {
  Matrix weights;   // B x C
  Matrix elements;  // C x D
};
ReconstructGrad reconstruct_backward(const Codebook& codebook, const AssignmentMatrix& weights,
                                     const Matrix& grad_reconstructed);

// L = (1/B) sum_i ||f_hat_i - sg(f_i)||^2 + lambda_cmt ||f_i - sg(f_hat_i)||^2
//
// grad_reconstructed carries only the first term (its target f is stopped);
// grad_embeddings carries only the explicit commitment term. The codebook and
// encoder paths through f_hat are reached by chaining grad_reconstructed
// through reconstruct_backward / soft_assign_backward.
struct VqLoss {
  double value = 0.0;
  double reconstruction_term = 0.0;
  double commitment_term = 0.0;  // already scaled by lambda_cmt
  Matrix grad_embeddings;
  Matrix grad_reconstructed;
};

VqLoss vq_loss(const Codebook& codebook, const EmbeddingBatch& embeddings,
               const EmbeddingBatch& reconstructed);

// Same loss with the stop-gradient targets supplied explicitly:
// ||f_hat - stopped_f||^2 + lambda_cmt ||f - stopped_f_hat||^2. Holding the
// targets fixed while perturbing f or f_hat gives a function whose ordinary
// derivative equals the stop-gradient derivative above.
VqLoss vq_loss(const Codebook& codebook, const EmbeddingBatch& embeddings,
               const EmbeddingBatch& reconstructed, const Matrix& stopped_embeddings,
               const Matrix& stopped_reconstructed);

}  // namespace fairenc
