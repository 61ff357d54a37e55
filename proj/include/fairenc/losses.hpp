#pragma once

#include <string>
#include <vector>

#include "fairenc/encoders.hpp"
#include "fairenc/matrix.hpp"
#include "fairenc/param_store.hpp"
#include "fairenc/random.hpp"
#include "fairenc/schema.hpp"

namespace fairenc {

struct ContrastiveConfig {
  double tau = 0.07;
};

// Loss over two aligned embedding batches with gradients for both.
struct PairLoss {
  double value = 0.0;
  Matrix grad_first;
  Matrix grad_second;
};

// NT-Xent over the 2B text embeddings: each embedding anchors once, its
// positive is the other slot of the same sample, and the candidates are the
// remaining 2B - 1 embeddings. Cosine similarity divided by tau.
PairLoss nt_xent(const EmbeddingBatch& batch1, const EmbeddingBatch& batch2, const ContrastiveConfig& cfg);

// Symmetric CLIP loss between texts and images: text->image and image->text
// log-softmax over the batch, averaged over the 2B terms.
PairLoss clip_loss(const EmbeddingBatch& texts, const EmbeddingBatch& images, const ContrastiveConfig& cfg);

struct AlignmentLoss {
  double txt_img = 0.0;
  double txt_rimg = 0.0;
  double value = 0.0;  // txt_img + lambda_txt_rimg * txt_rimg
  Matrix grad_text;
  Matrix grad_images;
  Matrix grad_reconstructed;
};

AlignmentLoss alignment_loss(const EmbeddingBatch& text1, const EmbeddingBatch& images,
                             const EmbeddingBatch& reconstructed, const ContrastiveConfig& cfg,
                             double lambda_txt_rimg);

// ---------------------------------------------------------------------------
// Sensitive-attribute discriminators: a shared ReLU trunk and one linear head
// per attribute. Parameters live under "disc.trunk.*" and "disc.head<m>.*".

class DiscriminatorStack {
 public:
  DiscriminatorStack(std::size_t input_dim, std::vector<std::size_t> trunk_widths,
                     std::vector<std::size_t> head_sizes);
  static DiscriminatorStack from_store(const ParamStore& params);

  void init_params(ParamStore& params, Rng& rng) const;

  struct Trace {
    MlpTrace trunk;
    std::vector<MlpTrace> heads;
    std::vector<Matrix> probabilities;
  };

  // Per attribute a B x |A_m| matrix of softmax probabilities.
  std::vector<Matrix> predict(const ParamStore& params, const Matrix& features, Trace* trace = nullptr) const;

  // grad_logits[m] is dL/dlogits for head m. Accumulates parameter gradients
  // into `grads` if non-null and returns dL/dfeatures.
  Matrix backward(const ParamStore& params, const Trace& trace, const std::vector<Matrix>& grad_logits,
                  ParamStore* grads) const;

  std::size_t attribute_count() const { return heads_.size(); }
  std::size_t input_dim() const { return trunk_.input_dim(); }
  std::size_t head_size(std::size_t m) const { return heads_[m].output_dim(); }

 private:
  Mlp trunk_;
  std::vector<Mlp> heads_;
};

inline constexpr const char* kDiscriminatorPrefix = "disc";

std::vector<Matrix> predict_attributes(const DiscriminatorStack& stack, const ParamStore& params,
                                       const EmbeddingBatch& images);

struct AttributeClsLoss {
  double value = 0.0;
  std::vector<double> per_attribute;
  std::vector<Matrix> grad_logits;  // zero for attributes outside the mask
};

// -(1/B) sum_i sum_m ln max(p(A_m = a_i), 1e-12). Empty mask = all attributes.
AttributeClsLoss attribute_cls_loss(const std::vector<Matrix>& predictions,
                                    const std::vector<GroupIndices>& attribute_values,
                                    const std::vector<bool>& attribute_mask = {});

// Gradient reversal: the adversarial term's contribution to the feature
// gradient is -lambda_adv * dL_att_cls/df. L_adv = -L_att_cls.
struct AdversarialTerm {
  double value = 0.0;  // L_adv
  Matrix grad_features;
};
AdversarialTerm adversarial_coupling(double att_cls_value, const Matrix& att_cls_grad_features,
                                     double lambda_adv);

struct LossWeights {
  double txt_txt = 0.01;
  double mi = 1.0;
  double adv = 1.0;
  double txt_rimg = 10.0;
};

struct LossComponents {
  double align = 0.0;
  double txt_txt = 0.0;
  double vq = 0.0;
  double mi = 0.0;
  double adv = 0.0;
};

// L_align + l_tt L_txt_txt + L_VQ + l_mi L_MI + l_adv L_adv.
// Throws NumericalError naming the first non-finite component.
double total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace fairenc
