#pragma once

#include <cstdint>
#include <vector>

#include "fairenc/fairdict.hpp"
#include "fairenc/losses.hpp"
#include "fairenc/param_store.hpp"
#include "fairenc/schema.hpp"

namespace fairenc {

// One training batch after note selection and tokenization.
struct BatchInputs {
  Matrix image_features;  // B x D_in
  Matrix text1_tokens;    // B x V
  Matrix text2_tokens;    // B x V
  std::vector<std::int64_t> ids;
  std::vector<GroupIndices> attributes;
};

struct ObjectiveConfig {
  ContrastiveConfig contrastive;
  LossWeights weights;
  double lambda_cmt = 0.25;
  // Attributes entering L_MI and L_att_cls; empty = all.
  std::vector<bool> attribute_mask;
  // Ablation: also stop the encoder gradient that the reconstruction term of
  // L_VQ sends through the assignment weights. Off by default.
  bool stop_vq_assignment_grad = false;
};

// Frozen values standing in for sg(f) and sg(f_hat). Only used for
// finite-difference checks, where the targets must stay at the base point.
struct StopGradTargets {
  Matrix embeddings;
  Matrix reconstructed;
};

struct LossBundle {
  double txt_txt = 0.0;
  double txt_img = 0.0;
  double txt_rimg = 0.0;
  double align = 0.0;
  double vq = 0.0;
  double mi = 0.0;
  double att_cls = 0.0;
  double adv = 0.0;
  double total = 0.0;
  std::vector<double> mi_per_attribute;
  std::vector<double> att_cls_per_attribute;

  // Gradient of L_total with respect to the encoders and codebook.
  ParamStore model_grad;
  // Gradient of L_total with respect to the discriminators: identically
  // zero, the discriminators are frozen in the main objective.
  ParamStore discriminator_grad;

  // Named scalars in a fixed order, for logging.
  std::vector<std::pair<std::string, double>> named() const;
};

// Full forward/backward of L_total for the encoders and codebook, with the
// adversarial term realized by gradient reversal through a frozen
// discriminator stack.
LossBundle evaluate_objective(const ParamStore& model, const ParamStore& discriminator,
                              const BatchInputs& batch, const AttributeSchema& schema,
                              const ObjectiveConfig& cfg, const StopGradTargets* frozen = nullptr);

struct DiscriminatorEvaluation {
  double att_cls = 0.0;
  std::vector<double> per_attribute;
  ParamStore grad;  // w.r.t. discriminator parameters only
};

// L_att_cls on detached image embeddings, for the discriminator update.
DiscriminatorEvaluation evaluate_discriminator(const ParamStore& discriminator, const Matrix& image_embeddings,
                                               const std::vector<GroupIndices>& attributes,
                                               const std::vector<bool>& attribute_mask = {});

}  // namespace fairenc
