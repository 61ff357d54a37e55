#include "fairenc/objective.hpp"

#include "fairenc/errors.hpp"
#include "fairenc/miestim.hpp"

namespace fairenc {

std::vector<std::pair<std::string, double>> LossBundle::named() const {
  return {{"L_txt_txt", txt_txt}, {"L_txt_img", txt_img}, {"L_txt_rimg", txt_rimg},
          {"L_align", align},     {"L_VQ", vq},           {"L_MI", mi},
          {"L_att_cls", att_cls}, {"L_adv", adv},         {"L_total", total}};
}

LossBundle evaluate_objective(const ParamStore& model, const ParamStore& discriminator,
                              const BatchInputs& batch, const AttributeSchema& schema,
                              const ObjectiveConfig& cfg, const StopGradTargets* frozen) {
  const std::size_t B = batch.image_features.rows();
  if (batch.text1_tokens.rows() != B || batch.text2_tokens.rows() != B || batch.ids.size() != B ||
      batch.attributes.size() != B) {
    throw DimensionError("evaluate_objective: batch parts disagree on B");
  }
  const Mlp img = Mlp::from_store(model, kImagePrefix);
  const Mlp txt = Mlp::from_store(model, kTextPrefix);
  const Codebook codebook{model.at(kCodebookGroup), cfg.lambda_cmt};
  const DiscriminatorStack disc = DiscriminatorStack::from_store(discriminator);
  const LossWeights& w = cfg.weights;

  // Forward.
  MlpTrace img_trace, t1_trace, t2_trace;
  const EmbeddingBatch f{img.forward(model, batch.image_features, &img_trace), Provenance::image, batch.ids};
  const EmbeddingBatch t1{txt.forward(model, batch.text1_tokens, &t1_trace), Provenance::text1, batch.ids};
  const EmbeddingBatch t2{txt.forward(model, batch.text2_tokens, &t2_trace), Provenance::text2, batch.ids};
  const AssignmentMatrix assign = soft_assign(codebook, f);
  const EmbeddingBatch f_hat = reconstruct(codebook, assign, batch.ids);

  const PairLoss tt = nt_xent(t1, t2, cfg.contrastive);
  const AlignmentLoss al = alignment_loss(t1, f, f_hat, cfg.contrastive, w.txt_rimg);
  const VqLoss vq = frozen ? vq_loss(codebook, f, f_hat, frozen->embeddings, frozen->reconstructed)
                           : vq_loss(codebook, f, f_hat);
  const MiLoss mi = mi_loss(estimate_distributions(assign, batch.attributes, schema), cfg.attribute_mask);

  DiscriminatorStack::Trace disc_trace;
  const auto predictions = disc.predict(discriminator, f.vectors, &disc_trace);
  const AttributeClsLoss att = attribute_cls_loss(predictions, batch.attributes, cfg.attribute_mask);
  // Discriminator parameters are constants here: only dL/df is needed.
  const Matrix att_grad_f = disc.backward(discriminator, disc_trace, att.grad_logits, nullptr);
  const AdversarialTerm adv = adversarial_coupling(att.value, att_grad_f, w.adv);

  LossBundle out;
  out.txt_txt = tt.value;
  out.txt_img = al.txt_img;
  out.txt_rimg = al.txt_rimg;
  out.align = al.value;
  out.vq = vq.value;
  out.mi = mi.value;
  out.mi_per_attribute = mi.per_attribute;
  out.att_cls = att.value;
  out.att_cls_per_attribute = att.per_attribute;
  out.adv = adv.value;
  out.total = total_loss({out.align, out.txt_txt, out.vq, out.mi, out.adv}, w);

  // Backward.
  Matrix grad_f = al.grad_images;
  grad_f += vq.grad_embeddings;
  grad_f += adv.grad_features;

  Matrix grad_w = mi.grad_weights;
  grad_w *= w.mi;
  Matrix grad_e(codebook.size(), codebook.dim());

  if (!cfg.stop_vq_assignment_grad) {
    Matrix grad_fhat = al.grad_reconstructed;
    grad_fhat += vq.grad_reconstructed;
    const ReconstructGrad rb = reconstruct_backward(codebook, assign, grad_fhat);
    grad_w += rb.weights;
    grad_e += rb.elements;
    const SoftAssignGrad sb = soft_assign_backward(codebook, f, assign, grad_w);
    grad_f += sb.embeddings;
    grad_e += sb.elements;
  } else {
    const ReconstructGrad rb_align = reconstruct_backward(codebook, assign, al.grad_reconstructed);
    const ReconstructGrad rb_vq = reconstruct_backward(codebook, assign, vq.grad_reconstructed);
    grad_w += rb_align.weights;
    grad_e += rb_align.elements;
    grad_e += rb_vq.elements;
    const SoftAssignGrad sb = soft_assign_backward(codebook, f, assign, grad_w);
    grad_f += sb.embeddings;
    grad_e += sb.elements;
    // The reconstruction term still trains the codebook through w.
    grad_e += soft_assign_backward(codebook, f, assign, rb_vq.weights).elements;
  }

  Matrix grad_t1 = al.grad_text;
  grad_t1.add_scaled(tt.grad_first, w.txt_txt);
  Matrix grad_t2 = tt.grad_second;
  grad_t2 *= w.txt_txt;

  out.model_grad = model.zeros_like();
  img.backward(model, img_trace, grad_f, &out.model_grad);
  txt.backward(model, t1_trace, grad_t1, &out.model_grad);
  txt.backward(model, t2_trace, grad_t2, &out.model_grad);
  out.model_grad.accumulate(kCodebookGroup, grad_e);
  out.discriminator_grad = discriminator.zeros_like();
  return out;
}

DiscriminatorEvaluation evaluate_discriminator(const ParamStore& discriminator, const Matrix& image_embeddings,
                                               const std::vector<GroupIndices>& attributes,
                                               const std::vector<bool>& attribute_mask) {
  const DiscriminatorStack disc = DiscriminatorStack::from_store(discriminator);
  DiscriminatorStack::Trace trace;
  const auto predictions = disc.predict(discriminator, image_embeddings, &trace);
  const AttributeClsLoss att = attribute_cls_loss(predictions, attributes, attribute_mask);
  DiscriminatorEvaluation out{att.value, att.per_attribute, discriminator.zeros_like()};
  disc.backward(discriminator, trace, att.grad_logits, &out.grad);
  return out;
}

}  // namespace fairenc
