#include "fairenc/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fairenc/errors.hpp"
#include "fairenc/kernels.hpp"

namespace fairenc {
namespace {

constexpr double kNormEps = 1e-12;
constexpr double kLogFloor = 1e-12;

void check_pairing(const EmbeddingBatch& a, const EmbeddingBatch& b, const char* who) {
  if (a.size() != b.size()) throw PairingError(std::string(who) + ": batch sizes differ");
  if (a.dim() != b.dim()) throw DimensionError(std::string(who) + ": embedding dims differ");
  if (a.sample_ids != b.sample_ids) throw PairingError(std::string(who) + ": sample ids are not aligned");
}

void check_tau(const ContrastiveConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("temperature tau must be > 0");
}

// dL/dx for x_hat = x / max(|x|, eps), given dL/dx_hat.
Matrix normalize_backward(const Matrix& x_hat, const std::vector<double>& norms, const Matrix& grad_hat) {
  Matrix g(x_hat.rows(), x_hat.cols());
  for (std::size_t i = 0; i < x_hat.rows(); ++i) {
    const auto xh = x_hat.row(i);
    const auto gh = grad_hat.row(i);
    auto out = g.row(i);
    if (norms[i] < kNormEps) {
      for (std::size_t d = 0; d < xh.size(); ++d) out[d] = gh[d] / kNormEps;
      continue;
    }
    double dot = 0.0;
    for (std::size_t d = 0; d < xh.size(); ++d) dot += gh[d] * xh[d];
    for (std::size_t d = 0; d < xh.size(); ++d) out[d] = (gh[d] - dot * xh[d]) / norms[i];
  }
  return g;
}

double log_sum_exp(std::span<const double> v, std::size_t skip = SIZE_MAX) {
  double best = -INFINITY;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j != skip) best = std::max(best, v[j]);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j != skip) s += std::exp(v[j] - best);
  }
  return best + std::log(s);
}

}  // namespace

PairLoss nt_xent(const EmbeddingBatch& batch1, const EmbeddingBatch& batch2, const ContrastiveConfig& cfg) {
  check_pairing(batch1, batch2, "nt_xent");
  check_tau(cfg);
  const std::size_t B = batch1.size(), D = batch1.dim(), N = 2 * B;
  PairLoss out{0.0, Matrix(B, D), Matrix(B, D)};
  if (B == 0) return out;

  Matrix z(N, D);
  for (std::size_t i = 0; i < B; ++i) {
    std::copy(batch1.vectors.row(i).begin(), batch1.vectors.row(i).end(), z.row(i).begin());
    std::copy(batch2.vectors.row(i).begin(), batch2.vectors.row(i).end(), z.row(B + i).begin());
  }
  std::vector<double> norms;
  const Matrix zh = kernels::normalize_rows(z, kNormEps, &norms);
  Matrix s = kernels::matmul_nt(zh, zh);
  s *= 1.0 / cfg.tau;

  const double scale = 1.0 / static_cast<double>(N);
  Matrix g(N, N);
  double loss = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t pos = (k + B) % N;
    const auto row = s.row(k);
    const double lse = log_sum_exp(row, k);
    loss += lse - row[pos];
    for (std::size_t j = 0; j < N; ++j) {
      if (j == k) continue;
      g(k, j) = scale * (std::exp(row[j] - lse) - (j == pos ? 1.0 : 0.0));
    }
  }
  out.value = scale * loss;

  // S is symmetric in zh, so dL/dzh = (G + G^T) zh / tau.
  Matrix gs(N, N);
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t j = 0; j < N; ++j) gs(k, j) = (g(k, j) + g(j, k)) / cfg.tau;
  }
  const Matrix gz = normalize_backward(zh, norms, kernels::matmul(gs, zh));
  for (std::size_t i = 0; i < B; ++i) {
    std::copy(gz.row(i).begin(), gz.row(i).end(), out.grad_first.row(i).begin());
    std::copy(gz.row(B + i).begin(), gz.row(B + i).end(), out.grad_second.row(i).begin());
  }
  return out;
}

PairLoss clip_loss(const EmbeddingBatch& texts, const EmbeddingBatch& images, const ContrastiveConfig& cfg) {
  check_pairing(texts, images, "clip_loss");
  check_tau(cfg);
  const std::size_t B = texts.size(), D = texts.dim();
  PairLoss out{0.0, Matrix(B, D), Matrix(B, D)};
  if (B == 0) return out;

  std::vector<double> tn, vn;
  const Matrix th = kernels::normalize_rows(texts.vectors, kNormEps, &tn);
  const Matrix vh = kernels::normalize_rows(images.vectors, kNormEps, &vn);
  Matrix s = kernels::matmul_nt(th, vh);
  s *= 1.0 / cfg.tau;

  const double scale = 1.0 / static_cast<double>(2 * B);
  Matrix g(B, B);
  double loss = 0.0;
  // text -> image: softmax along rows
  for (std::size_t i = 0; i < B; ++i) {
    const auto row = s.row(i);
    const double lse = log_sum_exp(row);
    loss += lse - row[i];
    for (std::size_t j = 0; j < B; ++j) g(i, j) += scale * (std::exp(row[j] - lse) - (i == j ? 1.0 : 0.0));
  }
  // image -> text: softmax along columns
  std::vector<double> col(B);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) col[j] = s(j, i);
    const double lse = log_sum_exp(col);
    loss += lse - col[i];
    for (std::size_t j = 0; j < B; ++j) g(j, i) += scale * (std::exp(col[j] - lse) - (i == j ? 1.0 : 0.0));
  }
  out.value = scale * loss;

  g *= 1.0 / cfg.tau;
  out.grad_first = normalize_backward(th, tn, kernels::matmul(g, vh));
  out.grad_second = normalize_backward(vh, vn, kernels::matmul_tn(g, th));
  return out;
}

AlignmentLoss alignment_loss(const EmbeddingBatch& text1, const EmbeddingBatch& images,
                             const EmbeddingBatch& reconstructed, const ContrastiveConfig& cfg,
                             double lambda_txt_rimg) {
  if (!(lambda_txt_rimg >= 0.0)) throw ConfigError("lambda_txt_rimg must be >= 0");
  const PairLoss ti = clip_loss(text1, images, cfg);
  const PairLoss tr = clip_loss(text1, reconstructed, cfg);
  AlignmentLoss out;
  out.txt_img = ti.value;
  out.txt_rimg = tr.value;
  out.value = ti.value + lambda_txt_rimg * tr.value;
  out.grad_text = ti.grad_first;
  out.grad_text.add_scaled(tr.grad_first, lambda_txt_rimg);
  out.grad_images = ti.grad_second;
  out.grad_reconstructed = tr.grad_second;
  out.grad_reconstructed *= lambda_txt_rimg;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string head_prefix(std::size_t m) {
  return std::string(kDiscriminatorPrefix) + ".head" + std::to_string(m);
}

std::vector<std::size_t> trunk_layout(std::size_t input_dim, std::vector<std::size_t> widths) {
  widths.insert(widths.begin(), input_dim);
  return widths;
}

}  // namespace

DiscriminatorStack::DiscriminatorStack(std::size_t input_dim, std::vector<std::size_t> trunk_widths,
                                       std::vector<std::size_t> head_sizes)
    : trunk_(std::string(kDiscriminatorPrefix) + ".trunk", trunk_layout(input_dim, trunk_widths), true) {
  if (trunk_widths.empty()) throw ConfigError("discriminator trunk needs at least one hidden layer");
  for (std::size_t m = 0; m < head_sizes.size(); ++m) {
    if (head_sizes[m] < 2) throw ConfigError("discriminator head needs at least 2 outputs");
    heads_.emplace_back(head_prefix(m), std::vector<std::size_t>{trunk_widths.back(), head_sizes[m]});
  }
}

DiscriminatorStack DiscriminatorStack::from_store(const ParamStore& params) {
  const Mlp trunk = Mlp::from_store(params, std::string(kDiscriminatorPrefix) + ".trunk", true);
  std::vector<std::size_t> widths;
  for (std::size_t l = 0; l < trunk.layer_count(); ++l) widths.push_back(params.at(trunk.weight_name(l)).cols());
  std::vector<std::size_t> heads;
  for (std::size_t m = 0; params.contains(head_prefix(m) + ".0.w"); ++m) {
    heads.push_back(params.at(head_prefix(m) + ".0.w").cols());
  }
  return DiscriminatorStack(trunk.input_dim(), widths, heads);
}

void DiscriminatorStack::init_params(ParamStore& params, Rng& rng) const {
  trunk_.init_params(params, rng);
  for (const auto& h : heads_) h.init_params(params, rng);
}

std::vector<Matrix> DiscriminatorStack::predict(const ParamStore& params, const Matrix& features,
                                                Trace* trace) const {
  Trace local;
  Trace& t = trace ? *trace : local;
  const Matrix hidden = trunk_.forward(params, features, &t.trunk);
  t.heads.assign(heads_.size(), {});
  std::vector<Matrix> probs;
  for (std::size_t m = 0; m < heads_.size(); ++m) {
    Matrix p = heads_[m].forward(params, hidden, &t.heads[m]);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      auto row = p.row(i);
      const double lse = log_sum_exp(row);
      for (double& v : row) v = std::exp(v - lse);
    }
    probs.push_back(std::move(p));
  }
  t.probabilities = probs;
  return probs;
}

Matrix DiscriminatorStack::backward(const ParamStore& params, const Trace& trace,
                                    const std::vector<Matrix>& grad_logits, ParamStore* grads) const {
  if (grad_logits.size() != heads_.size()) throw DimensionError("discriminator backward: one gradient per head");
  const Matrix& hidden_in = trace.heads.front().inputs.front();
  Matrix grad_hidden(hidden_in.rows(), hidden_in.cols());
  for (std::size_t m = 0; m < heads_.size(); ++m) {
    grad_hidden += heads_[m].backward(params, trace.heads[m], grad_logits[m], grads);
  }
  return trunk_.backward(params, trace.trunk, grad_hidden, grads);
}

std::vector<Matrix> predict_attributes(const DiscriminatorStack& stack, const ParamStore& params,
                                       const EmbeddingBatch& images) {
  if (images.dim() != stack.input_dim()) throw DimensionError("predict_attributes: embedding dim mismatch");
  return stack.predict(params, images.vectors);
}

AttributeClsLoss attribute_cls_loss(const std::vector<Matrix>& predictions,
                                    const std::vector<GroupIndices>& attribute_values,
                                    const std::vector<bool>& attribute_mask) {
  const std::size_t M = predictions.size();
  if (!attribute_mask.empty() && attribute_mask.size() != M) throw DimensionError("attribute mask length");
  AttributeClsLoss out;
  out.per_attribute.assign(M, 0.0);
  if (M == 0) return out;
  const std::size_t B = predictions.front().rows();
  if (attribute_values.size() != B) throw DimensionError("attribute_cls_loss: one attribute row per sample");
  const double inv_b = B ? 1.0 / static_cast<double>(B) : 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const Matrix& p = predictions[m];
    Matrix g(p.rows(), p.cols());
    if (attribute_mask.empty() || attribute_mask[m]) {
      double sum = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t a = attribute_values[i].at(m);
        if (a >= p.cols()) throw SchemaError("attribute_cls_loss: group index out of range");
        const double pa = p(i, a);
        sum -= std::log(std::max(pa, kLogFloor));
        // Below the floor the clamped term is constant.
        if (pa >= kLogFloor) {
          for (std::size_t c = 0; c < p.cols(); ++c) g(i, c) = inv_b * (p(i, c) - (c == a ? 1.0 : 0.0));
        }
      }
      out.per_attribute[m] = inv_b * sum;
      out.value += out.per_attribute[m];
    }
    out.grad_logits.push_back(std::move(g));
  }
  return out;
}

AdversarialTerm adversarial_coupling(double att_cls_value, const Matrix& att_cls_grad_features,
                                     double lambda_adv) {
  if (!(lambda_adv >= 0.0)) throw ConfigError("lambda_adv must be >= 0");
  AdversarialTerm out{-att_cls_value, att_cls_grad_features};
  out.grad_features *= -lambda_adv;
  return out;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"L_align", c.align}, {"L_txt_txt", c.txt_txt}, {"L_VQ", c.vq}, {"L_MI", c.mi}, {"L_adv", c.adv}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite loss component ") + name);
  }
  return c.align + w.txt_txt * c.txt_txt + c.vq + w.mi * c.mi + w.adv * c.adv;
}

}  // namespace fairenc
