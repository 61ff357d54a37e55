#include "fairenc/check/criteria.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "fairenc/check/oracles.hpp"
#include "fairenc/errors.hpp"
#include "fairenc/fairdict.hpp"
#include "fairenc/losses.hpp"
#include "fairenc/metrics.hpp"
#include "fairenc/miestim.hpp"
#include "fairenc/notes.hpp"
#include "fairenc/objective.hpp"

namespace fairenc::check {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

Matrix random_simplex_rows(Rng& rng, std::size_t r, std::size_t c, bool allow_zeros) {
  Matrix w(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (allow_zeros && rng.uniform() < 0.2) {
      w(i, rng.index(c)) = 1.0;
      continue;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += (w(i, k) = std::exp(2.0 * rng.normal()));
    for (std::size_t k = 0; k < c; ++k) w(i, k) /= sum;
  }
  return w;
}

AttributeSchema numbered_schema(const std::vector<std::size_t>& counts) {
  std::vector<Attribute> attrs;
  for (std::size_t m = 0; m < counts.size(); ++m) {
    Attribute a{"a" + std::to_string(m), {}};
    for (std::size_t g = 0; g < counts[m]; ++g) a.values.push_back("g" + std::to_string(g));
    attrs.push_back(std::move(a));
  }
  return AttributeSchema(std::move(attrs));
}

std::vector<GroupIndices> random_groups(Rng& rng, std::size_t n, const std::vector<std::size_t>& counts) {
  std::vector<GroupIndices> out(n, GroupIndices(counts.size()));
  for (auto& row : out) {
    for (std::size_t m = 0; m < counts.size(); ++m) row[m] = rng.index(counts[m]);
  }
  return out;
}

EmbeddingBatch batch_of(Matrix v, Provenance p = Provenance::image) {
  std::vector<std::int64_t> ids(v.rows());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
  return EmbeddingBatch{std::move(v), p, std::move(ids)};
}

// Collects named expectations; a criterion passes when none failed.
class Expectations {
 public:
  void near(const std::string& name, double got, double want, double tol) {
    ++count_;
    if (!(std::abs(got - want) <= tol)) {
      failures_.push_back(name + ": got " + num(got, "%.12g") + ", want " + num(want, "%.12g"));
    }
  }
  void that(const std::string& name, bool ok) {
    ++count_;
    if (!ok) failures_.push_back(name);
  }
  std::size_t count() const { return count_; }
  const std::vector<std::string>& failures() const { return failures_; }
  std::string summary() const {
    std::string s = std::to_string(count_ - failures_.size()) + "/" + std::to_string(count_) + " hold";
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i) s += "; " + failures_[i];
    return s;
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> failures_;
};

CriterionResult make_result(std::string name, Clock::time_point t0, bool passed, std::string detail) {
  return CriterionResult{std::move(name), passed, std::move(detail), since(t0)};
}

}  // namespace

std::string format_result(const CriterionResult& r) {
  return std::string(r.passed ? "PASS" : "FAIL") + "  " + r.name + "  (" + num(r.seconds, "%.1f") + " s)  " + r.detail;
}

// ---------------------------------------------------------------------------

CriterionResult mi_oracle_equivalence(std::size_t cases, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  double max_diff = 0.0;
  std::size_t bound_violations = 0;
  for (std::size_t k = 0; k < cases; ++k) {
    const std::size_t B = 1 + rng.index(16), C = 1 + rng.index(8), M = 1 + rng.index(2);
    std::vector<std::size_t> counts(M);
    for (auto& c : counts) c = 2 + rng.index(2);
    const AttributeSchema schema = numbered_schema(counts);
    const Matrix w = random_simplex_rows(rng, B, C, k % 4 == 0);
    const auto groups = random_groups(rng, B, counts);
    const MiLoss mi = mi_loss(estimate_distributions(AssignmentMatrix{w}, groups, schema));
    const auto want = mi_oracle(w, groups, counts);
    for (std::size_t m = 0; m < M; ++m) {
      max_diff = std::max(max_diff, std::abs(mi.per_attribute[m] - want[m]));
      // 0 <= MI <= min(ln C, H(A))
      std::vector<double> p_attr(counts[m], 0.0);
      for (const auto& g : groups) p_attr[g[m]] += 1.0 / static_cast<double>(B);
      double h_attr = 0.0;
      for (double p : p_attr) h_attr -= p > 0.0 ? p * std::log(p) : 0.0;
      const double upper = std::min(std::log(static_cast<double>(C)), h_attr);
      if (mi.per_attribute[m] < -1e-9 || mi.per_attribute[m] > upper + 1e-9) ++bound_violations;
    }
  }
  // Worked example.
  const Matrix w = Matrix::from_rows({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.1, 0.9}});
  const std::vector<GroupIndices> groups = {{0}, {0}, {1}, {1}};
  const double example = mi_loss(estimate_distributions(AssignmentMatrix{w}, groups, numbered_schema({2}))).value;
  const double example_oracle = mi_oracle(w, groups, {2})[0];
  const double seconds = since(t0);
  const bool ok = max_diff <= 1e-9 && bound_violations == 0 && std::abs(example - 0.132506) <= 1e-6 &&
                  std::abs(example - example_oracle) <= 1e-9 && seconds < 30.0;
  return make_result("MI oracle equivalence", t0, ok,
                     std::to_string(cases) + " cases, max |lib - oracle| " + num(max_diff) + " (tol 1e-9), " +
                         std::to_string(bound_violations) + " bound violations, worked example " +
                         num(example, "%.6f") + " (want 0.132506)");
}

CriterionResult auc_oracle_equivalence(std::size_t cases, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  double max_diff = 0.0;
  std::size_t disagreements = 0, undefined = 0;
  const std::uint64_t grids[] = {3, 10, 1000, 1u << 30};
  for (std::size_t k = 0; k < cases; ++k) {
    const std::size_t n = 1 + rng.index(200);
    const std::uint64_t grid = grids[rng.index(4)];
    const double rate = rng.uniform();
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.index(grid)) / static_cast<double>(grid);
      labels[i] = rng.uniform() < rate ? 1 : 0;
    }
    const auto lib = auc(scores, labels);
    const double oracle = auc_pair_oracle(scores, labels);
    if (!lib || oracle < 0.0) {
      ++undefined;
      if (lib.has_value() != (oracle >= 0.0)) ++disagreements;
      continue;
    }
    max_diff = std::max(max_diff, std::abs(*lib - oracle));
  }
  const double seconds = since(t0);
  const bool ok = max_diff <= 1e-12 && disagreements == 0 && seconds < 30.0;
  return make_result("AUC oracle equivalence", t0, ok,
                     std::to_string(cases) + " cases (" + std::to_string(undefined) +
                         " single-class), max |sort - pairs| " + num(max_diff) + " (tol 1e-12), " +
                         std::to_string(disagreements) + " definedness disagreements");
}

// ---------------------------------------------------------------------------

CriterionResult gradient_suite(std::size_t coordinates, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  GradCheckOptions opts;
  opts.h = 1e-5;
  opts.tolerance = 1e-4;
  opts.max_coordinates = coordinates;
  opts.seed = seed;

  std::vector<std::pair<std::string, GradCheckReport>> reports;
  auto run = [&](const std::string& name, const LossFunction& fn, const ParamStore& p) {
    reports.emplace_back(name, check_gradients(fn, p, opts));
  };
  const ContrastiveConfig cc{0.07};

  {  // nt_xent
    ParamStore p;
    p.add("z1", random_matrix(rng, 16, 8));
    p.add("z2", random_matrix(rng, 16, 8));
    run("nt_xent", [&](const ParamStore& q) {
      const PairLoss l = nt_xent(batch_of(q.at("z1"), Provenance::text1), batch_of(q.at("z2"), Provenance::text2), cc);
      ParamStore g = q.zeros_like();
      g.set("z1", l.grad_first);
      g.set("z2", l.grad_second);
      return LossEvaluation{l.value, std::move(g)};
    }, p);
  }
  {  // alignment
    ParamStore p;
    p.add("text", random_matrix(rng, 12, 8));
    p.add("image", random_matrix(rng, 12, 8));
    p.add("recon", random_matrix(rng, 12, 8));
    run("alignment_loss", [&](const ParamStore& q) {
      const AlignmentLoss l = alignment_loss(batch_of(q.at("text"), Provenance::text1), batch_of(q.at("image")),
                                             batch_of(q.at("recon"), Provenance::reconstructed), cc, 10.0);
      ParamStore g = q.zeros_like();
      g.set("text", l.grad_text);
      g.set("image", l.grad_images);
      g.set("recon", l.grad_reconstructed);
      return LossEvaluation{l.value, std::move(g)};
    }, p);
  }
  {  // vq_loss, explicit partials with the stopped targets held at the base point
    ParamStore p;
    p.add("f", random_matrix(rng, 16, 8));
    p.add("f_hat", random_matrix(rng, 16, 8));
    const Matrix sf = p.at("f"), sfh = p.at("f_hat");
    const Codebook cb{random_matrix(rng, 3, 8), 0.25};
    run("vq_loss (explicit partials)", [&, sf, sfh, cb](const ParamStore& q) {
      const VqLoss l = vq_loss(cb, batch_of(q.at("f")), batch_of(q.at("f_hat"), Provenance::reconstructed), sf, sfh);
      ParamStore g = q.zeros_like();
      g.set("f", l.grad_embeddings);
      g.set("f_hat", l.grad_reconstructed);
      return LossEvaluation{l.value, std::move(g)};
    }, p);
  }
  {  // vq_loss through soft assignment and the codebook
    ParamStore p;
    p.add("f", random_matrix(rng, 16, 8, 0.5));
    p.add(kCodebookGroup, random_matrix(rng, 12, 8, 0.5));
    const Codebook base{p.at(kCodebookGroup), 0.25};
    const Matrix sf = p.at("f");
    const Matrix sfh = reconstruct(base, soft_assign(base, batch_of(sf))).vectors;
    run("vq_loss (through codebook)", [&, sf, sfh](const ParamStore& q) {
      const Codebook cb{q.at(kCodebookGroup), 0.25};
      const EmbeddingBatch f = batch_of(q.at("f"));
      const AssignmentMatrix w = soft_assign(cb, f);
      const EmbeddingBatch fh = reconstruct(cb, w, f.sample_ids);
      const VqLoss l = vq_loss(cb, f, fh, sf, sfh);
      const ReconstructGrad rb = reconstruct_backward(cb, w, l.grad_reconstructed);
      const SoftAssignGrad sb = soft_assign_backward(cb, f, w, rb.weights);
      Matrix gf = l.grad_embeddings;
      gf += sb.embeddings;
      Matrix ge = rb.elements;
      ge += sb.elements;
      ParamStore g = q.zeros_like();
      g.set("f", std::move(gf));
      g.set(kCodebookGroup, std::move(ge));
      return LossEvaluation{l.value, std::move(g)};
    }, p);
  }
  {  // mi_loss on raw assignment weights
    const std::vector<std::size_t> counts = {3, 2};
    const AttributeSchema schema = numbered_schema(counts);
    const auto groups = random_groups(rng, 16, counts);
    ParamStore p;
    p.add("w", random_simplex_rows(rng, 16, 16, false));
    run("mi_loss (weights)", [&, groups](const ParamStore& q) {
      const MiLoss l = mi_loss(estimate_distributions(AssignmentMatrix{q.at("w")}, groups, schema));
      ParamStore g = q.zeros_like();
      g.set("w", l.grad_weights);
      return LossEvaluation{l.value, std::move(g)};
    }, p);

    ParamStore p2;
    p2.add("f", random_matrix(rng, 16, 8, 0.5));
    p2.add(kCodebookGroup, random_matrix(rng, 12, 8, 0.5));
    run("mi_loss (through codebook)", [&, groups](const ParamStore& q) {
      const Codebook cb{q.at(kCodebookGroup), 0.25};
      const EmbeddingBatch f = batch_of(q.at("f"));
      const AssignmentMatrix w = soft_assign(cb, f);
      const MiLoss l = mi_loss(estimate_distributions(w, groups, schema));
      const SoftAssignGrad sb = soft_assign_backward(cb, f, w, l.grad_weights);
      ParamStore g = q.zeros_like();
      g.set("f", sb.embeddings);
      g.set(kCodebookGroup, sb.elements);
      return LossEvaluation{l.value, std::move(g)};
    }, p2);
  }
  {  // attribute_cls_loss through the discriminator stack
    const std::vector<std::size_t> heads = {3, 2};
    const DiscriminatorStack stack(16, {256, 128, 64}, heads);
    ParamStore p;
    stack.init_params(p, rng);
    p.add("features", random_matrix(rng, 8, 16));
    const auto groups = random_groups(rng, 8, heads);
    run("attribute_cls_loss", [&, groups](const ParamStore& q) {
      DiscriminatorStack::Trace trace;
      const auto probs = stack.predict(q, q.at("features"), &trace);
      const AttributeClsLoss l = attribute_cls_loss(probs, groups);
      ParamStore g = q.zeros_like();
      g.set("features", stack.backward(q, trace, l.grad_logits, &g));
      return LossEvaluation{l.value, std::move(g)};
    }, p);
  }

  // Full objective over encoder and codebook parameters.
  const AttributeSchema schema = AttributeSchema::two_attribute_default();
  ParamStore model, disc;
  EncoderConfig ec;
  init_encoder_params(model, ec, rng);
  model.add(kCodebookGroup, init_codebook(16, ec.embed_dim, 0.5, 0.25, rng).elements);
  DiscriminatorStack(ec.embed_dim, {256, 128, 64}, {3, 2}).init_params(disc, rng);
  BatchInputs batch{random_matrix(rng, 8, ec.d_in), Matrix(8, ec.vocab_dim), Matrix(8, ec.vocab_dim), {}, {}};
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t t = 0; t < 12; ++t) {
      batch.text1_tokens(i, rng.index(ec.vocab_dim)) += 1.0;
      batch.text2_tokens(i, rng.index(ec.vocab_dim)) += 1.0;
    }
    batch.ids.push_back(static_cast<std::int64_t>(i));
  }
  batch.attributes = random_groups(rng, 8, {3, 2});
  const ObjectiveConfig ocfg;
  const Codebook cb0{model.at(kCodebookGroup), ocfg.lambda_cmt};
  const Matrix f0 = encode_image(model, batch.image_features).vectors;
  const StopGradTargets frozen{f0, reconstruct(cb0, soft_assign(cb0, batch_of(f0))).vectors};
  run("total_loss", [&](const ParamStore& q) {
    LossBundle lb = evaluate_objective(q, disc, batch, schema, ocfg, &frozen);
    return LossEvaluation{lb.total, std::move(lb.model_grad)};
  }, model);

  // Coordinates whose analytic gradient must be exactly zero.
  Expectations zeros;
  {
    const EmbeddingBatch f = batch_of(random_matrix(rng, 6, 4));
    const EmbeddingBatch fh = batch_of(random_matrix(rng, 6, 4), Provenance::reconstructed);
    Codebook cb{random_matrix(rng, 3, 4), 0.0};
    const VqLoss no_commit = vq_loss(cb, f, fh);
    bool all_zero = true;
    for (double v : no_commit.grad_embeddings.values()) all_zero = all_zero && v == 0.0;
    zeros.that("d(reconstruction term)/df explicit == 0", all_zero);
    cb.lambda_cmt = 0.25;
    const VqLoss a = vq_loss(cb, f, fh);
    cb.lambda_cmt = 3.0;
    const VqLoss b = vq_loss(cb, f, fh);
    zeros.that("d(commitment term)/d(f_hat, e) == 0", a.grad_reconstructed == b.grad_reconstructed &&
                                                          a.grad_reconstructed == no_commit.grad_reconstructed);
  }
  const LossBundle lb = evaluate_objective(model, disc, batch, schema, ocfg);
  bool disc_zero = true;
  for (const auto& name : lb.discriminator_grad.names()) {
    for (double v : lb.discriminator_grad.at(name).values()) disc_zero = disc_zero && v == 0.0;
  }
  zeros.that("frozen discriminator gradient == 0", disc_zero);
  {
    ObjectiveConfig no_adv = ocfg;
    no_adv.weights.adv = 0.0;
    ParamStore other_disc;
    DiscriminatorStack(ec.embed_dim, {256, 128, 64}, {3, 2}).init_params(other_disc, rng);
    const LossBundle x = evaluate_objective(model, disc, batch, schema, no_adv);
    const LossBundle y = evaluate_objective(model, other_disc, batch, schema, no_adv);
    zeros.that("lambda_adv = 0: discriminator leaves encoder gradient unchanged", x.model_grad == y.model_grad);
  }

  bool ok = zeros.failures().empty();
  std::string detail;
  for (const auto& [name, r] : reports) {
    ok = ok && r.passed && r.coordinates_checked >= coordinates;
    detail += name + " " + num(r.max_relative_error, "%.1e") + "/" + std::to_string(r.coordinates_checked) + "; ";
  }
  const double seconds = since(t0);
  ok = ok && seconds < 120.0;
  detail += "exact zeros " + zeros.summary();
  for (const auto& [name, r] : reports) {
    if (!r.passed) detail += "; worst " + name + " at " + r.worst_coordinate;
  }
  return make_result("Gradient suite (max rel err/coords, tol 1e-4, h 1e-5)", t0, ok, detail);
}

// ---------------------------------------------------------------------------

CriterionResult analytic_fixtures() {
  const auto t0 = Clock::now();
  Expectations e;
  const double kLoss = 1e-6, kCount = 1e-12;

  {  // soft assignment and reconstruction
    const Codebook cb{Matrix::from_rows({{0.0}, {1.0}}), 0.25};
    const AssignmentMatrix w = soft_assign(cb, batch_of(Matrix::from_rows({{0.0}})));
    e.near("soft_assign softmax(0,-1)[0]", w.weights(0, 0), 0.731059, kLoss);
    e.near("soft_assign softmax(0,-1)[1]", w.weights(0, 1), 0.268941, kLoss);
    e.near("soft_assign then reconstruct", reconstruct(cb, w).vectors(0, 0), 0.268941, kLoss);
    const Codebook cross{Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}}), 0.25};
    const AssignmentMatrix u = soft_assign(cross, batch_of(Matrix(1, 2)));
    for (std::size_t c = 0; c < 4; ++c) e.near("symmetric assignment", u.weights(0, c), 0.25, kCount);
    const Codebook one{Matrix::from_rows({{3.0, -1.0}}), 0.25};
    e.near("C = 1 assignment", soft_assign(one, batch_of(Matrix::from_rows({{0.7, 5.0}}))).weights(0, 0), 1.0, kCount);
    const Codebook two{Matrix::from_rows({{2, 3}, {0, 0}}), 0.25};
    const EmbeddingBatch v = reconstruct(two, AssignmentMatrix{Matrix::from_rows({{1, 0}})});
    e.near("reconstruct vertex", v.vectors(0, 0), 2.0, kCount);
    e.near("reconstruct vertex", v.vectors(0, 1), 3.0, kCount);
    const Codebook mid{Matrix::from_rows({{0, 0}, {2, 2}}), 0.25};
    const EmbeddingBatch h = reconstruct(mid, AssignmentMatrix{Matrix::from_rows({{0.5, 0.5}})});
    e.near("reconstruct midpoint", h.vectors(0, 0), 1.0, kCount);
    e.near("reconstruct midpoint", h.vectors(0, 1), 1.0, kCount);
    const Codebook cb2{Matrix(1, 2), 0.25};
    const VqLoss vq = vq_loss(cb2, batch_of(Matrix::from_rows({{1, 0}})),
                              batch_of(Matrix::from_rows({{0, 0}}), Provenance::reconstructed));
    e.near("VQ loss", vq.value, 1.25, kLoss);
    const VqLoss same = vq_loss(cb2, batch_of(Matrix::from_rows({{1, 2}})),
                                batch_of(Matrix::from_rows({{1, 2}}), Provenance::reconstructed));
    e.near("VQ loss, f_hat = f", same.value, 0.0, kCount);
  }
  {  // distribution estimates, entropy, MI
    const Matrix w = Matrix::from_rows({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.1, 0.9}});
    const std::vector<GroupIndices> g = {{0}, {0}, {1}, {1}};
    const AttributeSchema s = numbered_schema({2});
    const ProxyDistributions d = estimate_distributions(AssignmentMatrix{w}, g, s);
    e.near("p_feature[0]", d.p_feature[0], 0.45, kCount);
    e.near("p_feature[1]", d.p_feature[1], 0.55, kCount);
    e.near("p_cond(a)[0]", d.attributes[0].p_cond(0, 0), 0.7, kCount);
    e.near("p_cond(a)[1]", d.attributes[0].p_cond(0, 1), 0.3, kCount);
    e.near("p_cond(b)[0]", d.attributes[0].p_cond(1, 0), 0.2, kCount);
    e.near("p_cond(b)[1]", d.attributes[0].p_cond(1, 1), 0.8, kCount);
    e.near("p_attr[0]", d.attributes[0].p_attr[0], 0.5, kCount);
    e.near("entropy [0.45, 0.55]", entropy(std::vector<double>{0.45, 0.55}), 0.688139, kLoss);
    e.near("entropy [0.5, 0.5]", entropy(std::vector<double>{0.5, 0.5}), std::numbers::ln2, kLoss);
    e.near("entropy [1, 0]", entropy(std::vector<double>{1.0, 0.0}), 0.0, kCount);
    e.near("MI worked example", mi_loss(d).value, 0.132506, kLoss);
    const Matrix sep = Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
    e.near("MI separating assignment", mi_loss(estimate_distributions(AssignmentMatrix{sep}, g, s)).value,
           std::numbers::ln2, kLoss);
    const Matrix same = Matrix::from_rows({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}});
    e.near("MI independent rows", mi_loss(estimate_distributions(AssignmentMatrix{same}, g, s)).value, 0.0, 1e-12);
  }
  {  // contrastive terms
    const ContrastiveConfig unit{1.0};
    const Matrix eye = Matrix::from_rows({{1, 0}, {0, 1}});
    e.near("NT-Xent", nt_xent(batch_of(eye, Provenance::text1), batch_of(eye, Provenance::text2), unit).value,
           0.551445, kLoss);
    const AlignmentLoss al = alignment_loss(batch_of(eye, Provenance::text1), batch_of(eye),
                                            batch_of(eye, Provenance::reconstructed), unit, 10.0);
    e.near("alignment L_txt_img", al.txt_img, 0.313262, kLoss);
    const Matrix single = Matrix::from_rows({{0.3, -1.2}});
    e.near("NT-Xent B = 1", nt_xent(batch_of(single, Provenance::text1), batch_of(single, Provenance::text2), unit).value,
           0.0, kCount);
  }
  {  // discriminator softmax and attribute loss
    const DiscriminatorStack stack(2, {4}, {2});
    ParamStore p;
    Rng rng(3);
    stack.init_params(p, rng);
    for (const auto& name : p.names()) p.set(name, Matrix(p.at(name).rows(), p.at(name).cols()));
    p.set("disc.head0.0.b", Matrix::from_rows({{std::log(3.0), 0.0}}));
    const auto probs = stack.predict(p, Matrix::from_rows({{0.4, -2.0}}));
    e.near("softmax [ln 3, 0][0]", probs[0](0, 0), 0.75, kCount);
    e.near("softmax [ln 3, 0][1]", probs[0](0, 1), 0.25, kCount);
    std::vector<Matrix> uniform;
    for (std::size_t k : {3, 2, 2, 3}) uniform.emplace_back(1, k, 1.0 / static_cast<double>(k));
    e.near("uniform L_att_cls, M = 4", attribute_cls_loss(uniform, {{0, 1, 1, 2}}).value, 3.583519, kLoss);
    e.near("uniform L_att_cls, binary", attribute_cls_loss({Matrix(1, 2, 0.5)}, {{1}}).value, std::numbers::ln2, kLoss);
    e.near("L_total recombination", total_loss({0.5, 2.0, 0.1, 0.3, -0.7}, LossWeights{}), 0.22, kLoss);
  }
  {  // Adam and zero-shot scoring
    ParamStore p;
    p.add("p", Matrix(1, 1, 1.0));
    ParamStore g;
    g.add("p", Matrix(1, 1, 1.0));
    AdamState st = AdamState::zeros_like(p);
    adam_step(p, g, st, AdamConfig{0.1, 0.0, 0.9, 0.999, 1e-8});
    e.near("Adam first step", p.at("p")[0], 1.0 - 0.1 / (1.0 + 1e-8), kCount);
    e.near("Adam first step ~ 0.9", p.at("p")[0], 0.9, kLoss);
    const auto z = zero_shot_scores(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{0, 1}, {1, 0}}), 1.0);
    e.near("zero-shot e/(e+1)", z[0], 0.731059, kLoss);
  }
  {  // metrics
    e.near("AUC perfect", *auc({0.9, 0.8, 0.3}, {1, 1, 0}), 1.0, kCount);
    e.near("AUC tie", *auc({0.5, 0.5}, {1, 0}), 0.5, kCount);
    e.near("AUC pair count", *auc({0.8, 0.7, 0.4, 0.3}, {1, 0, 1, 0}), 0.75, kCount);
    // DPD: group a predicted [1,1,0,0], group b [1,0,0,0]
    const PredictionSet dp = PredictionSet::from_scores({0.9, 0.8, 0.1, 0.2, 0.7, 0.3, 0.2, 0.1}, {1, 0, 1, 0, 1, 0, 1, 0},
                                                        {{0}, {0}, {0}, {0}, {1}, {1}, {1}, {1}});
    e.near("DPD", *dpd(dp, 0).value, 0.25, kCount);
    // DEOdds: group a y=[1,1,0,0] yhat=[1,0,0,0]; group b y=[1,0] yhat=[1,1]
    const PredictionSet eo = PredictionSet::from_scores({0.9, 0.1, 0.2, 0.3, 0.8, 0.7}, {1, 1, 0, 0, 1, 0},
                                                        {{0}, {0}, {0}, {0}, {1}, {1}});
    e.near("DEOdds", *deodds(eo, 0).value, 1.0, kCount);
    e.near("ES-AUC", *es_auc(0.8, {0.9, 0.7}), 0.8 / 1.2, kCount);
    e.near("ES-AUC ~ 0.666667", *es_auc(0.8, {0.9, 0.7}), 0.666667, kLoss);
    e.near("ES-AUC equal groups", *es_auc(0.8, {0.8, 0.8}), 0.8, kCount);
    e.near("weighted F1", weighted_f1({1, 1, 0, 0}, {1, 0, 0, 0}), 0.5 * (2.0 / 3.0) + 0.5 * 0.8, kCount);
    e.near("weighted F1 ~ 0.733333", weighted_f1({1, 1, 0, 0}, {1, 0, 0, 0}), 0.733333, kLoss);
    e.near("weighted F1 perfect", weighted_f1({1, 0, 1}, {1, 0, 1}), 1.0, kCount);
    e.near("weighted F1 all wrong", weighted_f1({1, 1, 0, 0}, {0, 0, 1, 1}), 0.0, kCount);
    e.near("ES-F1", *es_f1(0.7, {0.8, 0.6}), 0.7 / 1.2, kCount);
    e.near("ES-F1 ~ 0.583333", *es_f1(0.7, {0.8, 0.6}), 0.583333, kLoss);
    const AttributeSchema s = numbered_schema({2});
    e.near("report DPD", *build_report(dp, s).attributes[0].dpd, 0.25, kCount);
    e.near("report DEOdds", *build_report(eo, s).attributes[0].deodds, 1.0, kCount);
  }
  {  // synthetic generator: least-squares probe on a strongly biased attribute
    const AttributeSchema schema = AttributeSchema::two_attribute_default();
    SyntheticSpec spec;
    spec.n_samples = 2000;
    spec.bias_strength = 2.0;
    spec.noise_std = 0.1;
    spec.notes_k = 1;
    const auto data = generate_synthetic(spec, schema);
    const std::vector<Sample> tr(data.begin(), data.begin() + 1000), te(data.begin() + 1000, data.end());
    std::vector<int> ytr, yte;
    for (const auto& s : tr) ytr.push_back(static_cast<int>(s.attributes[1]));
    for (const auto& s : te) yte.push_back(static_cast<int>(s.attributes[1]));
    const double acc = least_squares_probe_accuracy(feature_matrix(tr), ytr, feature_matrix(te), yte);
    e.that("least-squares probe accuracy " + num(acc) + " > 0.95", acc > 0.95);
  }
  {  // notes: gender token frequencies, one-token edits, Lipschitz bound
    const AttributeSchema schema = AttributeSchema::two_attribute_default();
    std::size_t with_gender = 0, female = 0;
    for (std::uint64_t s = 0; with_gender < 10000; ++s) {
      const NoteVariants nv = synthesize_notes(static_cast<int>(s % 2), {0, 0}, schema, 5, s);
      for (const auto& v : nv.randomized) {
        const auto toks = tokenize(v);
        const bool f = std::find(toks.begin(), toks.end(), "female") != toks.end();
        const bool m = std::find(toks.begin(), toks.end(), "male") != toks.end();
        if (f || m) {
          ++with_gender;
          female += f ? 1 : 0;
        }
      }
    }
    const double rate = static_cast<double>(female) / static_cast<double>(with_gender);
    e.that("gender token frequency " + num(rate) + " = 0.5 +- 0.02", std::abs(rate - 0.5) <= 0.02);

    const std::string a = "Glaucoma suspect findings noted. The patient is female. Follow up in six months.";
    const std::string b = "Glaucoma suspect findings noted. The patient is male. Follow up in six months.";
    const auto ta = embed_tokens(a, 256), tb = embed_tokens(b, 256);
    std::size_t diff = 0;
    double dtok = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) {
      diff += ta[i] != tb[i] ? 1 : 0;
      dtok += (ta[i] - tb[i]) * (ta[i] - tb[i]);
    }
    e.that("one demographic token changes <= 2 coordinates", diff <= 2);

    ParamStore params;
    Rng rng(9);
    init_encoder_params(params, EncoderConfig{}, rng);
    const Mlp txt = Mlp::from_store(params, kTextPrefix);
    double lipschitz = 1.0;
    for (std::size_t l = 0; l < txt.layer_count(); ++l) lipschitz *= spectral_norm(params.at(txt.weight_name(l)));
    Matrix both(2, 256);
    std::copy(ta.begin(), ta.end(), both.row(0).begin());
    std::copy(tb.begin(), tb.end(), both.row(1).begin());
    const Matrix emb = encode_text(params, both, Provenance::text1).vectors;
    double demb = 0.0;
    for (std::size_t d = 0; d < emb.cols(); ++d) demb += (emb(0, d) - emb(1, d)) * (emb(0, d) - emb(1, d));
    e.that("embedding distance within Lipschitz bound",
           std::sqrt(demb) <= lipschitz * std::sqrt(dtok) * (1.0 + 1e-9));
  }
  return make_result("Analytic fixtures (1e-6 losses, 1e-12 counting)", t0, e.failures().empty(), e.summary());
}

// ---------------------------------------------------------------------------

namespace {

PredictionSet random_prediction_set(Rng& rng, const std::vector<std::size_t>& counts) {
  const std::size_t n = 2 + rng.index(199);
  const double rate = 0.1 + 0.8 * rng.uniform();
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  const std::uint64_t grid = rng.uniform() < 0.5 ? 10 : 1000;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.uniform() < rate ? 1 : 0;
    scores[i] = static_cast<double>(rng.index(grid + 1)) / static_cast<double>(grid);
  }
  return PredictionSet::from_scores(std::move(scores), std::move(labels), random_groups(rng, n, counts), 0.5);
}

bool same_values(const GroupReport& a, const GroupReport& b) {
  return a.group == b.group && a.auc == b.auc && a.f1 == b.f1 && a.positive_rate == b.positive_rate &&
         a.tpr == b.tpr && a.fpr == b.fpr;
}

bool same_values(const AttributeReport& a, const AttributeReport& b, bool match_groups_by_name) {
  if (!(a.attribute == b.attribute && a.dpd == b.dpd && a.deodds == b.deodds && a.es_auc == b.es_auc &&
        a.worst_group_auc == b.worst_group_auc && a.es_f1 == b.es_f1 && a.worst_group_f1 == b.worst_group_f1 &&
        a.groups.size() == b.groups.size())) {
    return false;
  }
  for (const auto& g : a.groups) {
    const auto it = std::find_if(b.groups.begin(), b.groups.end(), [&](const GroupReport& h) { return h.group == g.group; });
    if (it == b.groups.end() || !same_values(g, *it)) return false;
    if (!match_groups_by_name && it - b.groups.begin() != &g - a.groups.data()) return false;
  }
  return true;
}

bool same_values(const FairnessReport& a, const FairnessReport& b, bool by_name) {
  if (!(a.auc == b.auc && a.weighted_f1 == b.weighted_f1 && a.attributes.size() == b.attributes.size())) return false;
  for (std::size_t m = 0; m < a.attributes.size(); ++m) {
    if (!same_values(a.attributes[m], b.attributes[m], by_name)) return false;
  }
  return true;
}

}  // namespace

CriterionResult metric_invariants(std::size_t cases, std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(seed);
  const std::vector<std::size_t> counts = {3, 2};
  const AttributeSchema schema = AttributeSchema::two_attribute_default();
  std::size_t relabel_bad = 0, dup_bad = 0, es_bad = 0, worst_bad = 0;

  for (std::size_t k = 0; k < cases; ++k) {  // group relabeling
    const PredictionSet p = random_prediction_set(rng, counts);
    std::vector<std::vector<std::size_t>> perm(counts.size());
    std::vector<Attribute> attrs;
    for (std::size_t m = 0; m < counts.size(); ++m) {
      perm[m].resize(counts[m]);
      for (std::size_t g = 0; g < counts[m]; ++g) perm[m][g] = g;
      rng.shuffle(perm[m]);
      Attribute a{schema[m].name, std::vector<std::string>(counts[m])};
      for (std::size_t g = 0; g < counts[m]; ++g) a.values[perm[m][g]] = schema[m].values[g];
      attrs.push_back(std::move(a));
    }
    PredictionSet q = p;
    for (auto& row : q.attributes) {
      for (std::size_t m = 0; m < row.size(); ++m) row[m] = perm[m][row[m]];
    }
    if (!same_values(build_report(p, schema), build_report(q, AttributeSchema(attrs)), true)) ++relabel_bad;
  }
  for (std::size_t k = 0; k < cases; ++k) {  // duplication
    const PredictionSet p = random_prediction_set(rng, counts);
    PredictionSet d = p;
    d.scores.insert(d.scores.end(), p.scores.begin(), p.scores.end());
    d.labels.insert(d.labels.end(), p.labels.begin(), p.labels.end());
    d.predicted.insert(d.predicted.end(), p.predicted.begin(), p.predicted.end());
    d.attributes.insert(d.attributes.end(), p.attributes.begin(), p.attributes.end());
    if (!same_values(build_report(p, schema), build_report(d, schema), false)) ++dup_bad;
  }
  for (std::size_t k = 0; k < cases; ++k) {  // ES-AUC <= AUC, equality iff all groups equal
    const PredictionSet p = random_prediction_set(rng, counts);
    const FairnessReport r = build_report(p, schema);
    for (const auto& a : r.attributes) {
      if (!a.es_auc) continue;
      if (*a.es_auc > *r.auc) ++es_bad;
      bool all_equal = true;
      for (const auto& g : a.groups) all_equal = all_equal && (!g.auc || std::abs(*g.auc - *r.auc) <= 1e-12);
      // With AUC = 0 the ratio is 0 whatever the deviations.
      if (*r.auc > 0.0 && (std::abs(*a.es_auc - *r.auc) <= 1e-12) != all_equal) ++es_bad;
    }
    // Same property on direct inputs, where equal groups occur often.
    const double overall = static_cast<double>(1 + rng.index(4)) / 4.0;
    std::vector<std::optional<double>> groups;
    for (std::size_t g = 0; g < 3; ++g) groups.push_back(rng.uniform() < 0.5 ? overall : rng.uniform());
    const double es = *es_auc(overall, groups);
    bool eq = true;
    for (const auto& g : groups) eq = eq && std::abs(*g - overall) <= 1e-12;
    if (es > overall || (std::abs(es - overall) <= 1e-12) != eq) ++es_bad;
  }
  for (std::size_t k = 0; k < cases; ++k) {  // worst-group minimality
    const FairnessReport r = build_report(random_prediction_set(rng, counts), schema);
    for (const auto& a : r.attributes) {
      std::vector<double> defined;
      for (const auto& g : a.groups) {
        if (g.auc) defined.push_back(*g.auc);
      }
      if (defined.empty()) {
        if (a.worst_group_auc) ++worst_bad;
        continue;
      }
      if (!a.worst_group_auc) {
        ++worst_bad;
        continue;
      }
      bool attained = false;
      for (double v : defined) {
        if (*a.worst_group_auc > v) ++worst_bad;
        attained = attained || *a.worst_group_auc == v;
      }
      if (!attained) ++worst_bad;
    }
  }
  const bool ok = relabel_bad + dup_bad + es_bad + worst_bad == 0;
  return make_result("Fairness-metric invariants", t0, ok,
                     std::to_string(cases) + " cases each; violations: relabel " + std::to_string(relabel_bad) +
                         ", duplication " + std::to_string(dup_bad) + ", ES-AUC " + std::to_string(es_bad) +
                         ", worst-group " + std::to_string(worst_bad));
}

CriterionResult sampler_frequencies(std::size_t draws, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const std::size_t K = 5;
  NoteVariants nv{"neutral", {}};
  for (std::size_t k = 0; k < K; ++k) nv.randomized.push_back("variant " + std::to_string(k));
  std::string detail;
  bool ok = true;
  double worst_z = 0.0;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(p * 100)));
    std::vector<std::size_t> first(K + 1, 0);
    std::size_t collisions = 0;
    for (std::size_t d = 0; d < draws; ++d) {
      const TextPair tp = sample_text_pair(nv, SelectionConfig{p, 0}, rng);
      ++first[tp.first];
      collisions += tp.first == tp.second ? 1 : 0;
    }
    const auto n = static_cast<double>(draws);
    for (std::size_t v = 0; v <= K; ++v) {
      const double prob = v == 0 ? p : (1.0 - p) / static_cast<double>(K);
      const double sigma = std::sqrt(n * prob * (1.0 - prob));
      const double dev = std::abs(static_cast<double>(first[v]) - n * prob);
      if (sigma == 0.0) {
        ok = ok && dev == 0.0;
      } else {
        worst_z = std::max(worst_z, dev / sigma);
        ok = ok && dev <= 3.0 * sigma;
      }
    }
    ok = ok && collisions == 0;
    detail += "p=" + num(p, "%.2f") + " neutral " + std::to_string(first[0]) + "; ";
  }
  return make_result("Variant sampler frequencies (3 sigma, " + std::to_string(draws) + " draws)", t0, ok,
                     detail + "worst |z| " + num(worst_z, "%.2f"));
}

// ---------------------------------------------------------------------------

CriterionResult determinism(const std::filesystem::path& scratch) {
  const auto t0 = Clock::now();
  namespace fs = std::filesystem;
  const fs::path root = scratch / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const AttributeSchema schema = AttributeSchema::two_attribute_default();
  SyntheticSpec spec;
  spec.n_samples = 640;
  spec.seed = 3;
  save_dataset(root / "data.jsonl", generate_synthetic(spec, schema), schema);

  RunConfig cfg;
  cfg.dataset = (root / "data.jsonl").string();
  cfg.epochs = 2;
  cfg.lr_main = 1e-4;
  cfg.lr_disc = 5e-4;
  cfg.seed = 7;
  cfg.probe.epochs = 50;

  const std::vector<std::string> files = {"checkpoint.json",        "train_log.csv",
                                          "epoch_reports.jsonl",    "zero_shot/report.json",
                                          "zero_shot/report.csv",   "zero_shot/predictions.json",
                                          "probe/report.json",      "probe/report.csv",
                                          "probe/predictions.json"};
  bool roundtrip = true;
  for (const char* run : {"run_a", "run_b"}) {
    RunConfig c = cfg;
    c.out_dir = (root / run).string();
    TrainOptions opts;
    opts.out_dir = root / run;
    const TrainResult tr = train_from_config(c, opts);
    const Checkpoint ck = load_checkpoint(root / run / "checkpoint.json");
    roundtrip = roundtrip && ck.model == tr.checkpoint.model && ck.discriminator == tr.checkpoint.discriminator;
    const auto data = load_dataset(cfg.dataset, schema);
    write_eval_files(root / run / "zero_shot", evaluate_checkpoint(ck, data, Protocol::zero_shot));
    write_eval_files(root / run / "probe", evaluate_checkpoint(ck, data, Protocol::probe));
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  std::size_t identical = 0;
  std::string differing;
  for (const auto& f : files) {
    const std::string a = slurp(root / "run_a" / f), b = slurp(root / "run_b" / f);
    if (!a.empty() && a == b) ++identical;
    else differing += " " + f;
  }
  const bool ok = identical == files.size() && roundtrip;
  return make_result("Determinism (two identical runs)", t0, ok,
                     std::to_string(identical) + "/" + std::to_string(files.size()) +
                         " files bit-identical (checkpoint, logs, reports)" +
                         (roundtrip ? ", checkpoint round-trip exact" : ", checkpoint round-trip differs") +
                         (differing.empty() ? "" : "; differ:" + differing));
}

// ---------------------------------------------------------------------------

SyntheticSpec demo_synthetic_spec(const DemoOptions& opt) {
  SyntheticSpec spec;
  spec.n_samples = opt.n_samples + opt.held_out;
  spec.bias_strength = opt.bias_strength;
  spec.seed = opt.data_seed;
  spec.label_prior_per_group = LabelPriorPerGroup{0, opt.race_positive_rate};
  return spec;
}

RunConfig demo_run_config(const DemoOptions& opt, std::uint64_t seed, bool full_objective) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.epochs = opt.epochs;
  cfg.lr_main = opt.lr_main;
  cfg.lr_disc = opt.lr_disc;
  cfg.probe = opt.probe;
  if (!full_objective) {
    cfg.lambda_mi = 0.0;
    cfg.lambda_adv = 0.0;
    cfg.lambda_txt_txt = 0.0;
  }
  return cfg;
}

DemoOutcome run_debiasing_demo(const DemoOptions& opt) {
  const auto t0 = Clock::now();
  const AttributeSchema schema = AttributeSchema::two_attribute_default();
  const auto all = generate_synthetic(demo_synthetic_spec(opt), schema);
  const std::vector<Sample> data(all.begin(), all.begin() + static_cast<long>(opt.n_samples));
  const std::vector<Sample> held(all.begin() + static_cast<long>(opt.n_samples), all.end());

  DemoOutcome out;
  double shift = 0.0, auc_base = 0.0, auc_full = 0.0;
  for (std::uint64_t seed : opt.seeds) {
    DemoSeed ds{seed, {}, {}};
    for (bool full : {false, true}) {
      const RunConfig cfg = demo_run_config(opt, seed, full);
      const auto [train_part, validation_part] = train_validation_split(cfg, data);
      TrainOptions topts;
      topts.evaluate_epochs = false;
      const TrainResult tr = train(cfg, train_part, validation_part, schema, topts);
      if (tr.aborted) throw NumericalError("demo training aborted: " + tr.abort_reason);
      const ParamStore& model = tr.checkpoint.model;
      const AttributeProbeResult ap = attribute_probe(model, train_part, held, schema, opt.probe, mix_seed(seed, 91));
      const FairnessReport rep = build_report(linear_probe(model, train_part, held, opt.probe, mix_seed(seed, 92)), schema);
      DemoArm& arm = full ? ds.full : ds.baseline;
      arm.attribute_accuracy = ap.mean_accuracy;
      arm.chance = ap.mean_chance;
      arm.auc = rep.auc.value_or(0.0);
      for (const auto& a : rep.attributes) {
        arm.dpd += a.dpd.value_or(0.0) / static_cast<double>(rep.attributes.size());
        arm.deodds += a.deodds.value_or(0.0) / static_cast<double>(rep.attributes.size());
      }
      if (opt.progress) {
        *opt.progress << "  seed " << seed << (full ? " full    " : " baseline") << ": attribute acc "
                      << num(arm.attribute_accuracy, "%.4f") << " (chance " << num(arm.chance, "%.4f")
                      << "), probe AUC " << num(arm.auc, "%.4f") << ", DPD " << num(arm.dpd, "%.4f") << ", DEOdds "
                      << num(arm.deodds, "%.4f") << "  [" << num(since(t0), "%.0f") << " s]\n";
        opt.progress->flush();
      }
    }
    shift += std::abs(ds.baseline.attribute_accuracy - ds.baseline.chance) -
             std::abs(ds.full.attribute_accuracy - ds.full.chance);
    out.dpd_decreases += ds.full.dpd < ds.baseline.dpd ? 1 : 0;
    auc_base += ds.baseline.auc;
    auc_full += ds.full.auc;
    out.seeds.push_back(ds);
  }
  const auto n = static_cast<double>(opt.seeds.size());
  out.mean_shift_toward_chance = 100.0 * shift / n;
  out.mean_auc_gap = 100.0 * std::abs(auc_full - auc_base) / n;
  out.seconds = since(t0);
  return out;
}

CriterionResult debiasing_demonstration(const DemoOptions& opt) {
  const auto t0 = Clock::now();
  const DemoOutcome d = run_debiasing_demo(opt);
  const std::size_t need = (2 * opt.seeds.size() + 2) / 3;  // 2 of 3
  const bool a = d.mean_shift_toward_chance >= 10.0;
  const bool b = d.dpd_decreases >= need && d.mean_auc_gap <= 5.0;
  const bool ok = a && b && d.seconds < 900.0;
  return make_result("Debiasing demonstration (" + std::to_string(opt.seeds.size()) + " seeds)", t0, ok,
                     "(a) attribute probe moves " + num(d.mean_shift_toward_chance, "%.1f") +
                         " points toward chance (need >= 10); (b) probe DPD lower in " +
                         std::to_string(d.dpd_decreases) + "/" + std::to_string(opt.seeds.size()) +
                         " seeds (need " + std::to_string(need) + "), mean AUC gap " +
                         num(d.mean_auc_gap, "%.2f") + " points (need <= 5)");
}

std::vector<CriterionResult> run_suite(bool include_training, const std::filesystem::path& scratch,
                                       std::ostream* out) {
  std::vector<std::function<CriterionResult()>> steps = {
      [] { return mi_oracle_equivalence(); },   [] { return auc_oracle_equivalence(); },
      [] { return gradient_suite(); },          [] { return analytic_fixtures(); },
      [] { return metric_invariants(); },
  };
  if (include_training) {
    steps.push_back([out] {
      DemoOptions opt;
      opt.progress = out;
      return debiasing_demonstration(opt);
    });
    steps.push_back([&scratch] { return determinism(scratch); });
  }
  steps.push_back([] { return sampler_frequencies(); });

  std::vector<CriterionResult> results;
  for (const auto& step : steps) {
    CriterionResult r;
    const auto t0 = Clock::now();
    try {
      r = step();
    } catch (const std::exception& e) {
      r = CriterionResult{"(criterion raised)", false, e.what(), since(t0)};
    }
    if (out) {
      *out << format_result(r) << '\n';
      out->flush();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace fairenc::check
