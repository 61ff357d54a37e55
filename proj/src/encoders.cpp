#include "fairenc/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fairenc/errors.hpp"
#include "fairenc/kernels.hpp"

namespace fairenc {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::image: return "image";
    case Provenance::text1: return "text1";
    case Provenance::text2: return "text2";
    case Provenance::reconstructed: return "reconstructed";
  }
  return "unknown";
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths, bool relu_on_output)
    : prefix_(std::move(prefix)), widths_(std::move(widths)), relu_on_output_(relu_on_output) {
  if (widths_.size() < 2) throw ConfigError("Mlp '" + prefix_ + "' needs at least one layer");
  for (auto w : widths_) {
    if (w == 0) throw ConfigError("Mlp '" + prefix_ + "' has a zero-width layer");
  }
}

Mlp Mlp::from_store(const ParamStore& params, const std::string& prefix, bool relu_on_output) {
  std::vector<std::size_t> widths;
  for (std::size_t l = 0;; ++l) {
    const std::string w = prefix + "." + std::to_string(l) + ".w";
    if (!params.contains(w)) break;
    const auto& m = params.at(w);
    if (widths.empty()) {
      widths.push_back(m.rows());
    } else if (widths.back() != m.rows()) {
      throw DimensionError("layer " + w + " does not chain with the previous layer");
    }
    widths.push_back(m.cols());
  }
  if (widths.empty()) throw ConfigError("no layers with prefix '" + prefix + "'");
  return Mlp(prefix, std::move(widths), relu_on_output);
}

std::string Mlp::weight_name(std::size_t l) const { return prefix_ + "." + std::to_string(l) + ".w"; }
std::string Mlp::bias_name(std::size_t l) const { return prefix_ + "." + std::to_string(l) + ".b"; }

void Mlp::init_params(ParamStore& params, Rng& rng) const {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t fan_in = widths_[l], fan_out = widths_[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (double& v : w.values()) v = rng.uniform(-a, a);
    params.add(weight_name(l), std::move(w));
    params.add(bias_name(l), Matrix(1, fan_out));
  }
}

Matrix Mlp::forward(const ParamStore& params, const Matrix& x, MlpTrace* trace) const {
  if (x.cols() != input_dim()) {
    throw DimensionError(prefix_ + ": expected input width " + std::to_string(input_dim()) + ", got " +
                         std::to_string(x.cols()));
  }
  if (trace) {
    trace->inputs.clear();
    trace->preactivations.clear();
  }
  Matrix a = x;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const Matrix& w = params.at(weight_name(l));
    const Matrix& b = params.at(bias_name(l));
    Matrix z = kernels::matmul(a, w);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    }
    if (trace) {
      trace->inputs.push_back(std::move(a));
      trace->preactivations.push_back(z);
    }
    const bool relu = l + 1 < layer_count() || relu_on_output_;
    if (relu) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    }
    a = std::move(z);
  }
  return a;
}

Matrix Mlp::backward(const ParamStore& params, const MlpTrace& trace, const Matrix& grad_out,
                     ParamStore* grads) const {
  if (trace.inputs.size() != layer_count()) throw ConfigError(prefix_ + ": trace does not match network");
  Matrix g = grad_out;
  for (std::size_t l = layer_count(); l-- > 0;) {
    const bool relu = l + 1 < layer_count() || relu_on_output_;
    if (relu) {
      const Matrix& z = trace.preactivations[l];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(z[i] > 0.0)) g[i] = 0.0;
      }
    }
    if (grads) {
      grads->accumulate(weight_name(l), kernels::matmul_tn(trace.inputs[l], g));
      Matrix gb(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const auto row = g.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
      }
      grads->accumulate(bias_name(l), gb);
    }
    g = kernels::matmul_nt(g, params.at(weight_name(l)));
  }
  return g;
}

void init_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng) {
  std::vector<std::size_t> img{cfg.d_in};
  std::vector<std::size_t> txt{cfg.vocab_dim};
  for (auto h : cfg.hidden) {
    img.push_back(h);
    txt.push_back(h);
  }
  img.push_back(cfg.embed_dim);
  txt.push_back(cfg.embed_dim);
  Mlp(kImagePrefix, img).init_params(params, rng);
  Mlp(kTextPrefix, txt).init_params(params, rng);
}

namespace {

EmbeddingBatch encode(const ParamStore& params, const char* prefix, const Matrix& x, Provenance p,
                      std::vector<std::int64_t> ids, MlpTrace* trace) {
  const Mlp net = Mlp::from_store(params, prefix);
  if (!ids.empty() && ids.size() != x.rows()) throw DimensionError("one id per input row required");
  if (ids.empty()) {
    ids.resize(x.rows());
    std::iota(ids.begin(), ids.end(), std::int64_t{0});
  }
  EmbeddingBatch out{net.forward(params, x, trace), p, std::move(ids)};
  if (!out.vectors.all_finite()) throw NumericalError(std::string(prefix) + ": non-finite embedding");
  return out;
}

}  // namespace

EmbeddingBatch encode_image(const ParamStore& params, const Matrix& features,
                            std::vector<std::int64_t> ids, MlpTrace* trace) {
  return encode(params, kImagePrefix, features, Provenance::image, std::move(ids), trace);
}

EmbeddingBatch encode_text(const ParamStore& params, const Matrix& token_vectors, Provenance slot,
                           std::vector<std::int64_t> ids, MlpTrace* trace) {
  if (slot != Provenance::text1 && slot != Provenance::text2) {
    throw ConfigError("encode_text: provenance must be text1 or text2");
  }
  return encode(params, kTextPrefix, token_vectors, slot, std::move(ids), trace);
}

GradCheckReport check_gradients(const LossFunction& loss, const ParamStore& params,
                                const GradCheckOptions& options) {
  if (!(options.h > 0.0)) throw ConfigError("check_gradients: h must be positive");
  const LossEvaluation base = loss(params);
  if (!base.gradient.same_layout(params)) throw DimensionError("check_gradients: gradient layout differs");

  struct Coord {
    std::size_t group;
    std::size_t index;
  };
  std::vector<std::size_t> groups;
  for (std::size_t g = 0; g < params.names().size(); ++g) {
    const auto& name = params.names()[g];
    if (options.groups.empty() ||
        std::find(options.groups.begin(), options.groups.end(), name) != options.groups.end()) {
      groups.push_back(g);
    }
  }
  std::vector<Coord> all;
  for (auto g : groups) {
    for (std::size_t i = 0; i < params.at(params.names()[g]).size(); ++i) all.push_back({g, i});
  }
  std::vector<Coord> coords;
  if (options.max_coordinates == 0 || all.size() <= options.max_coordinates) {
    coords = all;
  } else {
    Rng rng(options.seed);
    std::set<std::pair<std::size_t, std::size_t>> chosen;
    for (auto g : groups) {
      const auto n = params.at(params.names()[g]).size();
      if (n) chosen.insert({g, static_cast<std::size_t>(rng.index(n))});
    }
    while (chosen.size() < options.max_coordinates) {
      const auto& c = all[rng.index(all.size())];
      chosen.insert({c.group, c.index});
    }
    for (const auto& [g, i] : chosen) coords.push_back({g, i});
  }

  GradCheckReport report;
  ParamStore probe = params;
  for (const auto& c : coords) {
    const auto& name = params.names()[c.group];
    const double x0 = params.at(name)[c.index];
    const std::string id = name + "[" + std::to_string(c.index) + "]";
    probe.set_coordinate(name, c.index, x0 + options.h);
    const double fp = loss(probe).value;
    probe.set_coordinate(name, c.index, x0 - options.h);
    const double fm = loss(probe).value;
    probe.set_coordinate(name, c.index, x0);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericalError("check_gradients: non-finite loss probing " + id);
    }
    const double numeric = (fp - fm) / (2.0 * options.h);
    const double analytic = base.gradient.at(name)[c.index];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.coordinates_checked;
    if (rel > report.max_relative_error || report.worst_coordinate.empty()) {
      report.max_relative_error = std::max(rel, report.max_relative_error);
      if (rel >= report.max_relative_error) report.worst_coordinate = id;
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

}  // namespace fairenc
