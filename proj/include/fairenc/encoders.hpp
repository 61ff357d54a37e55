#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairenc/matrix.hpp"
#include "fairenc/param_store.hpp"
#include "fairenc/random.hpp"

namespace fairenc {

enum class Provenance { image, text1, text2, reconstructed };

const char* to_string(Provenance p);

struct EmbeddingBatch {
  Matrix vectors;  // B x D
  Provenance provenance = Provenance::image;
  std::vector<std::int64_t> sample_ids;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
};

// Activations kept by a forward pass for the matching backward pass.
struct MlpTrace {
  std::vector<Matrix> inputs;       // input to layer l
  std::vector<Matrix> preactivations;
};

// Fully connected stack whose weights live in a ParamStore under
// "<prefix>.<l>.w" (fan_in x fan_out) and "<prefix>.<l>.b" (1 x fan_out).
// ReLU follows every layer except the last, unless relu_on_output is set.
class Mlp {
 public:
  Mlp(std::string prefix, std::vector<std::size_t> widths, bool relu_on_output = false);

  // Recover the layer widths from groups already present in the store.
  static Mlp from_store(const ParamStore& params, const std::string& prefix,
                        bool relu_on_output = false);

  // Glorot-uniform weights, zero biases.
  void init_params(ParamStore& params, Rng& rng) const;

  Matrix forward(const ParamStore& params, const Matrix& x, MlpTrace* trace = nullptr) const;
  // Accumulates parameter gradients into `grads` (if non-null) and returns dL/dx.
  Matrix backward(const ParamStore& params, const MlpTrace& trace, const Matrix& grad_out,
                  ParamStore* grads) const;

  std::size_t layer_count() const { return widths_.size() - 1; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }
  const std::string& prefix() const { return prefix_; }
  std::string weight_name(std::size_t l) const;
  std::string bias_name(std::size_t l) const;

 private:
  std::string prefix_;
  std::vector<std::size_t> widths_;
  bool relu_on_output_;
};

struct EncoderConfig {
  std::size_t d_in = 32;
  std::size_t vocab_dim = 256;
  std::vector<std::size_t> hidden = {64, 32};
  std::size_t embed_dim = 16;

  bool operator==(const EncoderConfig&) const = default;
};

inline constexpr const char* kImagePrefix = "img";
inline constexpr const char* kTextPrefix = "txt";

// Creates img.* and txt.* groups.
void init_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng);

EmbeddingBatch encode_image(const ParamStore& params, const Matrix& features,
                            std::vector<std::int64_t> ids = {}, MlpTrace* trace = nullptr);
EmbeddingBatch encode_text(const ParamStore& params, const Matrix& token_vectors, Provenance slot,
                           std::vector<std::int64_t> ids = {}, MlpTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct LossEvaluation {
  double value = 0.0;
  ParamStore gradient;  // same layout as the parameters
};

using LossFunction = std::function<LossEvaluation(const ParamStore&)>;

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every coordinate; otherwise a seeded subset of this size
  // (always including one coordinate per group).
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  // Relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
  // Restrict to these groups; empty means all.
  std::vector<std::string> groups;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_coordinate;
  std::size_t coordinates_checked = 0;
  bool passed = true;
};

GradCheckReport check_gradients(const LossFunction& loss, const ParamStore& params,
                                const GradCheckOptions& options = {});

}  // namespace fairenc
