#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairenc/matrix.hpp"
#include "fairenc/notes.hpp"
#include "fairenc/schema.hpp"
#include "json.hpp"

namespace fairenc {

struct Sample {
  std::int64_t id = 0;
  std::vector<double> image_features;
  NoteVariants notes;
  GroupIndices attributes;
  int label = 0;  // 1 = glaucoma

  bool operator==(const Sample&) const = default;
};

// Positive-label rate conditioned on the group of one attribute.
struct LabelPriorPerGroup {
  std::size_t attribute = 0;
  std::vector<double> positive_rate;

  bool operator==(const LabelPriorPerGroup&) const = default;
};

struct SyntheticSpec {
  std::size_t n_samples = 4000;
  std::size_t d_in = 32;
  double class_separation = 2.0;
  double bias_strength = 2.0;
  // One probability vector per schema attribute. Empty means uniform.
  std::vector<std::vector<double>> group_priors;
  double label_prior = 0.5;
  std::optional<LabelPriorPerGroup> label_prior_per_group;
  double noise_std = 1.0;
  std::size_t notes_k = 5;
  std::uint64_t seed = 0;

  // Throws SchemaError / DimensionError / ConfigError.
  void validate(const AttributeSchema& schema) const;
  std::size_t required_directions(const AttributeSchema& schema) const;

  nlohmann::json to_json(const AttributeSchema& schema) const;
  static SyntheticSpec from_json(const nlohmann::json& j, const AttributeSchema& schema);

  bool operator==(const SyntheticSpec&) const = default;
};

// Fixed orthonormal directions used by the generator: row 0 carries the label
// signal, the following rows one direction per (attribute, group) in schema order.
Matrix generator_directions(const SyntheticSpec& spec, const AttributeSchema& schema);

// x = (y - 1/2) * class_separation * u + bias_strength * sum_m v(m, a_m) + noise_std * N(0, I)
std::vector<Sample> generate_synthetic(const SyntheticSpec& spec, const AttributeSchema& schema,
                                       const TemplateBank& bank = TemplateBank::builtin());

nlohmann::json sample_to_json(const Sample& s, const AttributeSchema& schema);
Sample sample_from_json(const nlohmann::json& j, const AttributeSchema& schema);

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples,
                  const AttributeSchema& schema);
// Throws ParseError (with line number) or SchemaError naming line and field.
std::vector<Sample> load_dataset(const std::filesystem::path& path, const AttributeSchema& schema);

struct Batch {
  std::vector<std::size_t> indices;  // positions in the source sample list
};

// Seeded shuffle, then contiguous chunks. batch_size >= 2.
std::vector<Batch> make_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                std::uint64_t seed, bool drop_last);

// Seeded split; the second part holds round(fraction * n) samples.
std::pair<std::vector<Sample>, std::vector<Sample>> split_samples(const std::vector<Sample>& samples,
                                                                  double fraction,
                                                                  std::uint64_t seed);

Matrix feature_matrix(const std::vector<Sample>& samples);

}  // namespace fairenc
