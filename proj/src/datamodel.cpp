#include "fairenc/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fairenc/errors.hpp"
#include "fairenc/random.hpp"

namespace fairenc {
namespace {

constexpr std::uint64_t kDirectionStream = 0;
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kNoteStream = 2;

void check_probability_vector(const std::vector<double>& p, const std::string& what) {
  if (p.empty()) throw SchemaError(what + ": empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw SchemaError(what + ": negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw SchemaError(what + ": probabilities do not sum to 1");
}

std::vector<double> uniform_prior(std::size_t n) { return std::vector<double>(n, 1.0 / n); }

}  // namespace

std::size_t SyntheticSpec::required_directions(const AttributeSchema& schema) const {
  std::size_t n = 1;
  for (const auto& a : schema.attributes()) n += a.values.size();
  return n;
}

void SyntheticSpec::validate(const AttributeSchema& schema) const {
  if (schema.empty()) throw SchemaError("synthetic generator needs a nonempty schema");
  if (!group_priors.empty()) {
    if (group_priors.size() != schema.size()) {
      throw SchemaError("group_priors must have one vector per attribute");
    }
    for (std::size_t m = 0; m < schema.size(); ++m) {
      if (group_priors[m].size() != schema.group_count(m)) {
        throw SchemaError("group_priors for '" + schema[m].name + "' has the wrong length");
      }
      check_probability_vector(group_priors[m], "group_priors." + schema[m].name);
    }
  }
  if (!(label_prior >= 0.0 && label_prior <= 1.0)) throw SchemaError("label_prior outside [0, 1]");
  if (label_prior_per_group) {
    const auto& lp = *label_prior_per_group;
    if (lp.attribute >= schema.size()) throw SchemaError("label_prior_per_group: bad attribute");
    if (lp.positive_rate.size() != schema.group_count(lp.attribute)) {
      throw SchemaError("label_prior_per_group: one rate per group required");
    }
    for (double r : lp.positive_rate) {
      if (!(r >= 0.0 && r <= 1.0)) throw SchemaError("label_prior_per_group: rate outside [0, 1]");
    }
  }
  if (!(class_separation >= 0.0)) throw ConfigError("class_separation must be >= 0");
  if (!(bias_strength >= 0.0)) throw ConfigError("bias_strength must be >= 0");
  if (!(noise_std > 0.0)) throw ConfigError("noise_std must be > 0");
  if (notes_k < 1) throw ConfigError("notes_k must be >= 1");
  if (d_in < required_directions(schema)) {
    throw DimensionError("d_in = " + std::to_string(d_in) + " is smaller than the " +
                         std::to_string(required_directions(schema)) +
                         " orthogonal directions the schema needs");
  }
}

nlohmann::json SyntheticSpec::to_json(const AttributeSchema& schema) const {
  nlohmann::json j = {{"n_samples", n_samples},     {"d_in", d_in},
                      {"class_separation", class_separation},
                      {"bias_strength", bias_strength},
                      {"label_prior", label_prior}, {"noise_std", noise_std},
                      {"notes_k", notes_k},         {"seed", seed}};
  if (!group_priors.empty()) {
    nlohmann::json gp = nlohmann::json::object();
    for (std::size_t m = 0; m < group_priors.size(); ++m) gp[schema[m].name] = group_priors[m];
    j["group_priors"] = gp;
  }
  if (label_prior_per_group) {
    j["label_prior_per_group"] = {{"attribute", schema[label_prior_per_group->attribute].name},
                                  {"positive_rate", label_prior_per_group->positive_rate}};
  }
  return j;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j, const AttributeSchema& schema) {
  SyntheticSpec s;
  try {
    s.n_samples = j.value("n_samples", s.n_samples);
    s.d_in = j.value("d_in", s.d_in);
    s.class_separation = j.value("class_separation", s.class_separation);
    s.bias_strength = j.value("bias_strength", s.bias_strength);
    s.label_prior = j.value("label_prior", s.label_prior);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.notes_k = j.value("notes_k", s.notes_k);
    s.seed = j.value("seed", s.seed);
    if (j.contains("group_priors")) {
      const auto& gp = j["group_priors"];
      s.group_priors.resize(schema.size());
      for (std::size_t m = 0; m < schema.size(); ++m) {
        s.group_priors[m] = gp.contains(schema[m].name)
                                ? gp[schema[m].name].get<std::vector<double>>()
                                : uniform_prior(schema.group_count(m));
      }
    }
    if (j.contains("label_prior_per_group")) {
      const auto& lp = j["label_prior_per_group"];
      const auto name = lp.at("attribute").get<std::string>();
      const auto m = schema.attribute_index(name);
      if (!m) throw SchemaError("label_prior_per_group: unknown attribute '" + name + "'");
      s.label_prior_per_group = LabelPriorPerGroup{*m, lp.at("positive_rate").get<std::vector<double>>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate(schema);
  return s;
}

Matrix generator_directions(const SyntheticSpec& spec, const AttributeSchema& schema) {
  const std::size_t n = spec.required_directions(schema);
  if (spec.d_in < n) {
    throw DimensionError("d_in too small for " + std::to_string(n) + " orthogonal directions");
  }
  Rng rng(mix_seed(spec.seed, kDirectionStream));
  Matrix dirs(n, spec.d_in);
  for (std::size_t r = 0; r < n; ++r) {
    // Redraw if the Gaussian sample is (numerically) in the span of earlier rows.
    for (;;) {
      auto row = dirs.row(r);
      for (double& v : row) v = rng.normal();
      for (std::size_t q = 0; q < r; ++q) {
        const auto prev = dirs.row(q);
        const double dot = std::inner_product(row.begin(), row.end(), prev.begin(), 0.0);
        for (std::size_t d = 0; d < spec.d_in; ++d) row[d] -= dot * prev[d];
      }
      const double norm = std::sqrt(std::inner_product(row.begin(), row.end(), row.begin(), 0.0));
      if (norm > 1e-8) {
        for (double& v : row) v /= norm;
        break;
      }
    }
  }
  return dirs;
}

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec, const AttributeSchema& schema,
                                       const TemplateBank& bank) {
  spec.validate(schema);
  const Matrix dirs = generator_directions(spec, schema);
  std::vector<std::size_t> offsets(schema.size());
  std::size_t next = 1;
  for (std::size_t m = 0; m < schema.size(); ++m) {
    offsets[m] = next;
    next += schema.group_count(m);
  }

  Rng rng(mix_seed(spec.seed, kSampleStream));
  const std::uint64_t note_seed = mix_seed(spec.seed, kNoteStream);
  std::vector<Sample> samples;
  samples.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    Sample s;
    s.id = static_cast<std::int64_t>(i);
    s.attributes.resize(schema.size());
    for (std::size_t m = 0; m < schema.size(); ++m) {
      s.attributes[m] = spec.group_priors.empty()
                            ? static_cast<std::size_t>(rng.index(schema.group_count(m)))
                            : rng.categorical(spec.group_priors[m]);
    }
    double p_pos = spec.label_prior;
    if (spec.label_prior_per_group) {
      const auto& lp = *spec.label_prior_per_group;
      p_pos = lp.positive_rate[s.attributes[lp.attribute]];
    }
    s.label = rng.uniform() < p_pos ? 1 : 0;

    s.image_features.assign(spec.d_in, 0.0);
    const double mu = (s.label == 1 ? 0.5 : -0.5) * spec.class_separation;
    for (std::size_t d = 0; d < spec.d_in; ++d) {
      double v = mu * dirs(0, d);
      for (std::size_t m = 0; m < schema.size(); ++m) {
        v += spec.bias_strength * dirs(offsets[m] + s.attributes[m], d);
      }
      s.image_features[d] = v;
    }
    for (std::size_t d = 0; d < spec.d_in; ++d) s.image_features[d] += spec.noise_std * rng.normal();

    s.notes = synthesize_notes(s.label, s.attributes, schema, spec.notes_k,
                               mix_seed(note_seed, static_cast<std::uint64_t>(i)), bank);
    samples.push_back(std::move(s));
  }
  return samples;
}

nlohmann::json sample_to_json(const Sample& s, const AttributeSchema& schema) {
  nlohmann::json attrs = nlohmann::json::object();
  for (std::size_t m = 0; m < schema.size(); ++m) attrs[schema[m].name] = schema[m].values[s.attributes[m]];
  return {{"id", s.id},
          {"image_features", s.image_features},
          {"label", s.label},
          {"attributes", attrs},
          {"notes", {{"neutral", s.notes.neutral}, {"randomized", s.notes.randomized}}}};
}

Sample sample_from_json(const nlohmann::json& j, const AttributeSchema& schema) {
  Sample s;
  try {
    s.id = j.at("id").get<std::int64_t>();
    s.image_features = j.at("image_features").get<std::vector<double>>();
    s.label = j.at("label").get<int>();
    const auto& notes = j.at("notes");
    s.notes.neutral = notes.at("neutral").get<std::string>();
    s.notes.randomized = notes.at("randomized").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("field error: ") + e.what());
  }
  if (s.label != 0 && s.label != 1) throw SchemaError("field 'label': must be 0 or 1");
  for (double v : s.image_features) {
    if (!std::isfinite(v)) throw SchemaError("field 'image_features': non-finite value");
  }
  if (s.notes.randomized.empty()) throw SchemaError("field 'notes.randomized': needs at least one variant");
  if (!j.contains("attributes") || !j["attributes"].is_object()) {
    throw SchemaError("field 'attributes': missing object");
  }
  const auto& attrs = j["attributes"];
  s.attributes.resize(schema.size());
  for (std::size_t m = 0; m < schema.size(); ++m) {
    const auto& name = schema[m].name;
    if (!attrs.contains(name) || !attrs[name].is_string()) {
      throw SchemaError("field 'attributes." + name + "': missing");
    }
    const auto group = attrs[name].get<std::string>();
    const auto idx = schema.group_index(m, group);
    if (!idx) throw SchemaError("field 'attributes." + name + "': unknown group '" + group + "'");
    s.attributes[m] = *idx;
  }
  for (const auto& [key, _] : attrs.items()) {
    if (!schema.attribute_index(key)) throw SchemaError("field 'attributes." + key + "': not in schema");
  }
  return s;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples,
                  const AttributeSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  for (const auto& s : samples) out << sample_to_json(s, schema).dump() << "\n";
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, const AttributeSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record is not a JSON object", line_no);
    try {
      samples.push_back(sample_from_json(j, schema));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

std::vector<Batch> make_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                std::uint64_t seed, bool drop_last) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (drop_last && end - start < batch_size) break;
    batches.push_back(Batch{{order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end)}});
  }
  return batches;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_samples(const std::vector<Sample>& samples,
                                                                  double fraction,
                                                                  std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("split fraction outside [0, 1]");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_second = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
  std::vector<std::size_t> second(order.begin(), order.begin() + static_cast<long>(n_second));
  std::vector<std::size_t> first(order.begin() + static_cast<long>(n_second), order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (auto i : first) out.first.push_back(samples[i]);
  for (auto i : second) out.second.push_back(samples[i]);
  return out;
}

Matrix feature_matrix(const std::vector<Sample>& samples) {
  if (samples.empty()) return {};
  const std::size_t d = samples.front().image_features.size();
  Matrix x(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].image_features.size() != d) throw DimensionError("ragged image_features");
    std::copy(samples[i].image_features.begin(), samples[i].image_features.end(), x.row(i).begin());
  }
  return x;
}

}  // namespace fairenc
