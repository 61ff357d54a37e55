#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fairenc/random.hpp"
#include "fairenc/schema.hpp"
#include "json.hpp"

namespace fairenc {

// A demographic-free note plus K variants with randomized demographic clauses.
struct NoteVariants {
  std::string neutral;
  std::vector<std::string> randomized;

  std::size_t K() const { return randomized.size(); }
  // Index 0 is the neutral note, 1..K the randomized variants.
  const std::string& variant(std::size_t index) const {
    return index == 0 ? neutral : randomized.at(index - 1);
  }

  bool operator==(const NoteVariants&) const = default;
};

// Clinical sentence templates and demographic clause patterns.
//
// Clause patterns may reference {value} (group name), {attribute} (attribute
// name) and, for the age clause, {age}.
struct TemplateBank {
  std::vector<std::string> negative;   // disease clauses for label 0
  std::vector<std::string> positive;   // disease clauses for label 1
  std::vector<std::string> followups;  // demographic-free trailing sentences
  std::map<std::string, std::string> attribute_clauses;
  std::string default_clause;
  std::string age_clause;
  int age_min = 20;
  int age_max = 80;
  // Zero-shot class prompts, indexed by label.
  std::vector<std::string> class_prompts;

  static const TemplateBank& builtin();
  static TemplateBank from_json(const nlohmann::json& j);
  static TemplateBank load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  bool operator==(const TemplateBank&) const = default;
};

struct SelectionConfig {
  double p_txt1 = 0.5;
  std::uint64_t seed = 0;
};

// Indices into NoteVariants::variant(); first != second always.
struct TextPair {
  std::size_t first = 0;
  std::size_t second = 0;
};

// Deterministic in (label, K, seed, schema, bank). The true attribute values
// are only validated: randomized variants carry uniformly drawn demographics.
NoteVariants synthesize_notes(int label, const GroupIndices& attribute_values,
                              const AttributeSchema& schema, std::size_t K, std::uint64_t seed,
                              const TemplateBank& bank = TemplateBank::builtin());

// txt1 is the neutral note with probability p_txt1, otherwise one of the K
// variants uniformly; txt2 is uniform over the K remaining notes.
TextPair sample_text_pair(const NoteVariants& variants, const SelectionConfig& cfg, Rng& rng);

// Lowercase, split on anything that is not a letter or digit.
std::vector<std::string> tokenize(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

// Bag-of-words count vector over FNV-1a token hashes modulo vocab_dim.
std::vector<double> embed_tokens(std::string_view note, std::size_t vocab_dim);

// Token-sequence lexicon of demographic cues: every schema group name plus
// the "<n> years old" age phrase.
class DemographicLexicon {
 public:
  explicit DemographicLexicon(const AttributeSchema& schema);
  std::size_t count_hits(std::string_view text) const;

 private:
  std::vector<std::vector<std::string>> phrases_;
};

}  // namespace fairenc
