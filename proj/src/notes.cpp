#include "fairenc/notes.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "fairenc/errors.hpp"

namespace fairenc {
namespace {

// Mirrors resources/note_templates.json.
constexpr const char* kBuiltinBank = R"json({
  "negative": [
    "The patient has not been diagnosed with glaucoma.",
    "No signs of glaucoma were found in either eye.",
    "The optic nerve appears healthy and glaucoma is not suspected.",
    "Visual field testing is normal and there is no evidence of glaucoma."
  ],
  "positive": [
    "The patient shows open angle glaucoma risk in both eyes.",
    "The patient has been diagnosed with primary open angle glaucoma.",
    "Glaucomatous optic neuropathy is present with visual field loss.",
    "Elevated intraocular pressure with confirmed glaucoma was recorded."
  ],
  "followups": [
    "A follow-up appointment is scheduled in one month.",
    "Continue monitoring intraocular pressure at the next visit.",
    "Routine examination is recommended in twelve months.",
    "The current plan is to review the treatment at the next visit."
  ],
  "attribute_clauses": {
    "race": "The patient is {value}.",
    "gender": "The patient is {value}.",
    "ethnicity": "The patient is {value}.",
    "language": "The patient's preferred language is {value}."
  },
  "default_clause": "The patient's {attribute} is {value}.",
  "age_clause": "The patient is {age} years old.",
  "age_min": 20,
  "age_max": 80,
  "class_prompts": [
    "The patient has not been diagnosed with glaucoma.",
    "The patient has been diagnosed with glaucoma."
  ]
})json";

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

// Split after the first sentence terminator; the remainder keeps no leading space.
std::pair<std::string, std::string> split_first_sentence(const std::string& note) {
  const auto end = note.find_first_of(".!?");
  if (end == std::string::npos) return {note, {}};
  std::string head = note.substr(0, end + 1);
  std::string tail = note.substr(end + 1);
  const auto start = tail.find_first_not_of(' ');
  tail = start == std::string::npos ? std::string{} : tail.substr(start);
  return {head, tail};
}

}  // namespace

const TemplateBank& TemplateBank::builtin() {
  static const TemplateBank bank = from_json(nlohmann::json::parse(kBuiltinBank));
  return bank;
}

TemplateBank TemplateBank::from_json(const nlohmann::json& j) {
  TemplateBank b;
  try {
    b.negative = j.at("negative").get<std::vector<std::string>>();
    b.positive = j.at("positive").get<std::vector<std::string>>();
    b.followups = j.value("followups", std::vector<std::string>{});
    b.attribute_clauses = j.value("attribute_clauses", std::map<std::string, std::string>{});
    b.default_clause = j.at("default_clause").get<std::string>();
    b.age_clause = j.at("age_clause").get<std::string>();
    b.age_min = j.value("age_min", 20);
    b.age_max = j.value("age_max", 80);
    b.class_prompts = j.at("class_prompts").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("template bank: ") + e.what());
  }
  if (b.age_min > b.age_max) throw ConfigError("template bank: age_min > age_max");
  return b;
}

TemplateBank TemplateBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open template bank " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("template bank " + path.string() + ": " + e.what());
  }
}

nlohmann::json TemplateBank::to_json() const {
  return {{"negative", negative},
          {"positive", positive},
          {"followups", followups},
          {"attribute_clauses", attribute_clauses},
          {"default_clause", default_clause},
          {"age_clause", age_clause},
          {"age_min", age_min},
          {"age_max", age_max},
          {"class_prompts", class_prompts}};
}

NoteVariants synthesize_notes(int label, const GroupIndices& attribute_values,
                              const AttributeSchema& schema, std::size_t K, std::uint64_t seed,
                              const TemplateBank& bank) {
  if (K < 1) throw ConfigError("synthesize_notes: K must be at least 1");
  if (label != 0 && label != 1) throw ConfigError("synthesize_notes: label must be 0 or 1");
  schema.validate(attribute_values);
  const auto& clauses = label == 1 ? bank.positive : bank.negative;
  if (clauses.empty()) {
    throw ConfigError("template bank has no disease clauses for label " + std::to_string(label));
  }

  Rng rng(seed);
  NoteVariants out;
  out.neutral = clauses[rng.index(clauses.size())];
  if (!bank.followups.empty()) {
    out.neutral += " " + bank.followups[rng.index(bank.followups.size())];
  }
  const auto [head, tail] = split_first_sentence(out.neutral);

  // Slots 0..M-1 are schema attributes, slot M is age.
  const std::size_t slot_count = schema.size() + 1;
  std::set<std::string> seen;
  const std::size_t max_attempts = 200 * K;
  for (std::size_t attempt = 0; out.randomized.size() < K; ++attempt) {
    if (attempt >= max_attempts) {
      throw ConfigError("cannot produce " + std::to_string(K) + " distinct randomized notes");
    }
    const std::size_t n_clauses = std::min<std::size_t>(1 + rng.index(2), slot_count);
    std::vector<std::size_t> slots(slot_count);
    for (std::size_t s = 0; s < slot_count; ++s) slots[s] = s;
    rng.shuffle(slots);

    std::string inserted;
    for (std::size_t c = 0; c < n_clauses; ++c) {
      const std::size_t slot = slots[c];
      std::string clause;
      if (slot == schema.size()) {
        const auto span = static_cast<std::uint64_t>(bank.age_max - bank.age_min + 1);
        const int age = bank.age_min + static_cast<int>(rng.index(span));
        clause = replace_all(bank.age_clause, "{age}", std::to_string(age));
      } else {
        const auto& attr = schema[slot];
        const auto& value = attr.values[rng.index(attr.values.size())];
        const auto it = bank.attribute_clauses.find(attr.name);
        clause = it != bank.attribute_clauses.end() ? it->second : bank.default_clause;
        clause = replace_all(replace_all(clause, "{attribute}", attr.name), "{value}", value);
      }
      inserted += (inserted.empty() ? "" : " ") + clause;
    }
    std::string note = head + " " + inserted;
    if (!tail.empty()) note += " " + tail;
    if (seen.insert(note).second) out.randomized.push_back(std::move(note));
  }
  return out;
}

TextPair sample_text_pair(const NoteVariants& variants, const SelectionConfig& cfg, Rng& rng) {
  if (cfg.p_txt1 < 0.0 || cfg.p_txt1 > 1.0) {
    throw ConfigError("p_txt1 must lie in [0, 1]");
  }
  const std::size_t K = variants.K();
  if (K < 1) throw ConfigError("sample_text_pair: no randomized variants");
  TextPair pair;
  const double u = rng.uniform();
  pair.first = u < cfg.p_txt1 ? 0 : 1 + static_cast<std::size_t>(rng.index(K));
  // K candidates remain once txt1 is removed from the K + 1 notes.
  std::size_t pick = static_cast<std::size_t>(rng.index(K));
  if (pick >= pair.first) ++pick;
  pair.second = pick;
  return pair;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> embed_tokens(std::string_view note, std::size_t vocab_dim) {
  if (vocab_dim < 16) throw ConfigError("embed_tokens: vocab_dim must be at least 16");
  std::vector<double> counts(vocab_dim, 0.0);
  for (const auto& tok : tokenize(note)) counts[fnv1a64(tok) % vocab_dim] += 1.0;
  return counts;
}

DemographicLexicon::DemographicLexicon(const AttributeSchema& schema) {
  for (const auto& attr : schema.attributes()) {
    for (const auto& g : attr.values) phrases_.push_back(tokenize(g));
  }
  phrases_.push_back({"years", "old"});
}

std::size_t DemographicLexicon::count_hits(std::string_view text) const {
  const auto tokens = tokenize(text);
  std::size_t hits = 0;
  for (const auto& phrase : phrases_) {
    if (phrase.empty() || phrase.size() > tokens.size()) continue;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
      if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<long>(i))) ++hits;
    }
  }
  return hits;
}

}  // namespace fairenc
