#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fairenc {

// One group index per schema attribute, in schema order.
using GroupIndices = std::vector<std::size_t>;

struct Attribute {
  std::string name;
  std::vector<std::string> values;

  bool operator==(const Attribute&) const = default;
};

// Ordered list of sensitive attributes and their group names.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<Attribute> attributes);

  std::size_t size() const { return attributes_.size(); }
  bool empty() const { return attributes_.empty(); }
  const Attribute& operator[](std::size_t m) const { return attributes_[m]; }
  const std::vector<Attribute>& attributes() const { return attributes_; }
  std::size_t group_count(std::size_t m) const { return attributes_[m].values.size(); }

  std::optional<std::size_t> attribute_index(std::string_view name) const;
  std::optional<std::size_t> group_index(std::size_t m, std::string_view group) const;

  // Throws SchemaError if the indices do not fit this schema.
  void validate(const GroupIndices& groups) const;

  nlohmann::json to_json() const;
  static AttributeSchema from_json(const nlohmann::json& j);
  static AttributeSchema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // race / gender / ethnicity / language as in the FairVLMed cohort.
  static AttributeSchema four_attribute_default();
  // race / gender, used by the synthetic demonstration.
  static AttributeSchema two_attribute_default();

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attributes_;
};

}  // namespace fairenc
