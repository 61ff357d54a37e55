#include "fairenc/schema.hpp"

#include <fstream>
#include <set>

#include "fairenc/errors.hpp"

namespace fairenc {

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes)
    : attributes_(std::move(attributes)) {
  std::set<std::string> names;
  for (const auto& a : attributes_) {
    if (a.name.empty()) throw SchemaError("attribute with empty name");
    if (!names.insert(a.name).second) throw SchemaError("duplicate attribute name '" + a.name + "'");
    if (a.values.size() < 2) {
      throw SchemaError("attribute '" + a.name + "' needs at least 2 groups");
    }
    std::set<std::string> groups;
    for (const auto& g : a.values) {
      if (g.empty()) throw SchemaError("attribute '" + a.name + "' has an empty group name");
      if (!groups.insert(g).second) {
        throw SchemaError("attribute '" + a.name + "' repeats group '" + g + "'");
      }
    }
  }
}

std::optional<std::size_t> AttributeSchema::attribute_index(std::string_view name) const {
  for (std::size_t m = 0; m < attributes_.size(); ++m) {
    if (attributes_[m].name == name) return m;
  }
  return std::nullopt;
}

std::optional<std::size_t> AttributeSchema::group_index(std::size_t m, std::string_view group) const {
  const auto& values = attributes_.at(m).values;
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (values[a] == group) return a;
  }
  return std::nullopt;
}

void AttributeSchema::validate(const GroupIndices& groups) const {
  if (groups.size() != attributes_.size()) {
    throw SchemaError("expected " + std::to_string(attributes_.size()) + " attribute values, got " +
                      std::to_string(groups.size()));
  }
  for (std::size_t m = 0; m < groups.size(); ++m) {
    if (groups[m] >= attributes_[m].values.size()) {
      throw SchemaError("group index " + std::to_string(groups[m]) + " out of range for '" +
                        attributes_[m].name + "'");
    }
  }
}

nlohmann::json AttributeSchema::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : attributes_) arr.push_back({{"name", a.name}, {"values", a.values}});
  return {{"attributes", arr}};
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("attributes") || !j["attributes"].is_array()) {
    throw SchemaError("schema must be an object with an 'attributes' array");
  }
  std::vector<Attribute> attrs;
  for (const auto& a : j["attributes"]) {
    if (!a.contains("name") || !a.contains("values")) {
      throw SchemaError("schema attribute needs 'name' and 'values'");
    }
    attrs.push_back({a["name"].get<std::string>(), a["values"].get<std::vector<std::string>>()});
  }
  return AttributeSchema(std::move(attrs));
}

AttributeSchema AttributeSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void AttributeSchema::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write schema file " + path.string());
  out << to_json().dump(2) << "\n";
}

AttributeSchema AttributeSchema::four_attribute_default() {
  return AttributeSchema({{"race", {"asian", "black", "white"}},
                          {"gender", {"female", "male"}},
                          {"ethnicity", {"non-hispanic", "hispanic"}},
                          {"language", {"english", "spanish", "others"}}});
}

AttributeSchema AttributeSchema::two_attribute_default() {
  return AttributeSchema({{"race", {"asian", "black", "white"}}, {"gender", {"female", "male"}}});
}

}  // namespace fairenc
