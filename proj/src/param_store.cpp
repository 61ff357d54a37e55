#include "fairenc/param_store.hpp"

#include <cmath>

#include "fairenc/errors.hpp"

namespace fairenc {

void ParamStore::add(const std::string& name, Matrix value) {
  if (name.empty()) throw ConfigError("parameter group needs a name");
  if (index_.count(name)) throw ConfigError("duplicate parameter group '" + name + "'");
  if (!value.all_finite()) throw NumericalError("non-finite initial value in '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  values_.push_back(std::move(value));
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamStore::index_of(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter group '" + std::string(name) + "'");
  return it->second;
}

const Matrix& ParamStore::at(std::string_view name) const { return values_[index_of(name)]; }

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void ParamStore::set(std::string_view name, Matrix value) {
  auto& slot = values_[index_of(name)];
  if (!slot.same_shape(value)) {
    throw DimensionError("shape change rejected for '" + std::string(name) + "'");
  }
  if (!value.all_finite()) throw NumericalError("non-finite update rejected for '" + std::string(name) + "'");
  slot = std::move(value);
}

void ParamStore::set_coordinate(std::string_view name, std::size_t index, double value) {
  auto& slot = values_[index_of(name)];
  if (index >= slot.size()) throw DimensionError("coordinate out of range in '" + std::string(name) + "'");
  if (!std::isfinite(value)) throw NumericalError("non-finite update rejected for '" + std::string(name) + "'");
  slot[index] = value;
}

void ParamStore::accumulate(std::string_view name, const Matrix& delta) {
  auto& slot = values_[index_of(name)];
  if (!slot.same_shape(delta)) throw DimensionError("gradient shape mismatch for '" + std::string(name) + "'");
  Matrix next = slot;
  next += delta;
  if (!next.all_finite()) throw NumericalError("non-finite accumulation in '" + std::string(name) + "'");
  slot = std::move(next);
}

ParamStore ParamStore::zeros_like() const {
  ParamStore z;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    z.add(names_[i], Matrix(values_[i].rows(), values_[i].cols()));
  }
  return z;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!values_[i].same_shape(other.values_[i])) return false;
  }
  return true;
}

std::vector<std::string> ParamStore::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& n : names_) {
    if (n == prefix || (n.size() > prefix.size() && n.compare(0, prefix.size(), prefix) == 0 &&
                        n[prefix.size()] == '.')) {
      out.push_back(n);
    }
  }
  return out;
}

}  // namespace fairenc
