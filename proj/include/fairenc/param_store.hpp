#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fairenc/matrix.hpp"

namespace fairenc {

// Named parameter groups with immutable shapes. Every mutation is checked:
// values that would become non-finite are rejected with NumericalError and
// the store is left unchanged.
class ParamStore {
 public:
  void add(const std::string& name, Matrix value);

  bool contains(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t group_count() const { return names_.size(); }
  std::size_t parameter_count() const;

  void set(std::string_view name, Matrix value);
  void set_coordinate(std::string_view name, std::size_t index, double value);
  // at(name) += delta
  void accumulate(std::string_view name, const Matrix& delta);

  // Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  bool same_layout(const ParamStore& other) const;

  // Names carrying the given prefix followed by '.' (or equal to it).
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;

  bool operator==(const ParamStore& other) const {
    return names_ == other.names_ && values_ == other.values_;
  }

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace fairenc
