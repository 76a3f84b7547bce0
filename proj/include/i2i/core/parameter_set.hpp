#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "i2i/core/tensor.hpp"

namespace i2i {

struct Parameter {
  Tensor value;
  bool trainable = true;

  bool operator==(const Parameter& other) const = default;
};

/// Named model parameters, ordered by name so iteration and serialization are
/// deterministic.
class ParameterSet {
 public:
  using Map = std::map<std::string, Parameter, std::less<>>;

  /// Throws StructuralError when the name already exists.
  void add(std::string name, Tensor value, bool trainable);
  /// Replaces the value of an existing entry; shape must match.
  void assign(std::string_view name, Tensor value);

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }
  const Parameter& at(std::string_view name) const;
  Parameter& at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t scalar_count() const;

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }

  /// Entries whose names start with prefix.
  ParameterSet subset(std::string_view prefix) const;
  /// Adds every entry of other; throws on a name collision.
  void merge(const ParameterSet& other);
  /// Sets the trainable flag on every entry whose name starts with prefix.
  void set_trainable(std::string_view prefix, bool trainable);

  bool operator==(const ParameterSet& other) const = default;

 private:
  Map entries_;
};

/// True when both sets have the same names, flags, shapes and bit-identical values.
bool bitwise_equal(const ParameterSet& a, const ParameterSet& b);

}  // namespace i2i
