#include "i2i/core/parameter_set.hpp"

#include "i2i/core/errors.hpp"

namespace i2i {

void ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw StructuralError("duplicate parameter name '" + name + "'");
  entries_.emplace(std::move(name), Parameter{std::move(value), trainable});
}

void ParameterSet::assign(std::string_view name, Tensor value) {
  auto& p = at(name);
  if (p.value.shape() != value.shape()) {
    throw ShapeError("parameter '" + std::string(name) + "' expects shape " + shape_to_string(p.value.shape()) +
                     ", got " + shape_to_string(value.shape()));
  }
  p.value = std::move(value);
}

const Parameter& ParameterSet::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw StructuralError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw StructuralError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : entries_) n += p.value.size();
  return n;
}

ParameterSet ParameterSet::subset(std::string_view prefix) const {
  ParameterSet out;
  for (const auto& [name, p] : entries_) {
    if (name.starts_with(prefix)) out.entries_.emplace(name, p);
  }
  return out;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [name, p] : other.entries_) add(name, p.value, p.trainable);
}

void ParameterSet::set_trainable(std::string_view prefix, bool trainable) {
  for (auto& [name, p] : entries_) {
    if (name.starts_with(prefix)) p.trainable = trainable;
  }
}

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.trainable != ib->second.trainable) return false;
    if (!bitwise_equal(ia->second.value, ib->second.value)) return false;
  }
  return true;
}

}  // namespace i2i
