#include "bevcv/weights.hpp"

#include "bevcv/error.hpp"

namespace bevcv {

LayerWeights::LayerWeights(std::vector<NamedTensor> entries) {
  for (auto& e : entries) insert(std::move(e.name), std::move(e.tensor));
}

void LayerWeights::insert(std::string name, Tensor tensor) {
  if (index_.contains(name)) throw DuplicateTensorName("'" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor)});
}

void LayerWeights::set(const std::string& name, Tensor tensor) {
  if (auto it = index_.find(name); it != index_.end()) {
    entries_[it->second].tensor = std::move(tensor);
  } else {
    insert(name, std::move(tensor));
  }
}

bool LayerWeights::contains(const std::string& name) const {
  return index_.contains(name);
}

const Tensor& LayerWeights::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ShapeMismatch("missing weight tensor '" + name + "'");
  }
  return entries_[it->second].tensor;
}

const Tensor& LayerWeights::get(const std::string& name,
                                const Dims& expected) const {
  const Tensor& t = get(name);
  expect_dims(t, expected, "weight '" + name + "'");
  return t;
}

void LayerWeights::merge(const LayerWeights& other) {
  for (const auto& e : other.entries()) insert(e.name, e.tensor);
}

}  // namespace bevcv
