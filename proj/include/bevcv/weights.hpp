#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "bevcv/tensor.hpp"

namespace bevcv {

struct NamedTensor {
  std::string name;
  Tensor tensor;

  bool operator==(const NamedTensor&) const = default;
};

// Insertion-ordered set of uniquely named tensors. Shapes are validated by
// whichever graph binds them, not here.
class LayerWeights {
 public:
  LayerWeights() = default;
  explicit LayerWeights(std::vector<NamedTensor> entries);

  // Throws DuplicateTensorName if `name` is already present.
  void insert(std::string name, Tensor tensor);
  // Inserts or overwrites.
  void set(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  // Like get() but throws ShapeMismatch unless the dims match.
  const Tensor& get(const std::string& name, const Dims& expected) const;

  std::span<const NamedTensor> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Adds every entry of `other`; duplicates are an error.
  void merge(const LayerWeights& other);

  bool operator==(const LayerWeights& o) const { return entries_ == o.entries_; }

 private:
  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace bevcv
