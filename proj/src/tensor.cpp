#include "bevcv/tensor.hpp"

#include "bevcv/error.hpp"

namespace bevcv {

std::string dims_to_string(const Dims& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

std::size_t element_count(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {
void check_dims(const Dims& dims) {
  if (dims.empty() || dims.size() > 4) {
    throw ShapeMismatch("tensor rank must be 1..4, got " +
                        std::to_string(dims.size()));
  }
  for (auto d : dims) {
    if (d == 0) throw ShapeMismatch("zero extent in " + dims_to_string(dims));
  }
}
}  // namespace

Tensor::Tensor(Dims dims, float fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  values_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Dims dims, std::vector<float> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  check_dims(dims_);
  if (values_.size() != element_count(dims_)) {
    throw ShapeMismatch("tensor data length " + std::to_string(values_.size()) +
                        " does not match dims " + dims_to_string(dims_));
  }
}

void expect_dims(const Tensor& t, const Dims& expected,
                 const std::string& what) {
  if (t.dims() != expected) {
    throw ShapeMismatch(what + ": expected " + dims_to_string(expected) +
                        ", got " + dims_to_string(t.dims()));
  }
}

void expect_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    throw ShapeMismatch(what + ": expected rank " + std::to_string(rank) +
                        ", got " + dims_to_string(t.dims()));
  }
}

}  // namespace bevcv
