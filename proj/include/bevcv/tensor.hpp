#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace bevcv {

using Dims = std::vector<std::size_t>;

std::string dims_to_string(const Dims& dims);

// Dense float32 tensor, row-major, rank 1..4. Feature maps are (C, H, W).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, float fill = 0.0f);
  Tensor(Dims dims, std::vector<float> values);

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }
  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }

  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }

  // (c, h, w) access for rank-3 feature maps.
  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return values_[(c * dims_[1] + h) * dims_[2] + w];
  }
  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return values_[(c * dims_[1] + h) * dims_[2] + w];
  }

  bool operator==(const Tensor&) const = default;

 private:
  Dims dims_;
  std::vector<float> values_;
};

// Multi-resolution image-plane features, ordered coarse to fine.
struct FeaturePyramid {
  std::vector<Tensor> levels;
};

std::size_t element_count(const Dims& dims);

// Throws ShapeMismatch naming `what` unless t has exactly `expected` dims.
void expect_dims(const Tensor& t, const Dims& expected, const std::string& what);
void expect_rank(const Tensor& t, std::size_t rank, const std::string& what);

}  // namespace bevcv
