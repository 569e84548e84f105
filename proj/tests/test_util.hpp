#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "bevcv/random.hpp"
#include "bevcv/tensor.hpp"

namespace bevcv::test {

inline Tensor random_tensor(Dims dims, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(dims));
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bevcv_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace bevcv::test
