#pragma once

#include <span>
#include <vector>

#include "bevcv/tensor.hpp"

namespace bevcv {

// Stateless layer primitives over (C, H, W) feature maps. All reductions
// accumulate in double and round once on store.

// Cross-correlation with zero padding. kernel is (C_out, C_in, k_h, k_w);
// bias is empty or C_out long.
// Output extent: floor((in + 2*pad - k) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& kernel, std::span<const float> bias,
              int stride, int pad);

// Transposed convolution (the adjoint of conv2d with pad 0) with kernel laid
// out (C_in, C_out, k_h, k_w). Output extent: (in - 1) * stride + k.
Tensor transposed_conv2d(const Tensor& x, const Tensor& kernel, int stride);

Tensor maxpool2d(const Tensor& x, int k, int stride);
Tensor upsample2x_nearest(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope = 0.01f);

// Inference-mode batch norm over channel 0 using running statistics.
Tensor batchnorm_apply(const Tensor& x, std::span<const float> scale,
                       std::span<const float> shift, std::span<const float> mean,
                       std::span<const float> var, float eps = 1e-5f);

// Channel concatenation; spatial extents must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Keeps the top-left h x w window.
Tensor crop_spatial(const Tensor& x, std::size_t h, std::size_t w);

// Per-channel maximum over all spatial positions.
std::vector<float> global_max_pool(const Tensor& x);

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace bevcv
