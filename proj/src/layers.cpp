#include "bevcv/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bevcv/error.hpp"

namespace bevcv {

namespace {

void expect_feature_map(const Tensor& x, const char* op) {
  expect_rank(x, 3, op);
}

// Range of output positions o for which o*stride - pad + tap lies in [0, in).
std::pair<int, int> valid_outputs(int in, int out, int stride, int pad,
                                  int tap) {
  const int off = tap - pad;
  int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int hi = (in - 1 - off) >= 0 ? (in - 1 - off) / stride + 1 : 0;
  return {std::min(lo, out), std::clamp(hi, 0, out)};
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, std::span<const float> bias,
              int stride, int pad) {
  expect_feature_map(x, "conv2d input");
  expect_rank(kernel, 4, "conv2d kernel");
  const int C = static_cast<int>(x.dim(0));
  const int H = static_cast<int>(x.dim(1));
  const int W = static_cast<int>(x.dim(2));
  const int O = static_cast<int>(kernel.dim(0));
  const int kh = static_cast<int>(kernel.dim(2));
  const int kw = static_cast<int>(kernel.dim(3));
  if (static_cast<int>(kernel.dim(1)) != C) {
    throw ShapeMismatch("conv2d: kernel expects " +
                        std::to_string(kernel.dim(1)) + " input channels, got " +
                        std::to_string(C));
  }
  if (!bias.empty() && static_cast<int>(bias.size()) != O) {
    throw ShapeMismatch("conv2d: bias length does not match output channels");
  }
  if (stride < 1 || pad < 0) throw ShapeMismatch("conv2d: bad stride/pad");
  const int Ho = conv_out_extent(H, kh, stride, pad);
  const int Wo = conv_out_extent(W, kw, stride, pad);
  if (H + 2 * pad < kh || W + 2 * pad < kw || Ho < 1 || Wo < 1) {
    throw ShapeMismatch("conv2d: kernel larger than padded input");
  }

  Tensor out({static_cast<std::size_t>(O), static_cast<std::size_t>(Ho),
              static_cast<std::size_t>(Wo)});
  std::vector<double> acc(static_cast<std::size_t>(Ho) * Wo);
  const float* xd = x.data();
  const float* kd = kernel.data();
  for (int o = 0; o < O; ++o) {
    std::fill(acc.begin(), acc.end(), bias.empty() ? 0.0 : bias[o]);
    for (int c = 0; c < C; ++c) {
      const float* plane = xd + static_cast<std::size_t>(c) * H * W;
      for (int i = 0; i < kh; ++i) {
        const auto [oh_lo, oh_hi] = valid_outputs(H, Ho, stride, pad, i);
        for (int j = 0; j < kw; ++j) {
          const double wv =
              kd[((static_cast<std::size_t>(o) * C + c) * kh + i) * kw + j];
          if (wv == 0.0) continue;
          const auto [ow_lo, ow_hi] = valid_outputs(W, Wo, stride, pad, j);
          for (int oh = oh_lo; oh < oh_hi; ++oh) {
            const float* row = plane + static_cast<std::size_t>(
                                           oh * stride - pad + i) * W;
            double* arow = acc.data() + static_cast<std::size_t>(oh) * Wo;
            for (int ow = ow_lo; ow < ow_hi; ++ow) {
              arow[ow] += wv * row[ow * stride - pad + j];
            }
          }
        }
      }
    }
    float* od = out.data() + static_cast<std::size_t>(o) * Ho * Wo;
    for (std::size_t p = 0; p < acc.size(); ++p) od[p] = static_cast<float>(acc[p]);
  }
  return out;
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& kernel, int stride) {
  expect_feature_map(x, "transposed_conv2d input");
  expect_rank(kernel, 4, "transposed_conv2d kernel");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (kernel.dim(0) != C) {
    throw ShapeMismatch("transposed_conv2d: kernel expects " +
                        std::to_string(kernel.dim(0)) +
                        " input channels, got " + std::to_string(C));
  }
  if (stride < 1) throw ShapeMismatch("transposed_conv2d: bad stride");
  const std::size_t O = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t Ho = (H - 1) * s + kh, Wo = (W - 1) * s + kw;

  std::vector<double> acc(O * Ho * Wo, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        const double v = x.at(c, h, w);
        if (v == 0.0) continue;
        for (std::size_t o = 0; o < O; ++o) {
          const float* k = kernel.data() + ((c * O + o) * kh) * kw;
          for (std::size_t i = 0; i < kh; ++i) {
            double* arow = acc.data() + (o * Ho + h * s + i) * Wo + w * s;
            for (std::size_t j = 0; j < kw; ++j) arow[j] += v * k[i * kw + j];
          }
        }
      }
    }
  }
  std::vector<float> vals(acc.size());
  std::transform(acc.begin(), acc.end(), vals.begin(),
                 [](double v) { return static_cast<float>(v); });
  return Tensor({O, Ho, Wo}, std::move(vals));
}

Tensor maxpool2d(const Tensor& x, int k, int stride) {
  expect_feature_map(x, "maxpool2d input");
  if (k < 1 || stride < 1) throw ShapeMismatch("maxpool2d: bad window");
  const int C = static_cast<int>(x.dim(0));
  const int H = static_cast<int>(x.dim(1));
  const int W = static_cast<int>(x.dim(2));
  if (H < k || W < k) throw ShapeMismatch("maxpool2d: window exceeds input");
  const int Ho = (H - k) / stride + 1, Wo = (W - k) / stride + 1;
  Tensor out({static_cast<std::size_t>(C), static_cast<std::size_t>(Ho),
              static_cast<std::size_t>(Wo)});
  for (int c = 0; c < C; ++c) {
    for (int oh = 0; oh < Ho; ++oh) {
      for (int ow = 0; ow < Wo; ++ow) {
        float m = -std::numeric_limits<float>::infinity();
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            m = std::max(m, x.at(c, oh * stride + i, ow * stride + j));
          }
        }
        out.at(c, oh, ow) = m;
      }
    }
  }
  return out;
}

Tensor upsample2x_nearest(const Tensor& x) {
  expect_feature_map(x, "upsample2x_nearest input");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor out({C, 2 * H, 2 * W});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t h = 0; h < 2 * H; ++h) {
      for (std::size_t w = 0; w < 2 * W; ++w) {
        out.at(c, h, w) = x.at(c, h / 2, w / 2);
      }
    }
  }
  return out;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  Tensor out = x;
  for (float& v : out.values()) {
    if (v < 0.0f) v *= slope;
  }
  return out;
}

Tensor batchnorm_apply(const Tensor& x, std::span<const float> scale,
                       std::span<const float> shift, std::span<const float> mean,
                       std::span<const float> var, float eps) {
  expect_feature_map(x, "batchnorm input");
  const std::size_t C = x.dim(0);
  if (scale.size() != C || shift.size() != C || mean.size() != C ||
      var.size() != C) {
    throw ShapeMismatch("batchnorm: parameter length does not match " +
                        std::to_string(C) + " channels");
  }
  Tensor out = x;
  const std::size_t plane = x.dim(1) * x.dim(2);
  for (std::size_t c = 0; c < C; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(var[c]) + eps);
    const double a = scale[c] * inv;
    const double b = shift[c] - a * mean[c];
    float* p = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] = static_cast<float>(a * p[i] + b);
    }
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  expect_feature_map(a, "concat lhs");
  expect_feature_map(b, "concat rhs");
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ShapeMismatch("concat: spatial extents differ, " +
                        dims_to_string(a.dims()) + " vs " +
                        dims_to_string(b.dims()));
  }
  std::vector<float> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(v));
}

Tensor crop_spatial(const Tensor& x, std::size_t h, std::size_t w) {
  expect_feature_map(x, "crop input");
  if (h == 0 || w == 0 || h > x.dim(1) || w > x.dim(2)) {
    throw ShapeMismatch("crop window exceeds " + dims_to_string(x.dims()));
  }
  if (h == x.dim(1) && w == x.dim(2)) return x;
  Tensor out({x.dim(0), h, w});
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) out.at(c, i, j) = x.at(c, i, j);
    }
  }
  return out;
}

std::vector<float> global_max_pool(const Tensor& x) {
  expect_feature_map(x, "global_max_pool input");
  const std::size_t plane = x.dim(1) * x.dim(2);
  std::vector<float> out(x.dim(0));
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    const float* p = x.data() + c * plane;
    out[c] = *std::max_element(p, p + plane);
  }
  return out;
}

}  // namespace bevcv
