#include <gtest/gtest.h>

#include "bevcv/error.hpp"
#include "bevcv/layers.hpp"
#include "test_util.hpp"

using namespace bevcv;
using test::random_tensor;

namespace {

// Textbook nested-loop convolution in double.
Tensor conv_oracle(const Tensor& x, const Tensor& k, const std::vector<float>& b,
                   int stride, int pad) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int O = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  Tensor out({static_cast<std::size_t>(O), static_cast<std::size_t>(OH),
              static_cast<std::size_t>(OW)});
  for (int o = 0; o < O; ++o)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        double acc = b.empty() ? 0.0 : b[o];
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
              const int y = oy * stride + i - pad, xx = ox * stride + j - pad;
              if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
              acc += double(k[((o * C + c) * kh + i) * kw + j]) * x.at(c, y, xx);
            }
        out.at(o, oy, ox) = static_cast<float>(acc);
      }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
  return s;
}

void expect_close(const Tensor& a, const Tensor& b, double tol = 1e-6) {
  ASSERT_EQ(a.dims(), b.dims());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_LE(test::rel_err(a[i], b[i]), tol) << "at " << i;
  }
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor k({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) k[c * 3 + c] = 1.0f;
  EXPECT_EQ(conv2d(x, k, {}, 1, 0), x);
}

TEST(Conv2d, AllOnesSum) {
  const Tensor x({1, 3, 3}, 1.0f);
  const Tensor k({1, 1, 3, 3}, 1.0f);
  const Tensor y = conv2d(x, k, {}, 1, 0);
  EXPECT_EQ(y.dims(), (Dims{1, 1, 1}));
  EXPECT_EQ(y[0], 9.0f);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(2);
  const Tensor x = random_tensor({2, 5, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  expect_close(conv2d(x, k, {}, 1, 0), conv_oracle(x, k, {}, 1, 0));
}

TEST(Conv2dProperty, RandomShapesMatchOracle) {
  Rng rng(3);
  for (int t = 0; t < 150; ++t) {
    const std::size_t C = 1 + rng.below(4), O = 1 + rng.below(4);
    const std::size_t kh = 1 + rng.below(4), kw = 1 + rng.below(4);
    const int stride = 1 + rng.below(3), pad = rng.below(3);
    const std::size_t H = kh + rng.below(7), W = kw + rng.below(7);
    const Tensor x = random_tensor({C, H, W}, rng);
    const Tensor k = random_tensor({O, C, kh, kw}, rng);
    std::vector<float> b;
    if (rng.below(2)) {
      for (std::size_t o = 0; o < O; ++o) b.push_back(rng.uniform(-1, 1));
    }
    const Tensor y = conv2d(x, k, b, stride, pad);
    ASSERT_EQ(y.dim(1), std::size_t(conv_out_extent(H, kh, stride, pad)));
    ASSERT_EQ(y.dim(2), std::size_t(conv_out_extent(W, kw, stride, pad)));
    expect_close(y, conv_oracle(x, k, b, stride, pad));
  }
}

TEST(Conv2d, ShapeErrors) {
  const Tensor x({2, 3, 3});
  EXPECT_THROW(conv2d(x, Tensor({1, 3, 1, 1}), {}, 1, 0), ShapeMismatch);
  EXPECT_THROW(conv2d(x, Tensor({1, 2, 5, 5}), {}, 1, 0), ShapeMismatch);
  EXPECT_THROW(conv2d(x, Tensor({2, 2, 1, 1}), std::vector<float>{1.f}, 1, 0),
               ShapeMismatch);
  EXPECT_THROW(conv2d(x, Tensor({1, 2, 1, 1}), {}, 0, 0), ShapeMismatch);
}

TEST(TransposedConv, SingleTapExpansion) {
  Rng rng(4);
  const Tensor x({1, 1, 1}, 2.5f);
  const Tensor k = random_tensor({1, 1, 2, 2}, rng);
  const Tensor y = transposed_conv2d(x, k, 2);
  ASSERT_EQ(y.dims(), (Dims{1, 2, 2}));
  for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(y[i], 2.5f * k[i]);
}

TEST(TransposedConv, ZeroInputZeroOutput) {
  Rng rng(5);
  const Tensor y = transposed_conv2d(Tensor({3, 4, 4}), random_tensor({3, 2, 3, 3}, rng), 2);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(TransposedConv, IsAdjointOfConv) {
  // <conv(x, K), y> == <x, deconv(y, K^T)> where deconv takes the kernel as
  // (C_in_of_deconv, C_out_of_deconv, k, k) = conv's (O, C, k, k).
  Rng rng(6);
  for (int stride : {1, 2, 3}) {
    for (int ks : {1, 2, 3}) {
      const Tensor x = random_tensor({2, std::size_t(4 * stride + ks), std::size_t(4 * stride + ks)}, rng);
      const Tensor k = random_tensor({3, 2, std::size_t(ks), std::size_t(ks)}, rng);
      const Tensor cx = conv2d(x, k, {}, stride, 0);
      const Tensor y = random_tensor(cx.dims(), rng);
      const Tensor ty = transposed_conv2d(y, k, stride);
      // The deconv output may be shorter than x when the conv dropped rows.
      double rhs = 0;
      for (std::size_t c = 0; c < ty.dim(0); ++c)
        for (std::size_t i = 0; i < ty.dim(1); ++i)
          for (std::size_t j = 0; j < ty.dim(2); ++j)
            rhs += double(ty.at(c, i, j)) * x.at(c, i, j);
      EXPECT_LE(test::rel_err(dot(cx, y), rhs), 1e-5) << stride << " " << ks;
      EXPECT_EQ(ty.dim(1), (cx.dim(1) - 1) * stride + ks);
    }
  }
}

TEST(TransposedConv, BruteForceScatter) {
  Rng rng(7);
  const Tensor x = random_tensor({2, 4, 4}, rng);
  const Tensor k = random_tensor({2, 3, 2, 2}, rng);
  const Tensor y = transposed_conv2d(x, k, 2);
  ASSERT_EQ(y.dims(), (Dims{3, 8, 8}));
  std::vector<double> ref(3 * 8 * 8, 0.0);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int o = 0; o < 3; ++o)
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              ref[(o * 8 + 2 * i + a) * 8 + 2 * j + b] +=
                  double(x.at(c, i, j)) * k[((c * 3 + o) * 2 + a) * 2 + b];
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_LE(test::rel_err(y[i], ref[i]), 1e-6);
  }
}

TEST(MaxPool, TwoByTwo) {
  const Tensor x({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_EQ(maxpool2d(x, 2, 2), Tensor({1, 1, 1}, std::vector<float>{4}));
}

TEST(MaxPoolProperty, MatchesOracle) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const int k = 1 + rng.below(3), s = 1 + rng.below(3);
    const std::size_t H = k + rng.below(6), W = k + rng.below(6);
    const Tensor x = random_tensor({2, H, W}, rng);
    const Tensor y = maxpool2d(x, k, s);
    ASSERT_EQ(y.dim(1), (H - k) / s + 1);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < y.dim(1); ++i)
        for (std::size_t j = 0; j < y.dim(2); ++j) {
          float m = -1e30f;
          for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) m = std::max(m, x.at(c, i * s + a, j * s + b));
          ASSERT_EQ(y.at(c, i, j), m);
        }
  }
}

TEST(Upsample, BlocksAreConstant) {
  Rng rng(9);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  const Tensor y = upsample2x_nearest(x);
  ASSERT_EQ(y.dims(), (Dims{2, 6, 8}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(y.at(c, i, j), x.at(c, i / 2, j / 2));
}

TEST(LeakyRelu, Values) {
  const Tensor x({3}, std::vector<float>{-1.0f, 0.0f, 2.0f});
  const Tensor y = leaky_relu(x, 0.01f);
  EXPECT_FLOAT_EQ(y[0], -0.01f);
  EXPECT_EQ(y[1], 0.0f);
  EXPECT_EQ(y[2], 2.0f);
  EXPECT_FLOAT_EQ(leaky_relu(x)[0], -0.01f);  // default slope
}

TEST(BatchNorm, UnitParametersAreIdentity) {
  Rng rng(10);
  const Tensor x = random_tensor({3, 4, 4}, rng);
  const std::vector<float> one(3, 1.0f), zero(3, 0.0f);
  const Tensor y = batchnorm_apply(x, one, zero, zero, one, 0.0f);
  EXPECT_EQ(y, x);
}

TEST(BatchNorm, MatchesFormula) {
  Rng rng(11);
  const Tensor x = random_tensor({2, 3, 3}, rng);
  const std::vector<float> sc{2.0f, 0.5f}, sh{0.1f, -0.3f}, mu{0.2f, -0.1f},
      var{4.0f, 0.25f};
  const Tensor y = batchnorm_apply(x, sc, sh, mu, var, 1e-5f);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 9; ++i) {
      const double ref = sc[c] * (x[c * 9 + i] - mu[c]) / std::sqrt(var[c] + 1e-5) + sh[c];
      EXPECT_NEAR(y[c * 9 + i], ref, 1e-6);
    }
  EXPECT_THROW(batchnorm_apply(x, sc, sh, mu, std::vector<float>{1.0f}), ShapeMismatch);
}

TEST(Concat, StacksChannels) {
  Rng rng(12);
  const Tensor a = random_tensor({1, 2, 2}, rng), b = random_tensor({2, 2, 2}, rng);
  const Tensor c = concat_channels(a, b);
  ASSERT_EQ(c.dims(), (Dims{3, 2, 2}));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(c[i], a[i]);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(c[4 + i], b[i]);
  EXPECT_THROW(concat_channels(a, Tensor({1, 3, 2})), ShapeMismatch);
}

TEST(GlobalMaxPool, PerChannel) {
  const Tensor x({2, 1, 3}, std::vector<float>{-1, 5, 2, -3, -2, -4});
  EXPECT_EQ(global_max_pool(x), (std::vector<float>{5, -2}));
}

TEST(TensorType, Invariants) {
  EXPECT_THROW(Tensor(Dims{}), ShapeMismatch);
  EXPECT_THROW(Tensor(Dims{2, 0}), ShapeMismatch);
  EXPECT_THROW(Tensor(Dims{1, 1, 1, 1, 1}), ShapeMismatch);
  EXPECT_THROW(Tensor(Dims{2, 2}, std::vector<float>(3)), ShapeMismatch);
  EXPECT_EQ(Tensor(Dims{2, 3}).size(), 6u);
}
