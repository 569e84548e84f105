#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bevcv/error.hpp"
#include "bevcv/loss.hpp"
#include "bevcv/random.hpp"

using namespace bevcv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_rows(Eigen::Index b, Eigen::Index d, Rng& rng) {
  MatrixXd m(b, d);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

double cosine(const VectorXd& a, const VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// Direct transcription with loops, anchored on the rows of `x`.
double oracle_anchored(const MatrixXd& x, const MatrixXd& y, double tau, bool standard) {
  const Eigen::Index B = x.rows();
  double total = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    double denom = 0;
    for (Eigen::Index k = 0; k < B; ++k) {
      if (k == i && !standard) continue;
      denom += std::exp(cosine(x.row(i), y.row(k)) / tau);
    }
    total += -std::log(std::exp(cosine(x.row(i), y.row(i)) / tau) / denom);
  }
  return total / B;
}

double oracle(const MatrixXd& pov, const MatrixXd& aer, const LossConfig& c) {
  const bool st = c.variant == NtXentVariant::kStandard;
  const double a = oracle_anchored(pov, aer, c.temperature, st);
  if (!c.symmetric) return a;
  return 0.5 * (a + oracle_anchored(aer, pov, c.temperature, st));
}

void fd_check(const MatrixXd& pov, const MatrixXd& aer, const LossConfig& cfg) {
  const PairLoss r = ntxent_loss(pov, aer, cfg);
  const double h = 1e-6;
  for (int side = 0; side < 2; ++side) {
    MatrixXd p = pov, a = aer;
    MatrixXd& m = side == 0 ? p : a;
    const MatrixXd& g = side == 0 ? r.grad_pov : r.grad_aer;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = ntxent_loss(p, a, cfg).loss;
      m.data()[i] = saved - h;
      const double down = ntxent_loss(p, a, cfg).loss;
      m.data()[i] = saved;
      const double fd = (up - down) / (2 * h);
      ASSERT_LE(std::abs(fd - g.data()[i]), 1e-5 * std::max(1.0, std::abs(fd)))
          << "side " << side << " entry " << i;
    }
  }
}

}  // namespace

TEST(CosineKernel, Examples) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{2, 0}, d{-3, 0};
  EXPECT_DOUBLE_EQ(cosine_kernel(a, a, 1.0), std::exp(1.0));
  EXPECT_DOUBLE_EQ(cosine_kernel(a, b, 1.0), 1.0);
  EXPECT_NEAR(cosine_kernel(a, c, 0.5), std::exp(2.0), 1e-12);
  EXPECT_NEAR(cosine_kernel(a, d, 0.1), std::exp(-10.0), 1e-18);
}

TEST(CosineKernel, ScaleInvariantAndSymmetric) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(6), b(6), a2(6);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double s = rng.uniform(0.1, 10);
    for (int i = 0; i < 6; ++i) a2[i] = s * a[i];
    EXPECT_NEAR(cosine_kernel(a, b, 0.2), cosine_kernel(b, a, 0.2), 1e-12);
    EXPECT_NEAR(cosine_kernel(a2, b, 0.2), cosine_kernel(a, b, 0.2), 1e-9);
  }
}

TEST(NtXent, TwoItemAnalyticValues) {
  LossConfig cfg;
  cfg.temperature = 1.0;
  // All four cosines equal: positive and negative terms cancel.
  MatrixXd same(2, 2);
  same << 1, 0, 1, 0;
  EXPECT_NEAR(ntxent_loss(same, same, cfg).loss, 0.0, 1e-12);
  // Orthogonal items: exp(1) / exp(0).
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  EXPECT_NEAR(ntxent_loss(eye, eye, cfg).loss, -1.0, 1e-12);
  cfg.variant = NtXentVariant::kStandard;
  EXPECT_NEAR(ntxent_loss(eye, eye, cfg).loss, -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)),
              1e-12);
  EXPECT_NEAR(ntxent_loss(same, same, cfg).loss, std::log(2.0), 1e-12);
}

TEST(NtXent, MatchesLoopOracle) {
  Rng rng(2);
  for (bool sym : {false, true})
    for (auto var : {NtXentVariant::kNegativesOnly, NtXentVariant::kStandard})
      for (Eigen::Index b = 2; b <= 8; ++b) {
        LossConfig cfg;
        cfg.symmetric = sym;
        cfg.variant = var;
        cfg.temperature = rng.uniform(0.05, 1.0);
        const MatrixXd p = random_rows(b, 5, rng), a = random_rows(b, 5, rng);
        EXPECT_NEAR(ntxent_loss(p, a, cfg).loss, oracle(p, a, cfg), 1e-9);
      }
}

TEST(NtXent, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  for (bool sym : {false, true})
    for (auto var : {NtXentVariant::kNegativesOnly, NtXentVariant::kStandard})
      for (Eigen::Index b = 2; b <= 8; ++b) {
        LossConfig cfg;
        cfg.symmetric = sym;
        cfg.variant = var;
        cfg.temperature = 0.5;
        fd_check(random_rows(b, 4, rng), random_rows(b, 4, rng), cfg);
      }
}

TEST(NtXent, StandardVariantNonNegative) {
  Rng rng(4);
  LossConfig cfg;
  cfg.variant = NtXentVariant::kStandard;
  for (int t = 0; t < 200; ++t) {
    const auto b = 2 + static_cast<Eigen::Index>(rng.below(7));
    cfg.temperature = rng.uniform(0.01, 2.0);
    EXPECT_GE(ntxent_loss(random_rows(b, 3, rng), random_rows(b, 3, rng), cfg).loss, 0.0);
  }
}

TEST(NtXent, InvariantUnderJointPermutation) {
  Rng rng(5);
  LossConfig cfg;
  const MatrixXd p = random_rows(6, 4, rng), a = random_rows(6, 4, rng);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[1], perm[4]);
  MatrixXd pp(6, 4), ap(6, 4);
  for (int i = 0; i < 6; ++i) {
    pp.row(i) = p.row(perm[i]);
    ap.row(i) = a.row(perm[i]);
  }
  EXPECT_NEAR(ntxent_loss(p, a, cfg).loss, ntxent_loss(pp, ap, cfg).loss, 1e-12);
}

TEST(NtXent, DegenerateInputs) {
  LossConfig cfg;
  EXPECT_THROW(ntxent_loss(MatrixXd::Ones(1, 3), MatrixXd::Ones(1, 3), cfg), DegenerateBatch);
  EXPECT_THROW(ntxent_loss(MatrixXd::Ones(2, 3), MatrixXd::Ones(3, 3), cfg), Error);
  cfg.temperature = -1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.temperature = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(NtXent, PerPairAveragesToLoss) {
  Rng rng(6);
  LossConfig cfg;
  const PairLoss r = ntxent_loss(random_rows(5, 3, rng), random_rows(5, 3, rng), cfg);
  EXPECT_NEAR(r.per_pair.mean(), r.loss, 1e-12);
}

TEST(Triplet, Examples) {
  VectorXd a(2), p(2), n(2);
  a << 0, 0;
  p << 1, 0;
  n << 2, 0;
  // 1 - 4 + 0.3 < 0: inactive.
  auto r = triplet_loss(a, p, n, 0.3);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grad_anchor.norm(), 0.0);
  // Swap roles: 4 - 1 + 0.3.
  r = triplet_loss(a, n, p, 0.3);
  EXPECT_NEAR(r.loss, 3.3, 1e-12);
  // d/dp |a-p|^2 = 2 (p - a); d/dn -|a-n|^2 = -2 (n - a).
  EXPECT_NEAR(r.grad_positive(0), 4.0, 1e-12);
  EXPECT_NEAR(r.grad_negative(0), -2.0, 1e-12);
  EXPECT_NEAR(r.grad_anchor(0), -2.0, 1e-12);
  // Exactly at the hinge: zero.
  VectorXd n2(2);
  n2 << std::sqrt(1.3), 0;
  EXPECT_NEAR(triplet_loss(a, p, n2, 0.3).loss, 0.0, 1e-12);
}

TEST(Triplet, BatchMatchesLoop) {
  Rng rng(7);
  const MatrixXd p = random_rows(4, 3, rng), a = random_rows(4, 3, rng);
  double total = 0;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      if (k == i) continue;
      const double v = (p.row(i) - a.row(i)).squaredNorm() -
                       (p.row(i) - a.row(k)).squaredNorm() + 0.3;
      total += std::max(0.0, v);
    }
  EXPECT_NEAR(batch_triplet_loss(p, a, 0.3).loss, total / 12.0, 1e-12);
}
