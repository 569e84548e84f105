#include "bevcv/loss.hpp"

#include <cmath>
#include <limits>

#include "bevcv/error.hpp"

namespace bevcv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("temperature", "must be > 0");
  }
  if (!(margin >= 0.0) || !std::isfinite(margin)) {
    throw ValidationError("margin", "must be >= 0");
  }
}

double cosine_kernel(std::span<const double> a, std::span<const double> b,
                     double tau) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine_kernel operands");
  if (!(tau > 0.0)) throw InvalidArgument("temperature must be > 0");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return std::exp(ab / (tau * std::sqrt(aa) * std::sqrt(bb)));
}

namespace {

// Anchored NT-Xent terms for the rows of `s` (anchor r, positive s(r,r)).
// Adds d(sum of terms)/ds * scale into grad.
VectorXd anchored_terms(const MatrixXd& s, const LossConfig& cfg, double scale,
                        MatrixXd& grad) {
  const Eigen::Index B = s.rows();
  const double inv_tau = 1.0 / cfg.temperature;
  const bool include_pos = cfg.variant == NtXentVariant::kStandard;
  VectorXd terms(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < B; ++k) {
      if (k != i || include_pos) mx = std::max(mx, s(i, k) * inv_tau);
    }
    double sum = 0.0;
    for (Eigen::Index k = 0; k < B; ++k) {
      if (k != i || include_pos) sum += std::exp(s(i, k) * inv_tau - mx);
    }
    const double lse = mx + std::log(sum);
    terms(i) = lse - s(i, i) * inv_tau;
    for (Eigen::Index k = 0; k < B; ++k) {
      if (k != i || include_pos) {
        grad(i, k) += scale * inv_tau * std::exp(s(i, k) * inv_tau - lse);
      }
    }
    grad(i, i) -= scale * inv_tau;
  }
  return terms;
}

}  // namespace

SimilarityLoss ntxent_from_similarity(const MatrixXd& sim,
                                      const LossConfig& cfg) {
  cfg.validate();
  const Eigen::Index B = sim.rows();
  if (sim.cols() != B) throw DimensionMismatch("similarity matrix not square");
  if (B < 2) {
    throw DegenerateBatch("NT-Xent needs at least 2 pairs, got " +
                          std::to_string(B));
  }
  SimilarityLoss out;
  out.grad_sim = MatrixXd::Zero(B, B);
  if (!cfg.symmetric) {
    out.per_pair = anchored_terms(sim, cfg, 1.0 / B, out.grad_sim);
  } else {
    const double scale = 1.0 / (2.0 * B);
    const VectorXd pov_terms = anchored_terms(sim, cfg, scale, out.grad_sim);
    MatrixXd grad_t = MatrixXd::Zero(B, B);
    const MatrixXd sim_t = sim.transpose();
    const VectorXd aer_terms = anchored_terms(sim_t, cfg, scale, grad_t);
    out.grad_sim += grad_t.transpose();
    out.per_pair = 0.5 * (pov_terms + aer_terms);
  }
  out.loss = out.per_pair.mean();
  return out;
}

PairLoss ntxent_loss(const MatrixXd& pov, const MatrixXd& aer,
                     const LossConfig& cfg) {
  if (pov.rows() != aer.rows() || pov.cols() != aer.cols()) {
    throw DimensionMismatch("pov and aerial batches differ in shape");
  }
  if (pov.rows() < 2) {
    throw DegenerateBatch("NT-Xent needs at least 2 pairs, got " +
                          std::to_string(pov.rows()));
  }
  const VectorXd pn = pov.rowwise().norm();
  const VectorXd an = aer.rowwise().norm();
  const MatrixXd ph = pn.cwiseInverse().asDiagonal() * pov;
  const MatrixXd ah = an.cwiseInverse().asDiagonal() * aer;
  const MatrixXd sim = ph * ah.transpose();
  const SimilarityLoss sl = ntxent_from_similarity(sim, cfg);

  // S = ph ah^T; project the unit-vector gradients onto each tangent plane.
  const MatrixXd g_ph = sl.grad_sim * ah;
  const MatrixXd g_ah = sl.grad_sim.transpose() * ph;
  PairLoss out;
  out.loss = sl.loss;
  out.per_pair = sl.per_pair;
  out.grad_pov.resize(pov.rows(), pov.cols());
  out.grad_aer.resize(aer.rows(), aer.cols());
  for (Eigen::Index i = 0; i < pov.rows(); ++i) {
    out.grad_pov.row(i) =
        (g_ph.row(i) - ph.row(i) * ph.row(i).dot(g_ph.row(i))) / pn(i);
    out.grad_aer.row(i) =
        (g_ah.row(i) - ah.row(i) * ah.row(i).dot(g_ah.row(i))) / an(i);
  }
  return out;
}

TripletResult triplet_loss(const VectorXd& anchor, const VectorXd& positive,
                           const VectorXd& negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw DimensionMismatch("triplet operands differ in length");
  }
  const VectorXd ap = anchor - positive;
  const VectorXd an = anchor - negative;
  const double raw = ap.squaredNorm() - an.squaredNorm() + margin;
  TripletResult r;
  r.loss = std::max(0.0, raw);
  if (raw > 0.0) {
    r.grad_anchor = 2.0 * (negative - positive);
    r.grad_positive = -2.0 * ap;
    r.grad_negative = 2.0 * an;
  } else {
    r.grad_anchor = VectorXd::Zero(anchor.size());
    r.grad_positive = VectorXd::Zero(anchor.size());
    r.grad_negative = VectorXd::Zero(anchor.size());
  }
  return r;
}

PairLoss batch_triplet_loss(const MatrixXd& pov, const MatrixXd& aer,
                            double margin) {
  if (pov.rows() != aer.rows() || pov.cols() != aer.cols()) {
    throw DimensionMismatch("pov and aerial batches differ in shape");
  }
  const Eigen::Index B = pov.rows();
  if (B < 2) throw DegenerateBatch("triplet batch needs at least 2 pairs");
  PairLoss out;
  out.per_pair = VectorXd::Zero(B);
  out.grad_pov = MatrixXd::Zero(B, pov.cols());
  out.grad_aer = MatrixXd::Zero(B, aer.cols());
  const double scale = 1.0 / static_cast<double>(B * (B - 1));
  for (Eigen::Index i = 0; i < B; ++i) {
    for (Eigen::Index k = 0; k < B; ++k) {
      if (k == i) continue;
      const auto t = triplet_loss(pov.row(i).transpose(), aer.row(i).transpose(),
                                  aer.row(k).transpose(), margin);
      out.per_pair(i) += t.loss / static_cast<double>(B - 1);
      out.grad_pov.row(i) += scale * t.grad_anchor.transpose();
      out.grad_aer.row(i) += scale * t.grad_positive.transpose();
      out.grad_aer.row(k) += scale * t.grad_negative.transpose();
    }
  }
  out.loss = out.per_pair.mean();
  return out;
}

}  // namespace bevcv
