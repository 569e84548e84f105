#pragma once

#include <Eigen/Dense>
#include <span>

namespace bevcv {

enum class NtXentVariant {
  kNegativesOnly,  // denominator sums the B-1 negatives only
  kStandard,    // denominator also includes the positive
};

struct LossConfig {
  double temperature = 0.1;
  NtXentVariant variant = NtXentVariant::kNegativesOnly;
  double margin = 0.3;     // triplet margin
  bool symmetric = false;  // also average the aerial-anchored terms

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

// exp(a.b / (tau |a| |b|)).
double cosine_kernel(std::span<const double> a, std::span<const double> b,
                     double tau);

struct SimilarityLoss {
  double loss = 0.0;
  Eigen::VectorXd per_pair;  // L_i, averaged with the aerial-anchored term
                             // when symmetric
  Eigen::MatrixXd grad_sim;  // dloss/dS
};

// NT-Xent on a B x B cosine matrix S (row i: pov i against every aerial).
// Positives sit on the diagonal. Throws DegenerateBatch when B < 2.
SimilarityLoss ntxent_from_similarity(const Eigen::MatrixXd& sim,
                                      const LossConfig& cfg);

struct PairLoss {
  double loss = 0.0;
  Eigen::VectorXd per_pair;
  Eigen::MatrixXd grad_pov;  // B x d
  Eigen::MatrixXd grad_aer;  // B x d
};

// Row i of pov/aer is a positive pair; every other aerial row is a negative.
// Gradients are exact for arbitrary (not necessarily unit) rows.
PairLoss ntxent_loss(const Eigen::MatrixXd& pov, const Eigen::MatrixXd& aer,
                     const LossConfig& cfg);

struct TripletResult {
  double loss = 0.0;
  Eigen::VectorXd grad_anchor, grad_positive, grad_negative;
};

// max(0, |a-p|^2 - |a-n|^2 + margin); zero gradient unless strictly active.
TripletResult triplet_loss(const Eigen::VectorXd& anchor,
                           const Eigen::VectorXd& positive,
                           const Eigen::VectorXd& negative, double margin);

// Mean triplet loss over every (pov_i, aer_i, aer_k != i) in the batch.
PairLoss batch_triplet_loss(const Eigen::MatrixXd& pov,
                            const Eigen::MatrixXd& aer, double margin);

}  // namespace bevcv
