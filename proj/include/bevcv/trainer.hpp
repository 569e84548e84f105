#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bevcv/loss.hpp"
#include "bevcv/projection.hpp"
#include "bevcv/tensor.hpp"
#include "bevcv/weights.hpp"

namespace bevcv {

enum class LossKind { kNtXent, kTriplet };

struct TrainerConfig {
  int epochs = 80;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // ReduceLROnPlateau on the epoch training loss (relative threshold).
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  double plateau_threshold = 1e-4;
  double bn_momentum = 0.1;
  LossKind loss = LossKind::kNtXent;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainerConfig&) const = default;
};

struct FeaturePair {
  Tensor pov;  // (C_pov, H, W)
  Tensor aer;  // (C_aer, H, W)
};

struct TrainResult {
  LayerWeights weights;  // head.pov.* and head.aer.*
  std::vector<double> epoch_loss;
  std::vector<double> epoch_lr;
};

// Jointly trains both projection heads with Adam; conv features are frozen,
// so they are max-pooled once up front. Mini-batches come from a seeded
// shuffle each epoch; a trailing batch of one is folded into the previous
// batch.
TrainResult train_heads(std::span<const FeaturePair> pairs,
                        const TrainerConfig& cfg, const LossConfig& loss,
                        std::size_t embedding_dim);

TrainResult train_heads_pooled(const Eigen::MatrixXd& pov_pooled,
                               const Eigen::MatrixXd& aer_pooled,
                               const TrainerConfig& cfg, const LossConfig& loss,
                               std::size_t embedding_dim);

// Inference-mode embeddings (rows) of pooled features.
Eigen::MatrixXd embed_pooled(const HeadParams& head, const Eigen::MatrixXd& pooled);

// "epoch,loss,lr" CSV.
void write_loss_csv(const std::filesystem::path& path, const TrainResult& r);

}  // namespace bevcv
