#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "bevcv/random.hpp"
#include "bevcv/tensor.hpp"
#include "bevcv/weights.hpp"

namespace bevcv {

enum class Branch { kPov, kAerial };

const char* branch_name(Branch b);  // "pov" / "aerial"
Branch parse_branch(const std::string& s);

struct Embedding {
  std::vector<float> values;
  bool unit_norm = false;
};

inline constexpr double kBatchNormEps = 1e-5;

// Projection head parameters, held in double for training and gradient
// checks. Pov:    maxpool -> BN -> LeakyReLU -> FC -> L2 normalise.
//         Aerial: maxpool -> FC(reduce) -> BN -> LeakyReLU -> FC -> L2.
struct HeadParams {
  Branch branch = Branch::kPov;
  Eigen::MatrixXd reduce_w;  // dim x in_dim; empty for the pov head
  Eigen::VectorXd reduce_b;
  Eigen::VectorXd bn_scale, bn_shift, bn_mean, bn_var;
  Eigen::MatrixXd fc_w;  // dim x dim
  Eigen::VectorXd fc_b;

  std::size_t dim() const { return static_cast<std::size_t>(fc_b.size()); }
  std::size_t in_dim() const;

  // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, unit BN.
  static HeadParams init(Branch branch, std::size_t in_dim, std::size_t dim,
                         Rng& rng);
  static HeadParams from_weights(const LayerWeights& w, Branch branch);
  void store(LayerWeights& w) const;
};

std::string head_prefix(Branch b);  // "head.pov" / "head.aer"

enum class BnMode { kInference, kTraining };

// Intermediate values of a batched head forward pass (rows = batch items).
struct HeadActivations {
  BnMode mode = BnMode::kInference;
  Eigen::MatrixXd input;  // pooled features
  Eigen::MatrixXd h0;     // BN input
  Eigen::MatrixXd xhat;   // normalised
  Eigen::MatrixXd h1;     // BN output
  Eigen::MatrixXd act;    // LeakyReLU output
  Eigen::MatrixXd z;      // FC output
  Eigen::MatrixXd out;    // unit rows
  Eigen::VectorXd batch_mean, batch_var;
};

struct HeadGradients {
  Eigen::MatrixXd reduce_w;
  Eigen::VectorXd reduce_b;
  Eigen::VectorXd bn_scale, bn_shift;
  Eigen::MatrixXd fc_w;
  Eigen::VectorXd fc_b;
};

HeadActivations head_forward(const HeadParams& p, const Eigen::MatrixXd& pooled,
                             BnMode mode);

// Gradients of the parameters given dL/d(out). Training mode propagates
// through the batch statistics.
HeadGradients head_backward(const HeadParams& p, const HeadActivations& a,
                            const Eigen::MatrixXd& grad_out);

// Row-wise gradient of x / ||x||: (g - y (y . g)) / ||x||.
Eigen::MatrixXd l2_normalize_backward(const Eigen::MatrixXd& x,
                                      const Eigen::MatrixXd& grad_out);

// running = (1 - momentum) * running + momentum * batch (unbiased variance).
void update_running_stats(HeadParams& p, const HeadActivations& a,
                          double momentum);

// Per-channel spatial max of each (C, H, W) feature map, one row per map.
Eigen::MatrixXd pool_features(std::span<const Tensor> feats);

// Inference forward of a single feature map to a unit-norm embedding.
Embedding projection_forward(const Tensor& feat, const LayerWeights& w,
                             Branch branch);

// Training-mode gradients of the head parameters for a batch of feature maps.
HeadGradients projection_backward(std::span<const Tensor> feats,
                                  const HeadParams& p,
                                  const Eigen::MatrixXd& upstream_grad);

}  // namespace bevcv
