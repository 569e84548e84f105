#include "bevcv/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "bevcv/error.hpp"
#include "bevcv/random.hpp"

namespace bevcv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void TrainerConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs", "must be >= 0");
  if (batch_size < 2) throw ValidationError("batch_size", "must be >= 2");
  if (!(learning_rate > 0.0)) {
    throw ValidationError("learning_rate", "must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) {
    throw ValidationError("beta1", "must lie in [0, 1)");
  }
  if (!(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("beta2", "must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("adam_eps", "must be > 0");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ValidationError("plateau_factor", "must lie in (0, 1)");
  }
  if (plateau_patience < 0) {
    throw ValidationError("plateau_patience", "must be >= 0");
  }
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw ValidationError("bn_momentum", "must lie in [0, 1]");
  }
}

namespace {

// Adam moments for one parameter block.
template <typename M>
struct AdamSlot {
  M m, v;

  void step(M& param, const M& grad, double lr, const TrainerConfig& cfg,
            int t) {
    if (m.size() == 0) {
      m = M::Zero(param.rows(), param.cols());
      v = M::Zero(param.rows(), param.cols());
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
  }
};

struct HeadOptimizer {
  AdamSlot<MatrixXd> reduce_w, fc_w;
  AdamSlot<VectorXd> reduce_b, bn_scale, bn_shift, fc_b;

  void step(HeadParams& p, const HeadGradients& g, double lr,
            const TrainerConfig& cfg, int t) {
    if (p.branch == Branch::kAerial) {
      reduce_w.step(p.reduce_w, g.reduce_w, lr, cfg, t);
      reduce_b.step(p.reduce_b, g.reduce_b, lr, cfg, t);
    }
    bn_scale.step(p.bn_scale, g.bn_scale, lr, cfg, t);
    bn_shift.step(p.bn_shift, g.bn_shift, lr, cfg, t);
    fc_w.step(p.fc_w, g.fc_w, lr, cfg, t);
    fc_b.step(p.fc_b, g.fc_b, lr, cfg, t);
  }
};

MatrixXd gather_rows(const MatrixXd& m, std::span<const std::size_t> rows) {
  MatrixXd out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

}  // namespace

TrainResult train_heads_pooled(const MatrixXd& pov_pooled,
                               const MatrixXd& aer_pooled,
                               const TrainerConfig& cfg, const LossConfig& loss,
                               std::size_t embedding_dim) {
  cfg.validate();
  loss.validate();
  const auto n = static_cast<std::size_t>(pov_pooled.rows());
  if (static_cast<std::size_t>(aer_pooled.rows()) != n) {
    throw ShapeMismatch("pov and aerial feature counts differ");
  }
  if (n < 2) {
    throw DegenerateBatch("training needs at least 2 pairs, got " +
                          std::to_string(n));
  }
  if (static_cast<std::size_t>(pov_pooled.cols()) != embedding_dim) {
    throw ShapeMismatch("pov features must have " +
                        std::to_string(embedding_dim) + " channels");
  }

  Rng init_rng(cfg.seed);
  HeadParams pov = HeadParams::init(Branch::kPov, embedding_dim, embedding_dim,
                                    init_rng);
  HeadParams aer = HeadParams::init(
      Branch::kAerial, static_cast<std::size_t>(aer_pooled.cols()),
      embedding_dim, init_rng);
  HeadOptimizer pov_opt, aer_opt;
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);
  double lr = cfg.learning_rate;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int step = 0;

  TrainResult result;
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double weighted = 0.0;
    for (std::size_t begin = 0; begin < n;) {
      std::size_t end = std::min(begin + batch, n);
      if (n - end == 1) end = n;  // never leave a batch of one
      const std::span<const std::size_t> rows(order.data() + begin,
                                              end - begin);
      auto pa = head_forward(pov, gather_rows(pov_pooled, rows),
                             BnMode::kTraining);
      auto aa = head_forward(aer, gather_rows(aer_pooled, rows),
                             BnMode::kTraining);
      const PairLoss pl =
          cfg.loss == LossKind::kNtXent
              ? ntxent_loss(pa.out, aa.out, loss)
              : batch_triplet_loss(pa.out, aa.out, loss.margin);
      const HeadGradients pg = head_backward(pov, pa, pl.grad_pov);
      const HeadGradients ag = head_backward(aer, aa, pl.grad_aer);
      ++step;
      pov_opt.step(pov, pg, lr, cfg, step);
      aer_opt.step(aer, ag, lr, cfg, step);
      update_running_stats(pov, pa, cfg.bn_momentum);
      update_running_stats(aer, aa, cfg.bn_momentum);
      weighted += pl.loss * static_cast<double>(end - begin);
      begin = end;
    }
    const double epoch_loss = weighted / static_cast<double>(n);
    result.epoch_loss.push_back(epoch_loss);
    result.epoch_lr.push_back(lr);

    // Thresholded relative improvement, as in torch's ReduceLROnPlateau.
    const double scale = 1.0 - (best > 0 ? cfg.plateau_threshold
                                         : -cfg.plateau_threshold);
    if (epoch_loss < best * scale || !std::isfinite(best)) {
      best = epoch_loss;
      bad_epochs = 0;
    } else if (++bad_epochs > cfg.plateau_patience) {
      lr *= cfg.plateau_factor;
      bad_epochs = 0;
    }
  }
  pov.store(result.weights);
  aer.store(result.weights);
  return result;
}

TrainResult train_heads(std::span<const FeaturePair> pairs,
                        const TrainerConfig& cfg, const LossConfig& loss,
                        std::size_t embedding_dim) {
  std::vector<Tensor> pov, aer;
  pov.reserve(pairs.size());
  aer.reserve(pairs.size());
  for (const auto& p : pairs) {
    pov.push_back(p.pov);
    aer.push_back(p.aer);
  }
  if (pairs.size() < 2) {
    throw DegenerateBatch("training needs at least 2 pairs, got " +
                          std::to_string(pairs.size()));
  }
  return train_heads_pooled(pool_features(pov), pool_features(aer), cfg, loss,
                            embedding_dim);
}

MatrixXd embed_pooled(const HeadParams& head, const MatrixXd& pooled) {
  return head_forward(head, pooled, BnMode::kInference).out;
}

void write_loss_csv(const std::filesystem::path& path, const TrainResult& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,loss,lr\n";
  char buf[96];
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, r.epoch_loss[e],
                  r.epoch_lr[e]);
    out << buf;
  }
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace bevcv
