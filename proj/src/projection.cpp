#include "bevcv/projection.hpp"

#include <cmath>

#include "bevcv/error.hpp"
#include "bevcv/layers.hpp"
#include "bevcv/net.hpp"

namespace bevcv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* branch_name(Branch b) {
  return b == Branch::kPov ? "pov" : "aerial";
}

Branch parse_branch(const std::string& s) {
  if (s == "pov") return Branch::kPov;
  if (s == "aerial" || s == "aer") return Branch::kAerial;
  throw InvalidArgument("unknown branch '" + s + "' (expected pov|aerial)");
}

std::string head_prefix(Branch b) {
  return b == Branch::kPov ? "head.pov" : "head.aer";
}

std::size_t HeadParams::in_dim() const {
  return branch == Branch::kAerial ? static_cast<std::size_t>(reduce_w.cols())
                                   : dim();
}

HeadParams HeadParams::init(Branch branch, std::size_t in_dim, std::size_t dim,
                            Rng& rng) {
  if (dim == 0 || in_dim == 0) throw InvalidArgument("empty projection head");
  if (branch == Branch::kPov && in_dim != dim) {
    throw ShapeMismatch("pov head input must equal the embedding dim");
  }
  auto uniform = [&rng](Eigen::Index r, Eigen::Index c, double bound) {
    MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform(-bound, bound);
    }
    return m;
  };
  const auto d = static_cast<Eigen::Index>(dim);
  HeadParams p;
  p.branch = branch;
  if (branch == Branch::kAerial) {
    const double b = 1.0 / std::sqrt(static_cast<double>(in_dim));
    p.reduce_w = uniform(d, static_cast<Eigen::Index>(in_dim), b);
    p.reduce_b = uniform(d, 1, b);
  }
  p.bn_scale = VectorXd::Ones(d);
  p.bn_shift = VectorXd::Zero(d);
  p.bn_mean = VectorXd::Zero(d);
  p.bn_var = VectorXd::Ones(d);
  const double b = 1.0 / std::sqrt(static_cast<double>(dim));
  p.fc_w = uniform(d, d, b);
  p.fc_b = uniform(d, 1, b);
  return p;
}

namespace {

MatrixXd to_matrix(const Tensor& t, const std::string& name) {
  expect_rank(t, 2, name);
  MatrixXd m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t[i * t.dim(1) + j];
  }
  return m;
}

VectorXd to_vector(const Tensor& t, std::size_t n, const std::string& name) {
  expect_dims(t, {n}, name);
  VectorXd v(n);
  for (std::size_t i = 0; i < n; ++i) v(i) = t[i];
  return v;
}

Tensor from_matrix(const MatrixXd& m) {
  std::vector<float> v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      v[i * m.cols() + j] = static_cast<float>(m(i, j));
    }
  }
  return Tensor({static_cast<std::size_t>(m.rows()),
                 static_cast<std::size_t>(m.cols())},
                std::move(v));
}

Tensor from_vector(const VectorXd& x) {
  std::vector<float> v(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) v[i] = static_cast<float>(x(i));
  return Tensor({static_cast<std::size_t>(x.size())}, std::move(v));
}

double leaky(double v) { return v > 0.0 ? v : kLeakySlope * v; }
double leaky_grad(double v) { return v > 0.0 ? 1.0 : kLeakySlope; }

}  // namespace

HeadParams HeadParams::from_weights(const LayerWeights& w, Branch branch) {
  const std::string p = head_prefix(branch);
  HeadParams h;
  h.branch = branch;
  h.fc_w = to_matrix(w.get(p + ".fc.weight"), p + ".fc.weight");
  if (h.fc_w.rows() != h.fc_w.cols()) {
    throw ShapeMismatch(p + ".fc.weight must be square");
  }
  const auto d = static_cast<std::size_t>(h.fc_w.rows());
  h.fc_b = to_vector(w.get(p + ".fc.bias"), d, p + ".fc.bias");
  if (branch == Branch::kAerial) {
    h.reduce_w = to_matrix(w.get(p + ".reduce.weight"), p + ".reduce.weight");
    if (static_cast<std::size_t>(h.reduce_w.rows()) != d) {
      throw ShapeMismatch(p + ".reduce.weight must have " + std::to_string(d) +
                          " rows");
    }
    h.reduce_b = to_vector(w.get(p + ".reduce.bias"), d, p + ".reduce.bias");
  }
  h.bn_scale = to_vector(w.get(p + ".bn.scale"), d, p + ".bn.scale");
  h.bn_shift = to_vector(w.get(p + ".bn.shift"), d, p + ".bn.shift");
  h.bn_mean = to_vector(w.get(p + ".bn.mean"), d, p + ".bn.mean");
  h.bn_var = to_vector(w.get(p + ".bn.var"), d, p + ".bn.var");
  return h;
}

void HeadParams::store(LayerWeights& w) const {
  const std::string p = head_prefix(branch);
  if (branch == Branch::kAerial) {
    w.set(p + ".reduce.weight", from_matrix(reduce_w));
    w.set(p + ".reduce.bias", from_vector(reduce_b));
  }
  w.set(p + ".bn.scale", from_vector(bn_scale));
  w.set(p + ".bn.shift", from_vector(bn_shift));
  w.set(p + ".bn.mean", from_vector(bn_mean));
  w.set(p + ".bn.var", from_vector(bn_var));
  w.set(p + ".fc.weight", from_matrix(fc_w));
  w.set(p + ".fc.bias", from_vector(fc_b));
}

HeadActivations head_forward(const HeadParams& p, const MatrixXd& pooled,
                             BnMode mode) {
  if (static_cast<std::size_t>(pooled.cols()) != p.in_dim()) {
    throw ShapeMismatch("projection head expects " + std::to_string(p.in_dim()) +
                        " pooled channels, got " +
                        std::to_string(pooled.cols()));
  }
  const Eigen::Index B = pooled.rows();
  if (B < 1) throw ShapeMismatch("projection head: empty batch");
  HeadActivations a;
  a.mode = mode;
  a.input = pooled;
  if (p.branch == Branch::kAerial) {
    a.h0 = (pooled * p.reduce_w.transpose()).rowwise() + p.reduce_b.transpose();
  } else {
    a.h0 = pooled;
  }
  if (mode == BnMode::kTraining) {
    a.batch_mean = a.h0.colwise().mean().transpose();
    const MatrixXd centred = a.h0.rowwise() - a.batch_mean.transpose();
    a.batch_var = centred.array().square().colwise().mean().transpose();
    const VectorXd inv = (a.batch_var.array() + kBatchNormEps).rsqrt();
    a.xhat = centred * inv.asDiagonal();
  } else {
    const VectorXd inv = (p.bn_var.array() + kBatchNormEps).rsqrt();
    a.xhat = (a.h0.rowwise() - p.bn_mean.transpose()) * inv.asDiagonal();
  }
  a.h1 = (a.xhat * p.bn_scale.asDiagonal()).rowwise() + p.bn_shift.transpose();
  a.act = a.h1.unaryExpr(&leaky);
  a.z = (a.act * p.fc_w.transpose()).rowwise() + p.fc_b.transpose();
  a.out = a.z;
  for (Eigen::Index i = 0; i < B; ++i) {
    const double n = a.z.row(i).norm();
    a.out.row(i) /= std::max(n, 1e-12);
  }
  return a;
}

MatrixXd l2_normalize_backward(const MatrixXd& x, const MatrixXd& grad_out) {
  MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = std::max(x.row(i).norm(), 1e-12);
    const Eigen::RowVectorXd y = x.row(i) / n;
    g.row(i) = (grad_out.row(i) - y * y.dot(grad_out.row(i))) / n;
  }
  return g;
}

HeadGradients head_backward(const HeadParams& p, const HeadActivations& a,
                            const MatrixXd& grad_out) {
  if (grad_out.rows() != a.out.rows() || grad_out.cols() != a.out.cols()) {
    throw ShapeMismatch("projection backward: upstream gradient shape");
  }
  const double B = static_cast<double>(a.out.rows());
  HeadGradients g;
  const MatrixXd gz = l2_normalize_backward(a.z, grad_out);
  g.fc_w = gz.transpose() * a.act;
  g.fc_b = gz.colwise().sum().transpose();
  const MatrixXd gact = gz * p.fc_w;
  const MatrixXd gh1 = gact.cwiseProduct(a.h1.unaryExpr(&leaky_grad));
  g.bn_scale = gh1.cwiseProduct(a.xhat).colwise().sum().transpose();
  g.bn_shift = gh1.colwise().sum().transpose();
  const MatrixXd gxhat = gh1 * p.bn_scale.asDiagonal();
  MatrixXd gh0;
  if (a.mode == BnMode::kTraining) {
    const VectorXd inv = (a.batch_var.array() + kBatchNormEps).rsqrt();
    const Eigen::RowVectorXd sum_g = gxhat.colwise().sum();
    const Eigen::RowVectorXd sum_gx = gxhat.cwiseProduct(a.xhat).colwise().sum();
    gh0 = ((B * gxhat).rowwise() - sum_g - a.xhat * sum_gx.asDiagonal()) *
          (inv / B).asDiagonal();
  } else {
    const VectorXd inv = (p.bn_var.array() + kBatchNormEps).rsqrt();
    gh0 = gxhat * inv.asDiagonal();
  }
  if (p.branch == Branch::kAerial) {
    g.reduce_w = gh0.transpose() * a.input;
    g.reduce_b = gh0.colwise().sum().transpose();
  }
  return g;
}

void update_running_stats(HeadParams& p, const HeadActivations& a,
                          double momentum) {
  if (a.mode != BnMode::kTraining) return;
  const double B = static_cast<double>(a.h0.rows());
  const VectorXd unbiased = B > 1 ? VectorXd(a.batch_var * (B / (B - 1)))
                                  : a.batch_var;
  p.bn_mean = (1.0 - momentum) * p.bn_mean + momentum * a.batch_mean;
  p.bn_var = (1.0 - momentum) * p.bn_var + momentum * unbiased;
}

MatrixXd pool_features(std::span<const Tensor> feats) {
  if (feats.empty()) return {};
  const std::size_t C = feats.front().dim(0);
  MatrixXd m(feats.size(), C);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (feats[i].rank() != 3 || feats[i].dim(0) != C) {
      throw ShapeMismatch("feature batch has inconsistent channel counts");
    }
    const auto v = global_max_pool(feats[i]);
    for (std::size_t c = 0; c < C; ++c) m(i, c) = v[c];
  }
  return m;
}

Embedding projection_forward(const Tensor& feat, const LayerWeights& w,
                             Branch branch) {
  expect_rank(feat, 3, "projection input");
  const HeadParams p = HeadParams::from_weights(w, branch);
  const auto act =
      head_forward(p, pool_features(std::span(&feat, 1)), BnMode::kInference);
  Embedding e;
  e.values.resize(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    e.values[i] = static_cast<float>(act.out(0, i));
  }
  e.unit_norm = true;
  return e;
}

HeadGradients projection_backward(std::span<const Tensor> feats,
                                  const HeadParams& p,
                                  const MatrixXd& upstream_grad) {
  const auto act = head_forward(p, pool_features(feats), BnMode::kTraining);
  return head_backward(p, act, upstream_grad);
}

}  // namespace bevcv
