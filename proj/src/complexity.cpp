#include "bevcv/complexity.hpp"

#include <cmath>
#include <cstdio>

#include "bevcv/error.hpp"
#include "bevcv/model.hpp"

namespace bevcv {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kDeconv: return "deconv";
    case LayerKind::kFc: return "fc";
    case LayerKind::kBatchNorm: return "bn";
    case LayerKind::kPool: return "pool";
  }
  return "?";
}

std::int64_t LayerSpec::out_h() const {
  switch (kind) {
    case LayerKind::kConv:
    case LayerKind::kPool:
      return (in_h + 2 * pad - kernel) / stride + 1;
    case LayerKind::kDeconv: return (in_h - 1) * stride + kernel;
    case LayerKind::kFc: return 1;
    case LayerKind::kBatchNorm: return in_h;
  }
  return 0;
}

std::int64_t LayerSpec::out_w() const {
  switch (kind) {
    case LayerKind::kConv:
    case LayerKind::kPool:
      return (in_w + 2 * pad - kernel) / stride + 1;
    case LayerKind::kDeconv: return (in_w - 1) * stride + kernel;
    case LayerKind::kFc: return 1;
    case LayerKind::kBatchNorm: return in_w;
  }
  return 0;
}

LayerCost layer_cost(const LayerSpec& l) {
  const auto bad = [&](const std::string& why) {
    return ShapeMismatch("layer '" + l.name + "': " + why);
  };
  if (l.in_channels < 1) throw bad("in_channels must be >= 1");
  const bool spatial = l.kind != LayerKind::kFc;
  if (spatial && (l.in_h < 1 || l.in_w < 1)) throw bad("empty input extent");
  if ((l.kind == LayerKind::kConv || l.kind == LayerKind::kDeconv ||
       l.kind == LayerKind::kPool) &&
      (l.kernel < 1 || l.stride < 1 || l.pad < 0)) {
    throw bad("kernel and stride must be >= 1, pad >= 0");
  }
  if ((l.kind == LayerKind::kConv || l.kind == LayerKind::kDeconv ||
       l.kind == LayerKind::kFc) &&
      l.out_channels < 1) {
    throw bad("out_channels must be >= 1");
  }
  if (spatial && (l.out_h() < 1 || l.out_w() < 1)) {
    throw bad("kernel larger than padded input");
  }

  LayerCost c;
  c.name = l.name;
  c.kind = l.kind;
  const std::int64_t k2 = l.kernel * l.kernel;
  switch (l.kind) {
    case LayerKind::kConv: {
      const std::int64_t outs = l.out_channels * l.out_h() * l.out_w();
      c.params = l.out_channels * l.in_channels * k2;
      c.macs = outs * l.in_channels * k2;
      if (l.bias) {
        c.params += l.out_channels;
        c.bias_adds = outs;
      }
      break;
    }
    case LayerKind::kDeconv: {
      // Every input element scatters into k*k outputs per output channel.
      c.params = l.in_channels * l.out_channels * k2;
      c.macs = l.in_channels * l.in_h * l.in_w * l.out_channels * k2;
      if (l.bias) {
        c.params += l.out_channels;
        c.bias_adds = l.out_channels * l.out_h() * l.out_w();
      }
      break;
    }
    case LayerKind::kFc:
      c.params = l.out_channels * l.in_channels;
      c.macs = l.out_channels * l.in_channels;
      if (l.bias) {
        c.params += l.out_channels;
        c.bias_adds = l.out_channels;
      }
      break;
    case LayerKind::kBatchNorm:
      // Scale and shift are learned; running statistics are buffers.
      c.params = 2 * l.in_channels;
      c.flops = 2 * l.in_channels * l.in_h * l.in_w;
      break;
    case LayerKind::kPool:
      break;
  }
  c.flops += 2 * c.macs;
  return c;
}

namespace {

void set_ratios(ComplexityReport& r) {
  if (r.embedding_dim > 0 && r.reference_dim > 0) {
    const double ratio = static_cast<double>(r.embedding_dim) /
                         static_cast<double>(r.reference_dim);
    r.relative_memory = ratio;
    r.relative_query_cost = std::sqrt(ratio);
    r.memory_reduction_pct = 100.0 * (1.0 - r.relative_memory);
    r.query_cost_reduction_pct = 100.0 * (1.0 - r.relative_query_cost);
  }
}

}  // namespace

ComplexityReport complexity_report(const LayerGraph& graph,
                                   std::int64_t reference_dim) {
  if (graph.embedding_dim < 0 || reference_dim < 0) {
    throw ShapeMismatch("dimensions must be non-negative");
  }
  ComplexityReport r;
  for (const auto& l : graph.layers) {
    LayerCost c = layer_cost(l);
    r.params += c.params;
    r.macs += c.macs;
    r.flops += c.flops;
    r.bias_adds += c.bias_adds;
    r.layers.push_back(std::move(c));
  }
  r.embedding_dim = graph.embedding_dim;
  r.reference_dim = reference_dim;
  set_ratios(r);
  return r;
}

ComplexityReport operator+(const ComplexityReport& a,
                           const ComplexityReport& b) {
  ComplexityReport r = a;
  r.params += b.params;
  r.macs += b.macs;
  r.flops += b.flops;
  r.bias_adds += b.bias_adds;
  r.layers.insert(r.layers.end(), b.layers.begin(), b.layers.end());
  return r;
}

LayerGraph describe_model_graph(const NetConfig& net, const BevGridSpec& grid,
                                const CameraIntrinsics& intr) {
  net.validate();
  LayerGraph g;
  g.embedding_dim = net.embedding_dim;
  auto add = [&](std::string name, LayerKind kind, std::int64_t cin,
                 std::int64_t cout, std::int64_t h, std::int64_t w,
                 std::int64_t k, std::int64_t s, std::int64_t pad, bool bias) {
    g.layers.push_back({std::move(name), kind, cin, cout, h, w, k, s, pad, bias});
    return g.layers.back();
  };
  const std::int64_t in = net.input_size;
  const std::int64_t bc = net.backbone_channels;
  const std::int64_t fc = net.fpn_channels;

  // POV branch: backbone.
  auto l = add("backbone.stem", LayerKind::kConv, 3, bc, in, in, kBackboneKernel,
               2, kBackboneKernel / 2, true);
  l = add("backbone.pool", LayerKind::kPool, bc, bc, l.out_h(), l.out_w(), 2, 2,
          0, false);
  std::vector<std::int64_t> extent{l.out_h()};  // fine to coarse
  for (int s = 1; s < net.pyramid_levels; ++s) {
    l = add("backbone.stage" + std::to_string(s), LayerKind::kConv, bc, bc,
            extent.back(), extent.back(), kBackboneKernel, 2,
            kBackboneKernel / 2, true);
    extent.push_back(l.out_h());
  }
  // FPN, coarse to fine.
  const int n = net.pyramid_levels;
  for (int i = 0; i < n; ++i) {
    const std::int64_t e = extent[n - 1 - i];
    add("fpn.lateral" + std::to_string(i), LayerKind::kConv, bc, fc, e, e, 1, 1,
        0, true);
    if (i > 0) {
      add("fpn.fuse" + std::to_string(i), LayerKind::kConv, 2 * fc, fc, e, e, 1,
          1, 0, true);
    }
  }
  const auto part = build_depth_partition(intr, grid, n);
  for (int i = 0; i < n; ++i) {
    const std::int64_t e = extent[n - 1 - i];
    // The same (C*D) x (Cin*H) map is applied to each of the e columns,
    // which is a 1 x e convolution over the flattened column features.
    add("msd.collapse" + std::to_string(i), LayerKind::kConv, fc * e,
        static_cast<std::int64_t>(grid.channels) * part.levels[i].rows(), 1, e,
        1, 1, 0, false);
  }
  // psi.
  std::int64_t c = grid.channels, h = grid.cells_z, w = grid.cells_x;
  for (std::size_t s = 0; s < net.psi_channels.size(); ++s) {
    const std::string p = "psi.stage" + std::to_string(s);
    l = add(p, LayerKind::kConv, c, net.psi_channels[s], h, w, kPsiKernel,
            net.psi_strides[s], kPsiKernel / 2, true);
    c = net.psi_channels[s];
    h = l.out_h();
    w = l.out_w();
    add(p + ".bn", LayerKind::kBatchNorm, c, c, h, w, 1, 1, 0, false);
  }
  add("head.pov.pool", LayerKind::kPool, c, c, h, w, h, h, 0, false);
  add("head.pov.bn", LayerKind::kBatchNorm, c, c, 1, 1, 1, 1, 0, false);
  add("head.pov.fc", LayerKind::kFc, c, net.embedding_dim, 1, 1, 1, 1, 0, true);

  // Aerial branch: U-Net encoder and decoder.
  std::int64_t ac = 3, ae = in;
  std::vector<std::int64_t> enc_c;
  for (int k = 0; k <= net.unet_depth(); ++k) {
    l = add("unet.enc" + std::to_string(k), LayerKind::kConv, ac,
            net.unet_channels[k], ae, ae, kUnetKernel, k == 0 ? 1 : 2,
            kUnetKernel / 2, true);
    ac = net.unet_channels[k];
    ae = l.out_h();
    enc_c.push_back(ac);
  }
  const std::int64_t latent_c = ac, latent_e = ae;
  std::int64_t dc = ac, de = ae;
  for (int i = 1; i <= net.unet_depth(); ++i) {
    l = add("unet.dec" + std::to_string(i), LayerKind::kDeconv, dc,
            net.unet_decoder_channels[i - 1], de, de, 2, 2, 0, false);
    dc = enc_c[net.unet_depth() - i] + net.unet_decoder_channels[i - 1];
    de = l.out_h();
  }
  add("head.aer.pool", LayerKind::kPool, latent_c, latent_c, latent_e, latent_e,
      latent_e, latent_e, 0, false);
  add("head.aer.reduce", LayerKind::kFc, latent_c, net.embedding_dim, 1, 1, 1,
      1, 0, true);
  add("head.aer.bn", LayerKind::kBatchNorm, net.embedding_dim,
      net.embedding_dim, 1, 1, 1, 1, 0, false);
  add("head.aer.fc", LayerKind::kFc, net.embedding_dim, net.embedding_dim, 1, 1,
      1, 1, 0, true);
  return g;
}

std::string complexity_report_text(const ComplexityReport& r) {
  std::string out =
      "# FLOPs = 2 x multiply-accumulates (conv, deconv, fc) + 2 per batch-norm "
      "element; bias adds listed separately\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %8s %14s %16s %12s\n", "layer", "kind",
                "params", "flops", "bias_adds");
  out += buf;
  for (const auto& c : r.layers) {
    std::snprintf(buf, sizeof buf, "%-20s %8s %14lld %16lld %12lld\n",
                  c.name.c_str(), layer_kind_name(c.kind), static_cast<long long>(c.params),
                  static_cast<long long>(c.flops),
                  static_cast<long long>(c.bias_adds));
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "total params         %lld\n"
                "total flops          %lld\n"
                "total bias adds      %lld\n"
                "embedding dim        %lld (reference %lld)\n"
                "memory reduction     %.2f%%\n"
                "query-cost reduction %.2f%%  (O(sqrt(D) + k) model)\n",
                static_cast<long long>(r.params),
                static_cast<long long>(r.flops),
                static_cast<long long>(r.bias_adds),
                static_cast<long long>(r.embedding_dim),
                static_cast<long long>(r.reference_dim), r.memory_reduction_pct,
                r.query_cost_reduction_pct);
  out += buf;
  return out;
}

std::string complexity_report_csv(const ComplexityReport& r) {
  std::string out = "layer,kind,params,macs,flops,bias_adds\n";
  char buf[256];
  for (const auto& c : r.layers) {
    std::snprintf(buf, sizeof buf, "%s,%s,%lld,%lld,%lld,%lld\n",
                  c.name.c_str(), layer_kind_name(c.kind),
                  static_cast<long long>(c.params),
                  static_cast<long long>(c.macs),
                  static_cast<long long>(c.flops),
                  static_cast<long long>(c.bias_adds));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "total,,%lld,%lld,%lld,%lld\n",
                static_cast<long long>(r.params), static_cast<long long>(r.macs),
                static_cast<long long>(r.flops),
                static_cast<long long>(r.bias_adds));
  out += buf;
  return out;
}

}  // namespace bevcv
