#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevcv/geometry.hpp"
#include "bevcv/net.hpp"

namespace bevcv {

enum class LayerKind { kConv, kDeconv, kFc, kBatchNorm, kPool };

const char* layer_kind_name(LayerKind k);

// One layer of a feed-forward graph, described by its input shape and
// hyper-parameters; output extents are derived. For kFc the spatial fields
// are ignored and in/out_channels are the feature counts; kBatchNorm and
// kPool keep the channel count (out_channels is ignored).
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t in_h = 1, in_w = 1;
  std::int64_t kernel = 1;
  std::int64_t stride = 1;
  std::int64_t pad = 0;
  bool bias = true;

  std::int64_t out_h() const;
  std::int64_t out_w() const;
};

struct LayerGraph {
  std::vector<LayerSpec> layers;
  std::int64_t embedding_dim = 0;
};

// FLOPs are 2 x multiply-accumulates of conv, deconv and FC layers. Bias
// additions are tallied separately in bias_adds and are not part of flops;
// batch-norm contributes 2 per element (scale, shift) and pooling none.
struct LayerCost {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t flops = 0;
  std::int64_t bias_adds = 0;
};

struct ComplexityReport {
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t flops = 0;
  std::int64_t bias_adds = 0;
  std::vector<LayerCost> layers;
  std::int64_t embedding_dim = 0;
  std::int64_t reference_dim = 0;
  // Descriptor memory scales with D; the query cost model is O(sqrt(D) + k),
  // so its relative cost is sqrt(D / D_ref).
  double relative_memory = 0.0;
  double relative_query_cost = 0.0;
  double memory_reduction_pct = 0.0;
  double query_cost_reduction_pct = 0.0;
};

LayerCost layer_cost(const LayerSpec& layer);

// Throws ShapeMismatch for layers with non-positive extents or counts.
ComplexityReport complexity_report(const LayerGraph& graph,
                                   std::int64_t reference_dim);

// Sums the counts of two reports (layers concatenated); the dimensional
// ratios are those of `a`.
ComplexityReport operator+(const ComplexityReport& a, const ComplexityReport& b);

// Layer graph of the full two-branch model for the given configuration.
LayerGraph describe_model_graph(const NetConfig& net, const BevGridSpec& grid,
                                const CameraIntrinsics& intr);

std::string complexity_report_text(const ComplexityReport& r);
std::string complexity_report_csv(const ComplexityReport& r);

}  // namespace bevcv
