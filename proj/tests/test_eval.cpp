#include <gtest/gtest.h>

#include <cmath>

#include "bevcv/benchmark.hpp"
#include "bevcv/complexity.hpp"
#include "bevcv/config.hpp"
#include "bevcv/error.hpp"
#include "bevcv/eval.hpp"

using namespace bevcv;

namespace {

// A result list with `truth` placed at 1-based rank `rank` (0: absent).
RetrievalResult ranked(std::uint64_t truth, std::size_t rank, std::size_t len = 20) {
  RetrievalResult r;
  for (std::size_t i = 1; i <= len; ++i)
    r.push_back({i == rank ? truth : 1000 + i, 1.0 - 0.01 * double(i)});
  return r;
}

}  // namespace

TEST(Recall, RanksTwoAndEleven) {
  const std::vector<RetrievalResult> rs{ranked(1, 2), ranked(2, 11)};
  const std::vector<std::uint64_t> truth{1, 2};
  EXPECT_EQ(recall_at_k(rs, truth, 1), 0.0);
  EXPECT_EQ(recall_at_k(rs, truth, 5), 50.0);
  EXPECT_EQ(recall_at_k(rs, truth, 10), 50.0);
  EXPECT_EQ(recall_at_k(rs, truth, 11), 100.0);
}

TEST(Recall, MonotoneInK) {
  std::vector<RetrievalResult> rs;
  std::vector<std::uint64_t> truth;
  for (std::size_t i = 0; i < 30; ++i) {
    rs.push_back(ranked(i, i % 21));
    truth.push_back(i);
  }
  double prev = 0;
  for (std::size_t k = 1; k <= 25; ++k) {
    const double r = recall_at_k(rs, truth, k);
    EXPECT_GE(r, prev);
    EXPECT_LE(r, 100.0);
    prev = r;
  }
}

TEST(Recall, MissingTruth) {
  const std::vector<RetrievalResult> rs{ranked(1, 1), ranked(2, 1)};
  const std::vector<std::uint64_t> truth{1};
  EXPECT_THROW(recall_at_k(rs, truth, 1), MissingTruth);
}

TEST(Recall, TopPercentK) {
  EXPECT_EQ(top_percent_k(8884, 1.0), 88u);
  EXPECT_EQ(top_percent_k(50, 1.0), 1u);
  EXPECT_EQ(top_percent_k(100, 1.0), 1u);
  EXPECT_EQ(top_percent_k(250, 1.0), 2u);
  EXPECT_THROW(top_percent_k(0, 1.0), InvalidArgument);
  EXPECT_EQ(report_depth(8884), 88u);
  EXPECT_EQ(report_depth(50), 10u);
}

TEST(Recall, ReportAndCsv) {
  const std::vector<RetrievalResult> rs{ranked(1, 1), ranked(2, 3), ranked(3, 0)};
  const std::vector<std::uint64_t> truth{1, 2, 3};
  const auto r = make_recall_report(rs, truth, 300);
  EXPECT_EQ(r.queries, 3u);
  EXPECT_EQ(r.top_percent_k, 3u);
  EXPECT_NEAR(r.r1, 100.0 / 3, 1e-12);
  EXPECT_NEAR(r.r5, 200.0 / 3, 1e-12);
  EXPECT_NEAR(r.r1pct, 200.0 / 3, 1e-12);
  EXPECT_EQ(recall_report_csv_header(), "queries,index_size,top1pct_k,r@1,r@5,r@10,r@1%");
}

TEST(Recall, EvaluateRetrievalThreeItems) {
  EmbeddingSet g;
  g.dim = 3;
  g.append(7, std::vector<float>{1, 0, 0});
  g.append(8, std::vector<float>{0, 1, 0});
  g.append(9, std::vector<float>{0, 0, 1});
  const auto idx = EmbeddingIndex::build(g);
  const std::vector<std::uint64_t> truth{7, 8, 9};
  for (int jobs : {1, 3}) {
    const auto r = evaluate_retrieval(idx, g, truth, jobs);
    EXPECT_EQ(r.r1, 100.0);
    EXPECT_EQ(r.index_size, 3u);
  }
}

TEST(OffsetSweep, ZeroOffsetMatchesDirectEvaluation) {
  Rng rng(1);
  const auto g = random_unit_set(50, 8, rng);
  const auto idx = EmbeddingIndex::build(g);
  const std::vector<std::uint64_t> truth = g.ids;
  // Queries drift away from the gallery as the offset grows.
  const QueryEmbedder embed = [&](std::size_t i, double off) {
    std::vector<float> v(g.row(i).begin(), g.row(i).end());
    v[0] += static_cast<float>(off / 10.0);
    double n = 0;
    for (float x : v) n += double(x) * x;
    for (float& x : v) x = static_cast<float>(x / std::sqrt(n));
    return v;
  };
  const std::vector<double> offsets{0, 5, 10, 20};
  const auto rows = offset_sweep(embed, g.size(), idx, truth, offsets, 3);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].report, evaluate_retrieval(idx, g, truth));
  EXPECT_EQ(rows[0].report.r1, 100.0);
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_LE(rows[i].report.r1, rows[i - 1].report.r1);
  const std::vector<double> zero{0};
  EXPECT_EQ(offset_sweep(embed, g.size(), idx, truth, zero, 3).size(), 1u);
  EXPECT_EQ(offset_sweep_csv(rows).substr(0, 28), "offset_deg,r@1,r@5,r@10,r@1%");
}

TEST(OffsetSweep, SignsFixedBySeed) {
  const auto a = offset_signs(100, 4), b = offset_signs(100, 4), c = offset_signs(100, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  int pos = 0;
  for (int s : a) {
    ASSERT_TRUE(s == 1 || s == -1);
    pos += s > 0;
  }
  EXPECT_GT(pos, 20);
  EXPECT_LT(pos, 80);
}

TEST(Complexity, FullyConnectedExample) {
  LayerSpec fc{.name = "fc", .kind = LayerKind::kFc, .in_channels = 512, .out_channels = 512};
  const auto c = layer_cost(fc);
  EXPECT_EQ(c.params, 262656);
  EXPECT_EQ(c.macs, 262144);
  EXPECT_EQ(c.flops, 524288);
  EXPECT_EQ(c.bias_adds, 512);
}

TEST(Complexity, ConvDeconvBatchNormPool) {
  // 3x3 conv, 4 -> 8 channels, 10x10 -> 5x5 with stride 2, pad 1.
  LayerSpec conv{.name = "c", .kind = LayerKind::kConv, .in_channels = 4, .out_channels = 8,
                 .in_h = 10, .in_w = 10, .kernel = 3, .stride = 2, .pad = 1};
  auto c = layer_cost(conv);
  EXPECT_EQ(conv.out_h(), 5);
  EXPECT_EQ(c.params, 4 * 8 * 9 + 8);
  EXPECT_EQ(c.macs, 25 * 8 * 4 * 9);
  EXPECT_EQ(c.bias_adds, 25 * 8);
  LayerSpec de{.name = "d", .kind = LayerKind::kDeconv, .in_channels = 6, .out_channels = 3,
               .in_h = 4, .in_w = 5, .kernel = 2, .stride = 2, .bias = false};
  c = layer_cost(de);
  EXPECT_EQ(de.out_h(), 8);
  EXPECT_EQ(de.out_w(), 10);
  EXPECT_EQ(c.macs, 6 * 20 * 3 * 4);
  EXPECT_EQ(c.bias_adds, 0);
  LayerSpec bn{.name = "b", .kind = LayerKind::kBatchNorm, .in_channels = 16, .in_h = 3, .in_w = 3};
  c = layer_cost(bn);
  EXPECT_EQ(c.params, 32);
  EXPECT_EQ(c.flops, 2 * 16 * 9);
  LayerSpec pool{.name = "p", .kind = LayerKind::kPool, .in_channels = 16, .in_h = 3, .in_w = 3};
  c = layer_cost(pool);
  EXPECT_EQ(c.params + c.flops + c.macs, 0);
  LayerSpec bad = conv;
  bad.in_h = 0;
  EXPECT_THROW(layer_cost(bad), ShapeMismatch);
}

TEST(Complexity, EmptyGraphAndAdditivity) {
  LayerGraph empty;
  empty.embedding_dim = 512;
  const auto z = complexity_report(empty, 768);
  EXPECT_EQ(z.params + z.macs + z.flops + z.bias_adds, 0);

  LayerGraph a, b, ab;
  a.embedding_dim = b.embedding_dim = ab.embedding_dim = 512;
  a.layers.push_back({.name = "fc1", .kind = LayerKind::kFc, .in_channels = 8, .out_channels = 4});
  b.layers.push_back({.name = "c", .kind = LayerKind::kConv, .in_channels = 2, .out_channels = 3,
                      .in_h = 6, .in_w = 6, .kernel = 3, .pad = 1});
  ab.layers = {a.layers[0], b.layers[0]};
  const auto sum = complexity_report(a, 768) + complexity_report(b, 768);
  const auto whole = complexity_report(ab, 768);
  EXPECT_EQ(sum.params, whole.params);
  EXPECT_EQ(sum.flops, whole.flops);
  EXPECT_EQ(sum.bias_adds, whole.bias_adds);
  EXPECT_EQ(sum.layers.size(), 2u);
}

TEST(Complexity, DefaultModelReductions) {
  const RunConfig cfg = default_config();
  const auto r = complexity_report(
      describe_model_graph(cfg.net, cfg.grid, cfg.intrinsics), 768);
  EXPECT_NEAR(r.memory_reduction_pct, 33.33, 0.005);
  EXPECT_NEAR(r.query_cost_reduction_pct, 18.35, 0.005);
  std::int64_t params = 0, flops = 0;
  for (const auto& l : r.layers) {
    params += l.params;
    flops += l.flops;
    if (l.kind != LayerKind::kBatchNorm) {
      EXPECT_EQ(l.flops, 2 * l.macs) << l.name;
    }
  }
  EXPECT_EQ(params, r.params);
  EXPECT_EQ(flops, r.flops);
  EXPECT_NE(complexity_report_text(r).find("FLOPs = 2 x multiply-accumulates"),
            std::string::npos);
  EXPECT_EQ(complexity_report_csv(r).substr(0, 38), "layer,kind,params,macs,flops,bias_adds");
}

TEST(Benchmark, IdenticalResultsAndLinearFit) {
  Rng rng(2);
  const auto idx = EmbeddingIndex::build(random_unit_set(300, 16, rng));
  const auto row = benchmark_queries(idx, random_unit_set(20, 16, rng), 10);
  EXPECT_TRUE(row.identical);
  EXPECT_GT(row.brute_force.median_us, 0.0);
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  const auto s = summarize_latencies({5, 1, 3, 2, 4});
  EXPECT_EQ(s.median_us, 3.0);
  EXPECT_EQ(s.p95_us, 5.0);
}

// Brute-force latency grows linearly with gallery size.
TEST(Benchmark, BruteForceScalesLinearly) {
  Rng rng(3);
  std::vector<double> sizes, micros;
  for (std::size_t n : {2000, 4000, 8000, 16000}) {
    const auto set = random_unit_set(n, 128, rng);
    const auto qs = random_unit_set(30, 128, rng);
    const auto idx = EmbeddingIndex::build(set);
    const auto row = benchmark_queries(idx, qs, 10);
    sizes.push_back(double(n));
    micros.push_back(row.brute_force.median_us);
  }
  EXPECT_GT(fit_line(sizes, micros).r2, 0.9);
}
