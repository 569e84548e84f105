#include "bevcv/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "bevcv/error.hpp"

namespace bevcv {

EmbeddingSet random_unit_set(std::size_t n, std::size_t dim, Rng& rng) {
  EmbeddingSet s;
  s.dim = dim;
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    std::vector<double> g(dim);
    for (auto& v : g) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<float>(g[d] / norm);
    s.append(i, row);
  }
  return s;
}

LatencySummary summarize_latencies(std::vector<double> micros) {
  LatencySummary s;
  if (micros.empty()) return s;
  std::sort(micros.begin(), micros.end());
  const std::size_t n = micros.size();
  s.median_us = n % 2 ? micros[n / 2] : 0.5 * (micros[n / 2 - 1] + micros[n / 2]);
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  s.p95_us = micros[std::clamp<std::size_t>(rank, 1, n) - 1];
  return s;
}

BenchmarkRow benchmark_queries(const EmbeddingIndex& index,
                               const EmbeddingSet& queries, std::size_t k) {
  using clock = std::chrono::steady_clock;
  if (queries.size() && queries.dim != index.dim() && index.size()) {
    throw DimensionMismatch("query dim " + std::to_string(queries.dim) +
                            " vs index dim " + std::to_string(index.dim()));
  }
  BenchmarkRow row;
  row.dim = index.dim();
  row.index_size = index.size();
  row.queries = queries.size();
  row.k = k;
  if (queries.size() == 0) return row;
  (void)index.query(queries.row(0), k);
  (void)brute_force_topk(index.embeddings(), queries.row(0), k);

  std::vector<double> tree_us, brute_us;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto t0 = clock::now();
    const auto a = index.query(queries.row(q), k);
    auto t1 = clock::now();
    const auto b = brute_force_topk(index.embeddings(), queries.row(q), k);
    auto t2 = clock::now();
    tree_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    brute_us.push_back(std::chrono::duration<double, std::micro>(t2 - t1).count());
    if (a.size() != b.size()) {
      row.identical = false;
    } else {
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].id != b[i].id) row.identical = false;
      }
    }
  }
  row.kdtree = summarize_latencies(std::move(tree_us));
  row.brute_force = summarize_latencies(std::move(brute_us));
  return row;
}

std::string benchmark_csv_header() {
  return "dim,index_size,queries,k,kdtree_median_us,kdtree_p95_us,"
         "brute_median_us,brute_p95_us,identical";
}

std::string benchmark_csv_row(const BenchmarkRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.3f,%.3f,%.3f,%.3f,%d",
                r.dim, r.index_size, r.queries, r.k, r.kdtree.median_us,
                r.kdtree.p95_us, r.brute_force.median_us, r.brute_force.p95_us,
                r.identical ? 1 : 0);
  return buf;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("fit_line needs two or more paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  if (sxx == 0.0) throw InvalidArgument("fit_line: x values are all equal");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

}  // namespace bevcv
