#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bevcv/index.hpp"
#include "bevcv/random.hpp"

namespace bevcv {

// `n` Gaussian rows normalised to unit length, ids 0..n-1.
EmbeddingSet random_unit_set(std::size_t n, std::size_t dim, Rng& rng);

struct LatencySummary {
  double median_us = 0.0;
  double p95_us = 0.0;
};

LatencySummary summarize_latencies(std::vector<double> micros);

struct BenchmarkRow {
  std::size_t dim = 0;
  std::size_t index_size = 0;
  std::size_t queries = 0;
  std::size_t k = 0;
  LatencySummary kdtree;
  LatencySummary brute_force;
  // KD-tree and brute force returned the same id lists for every query.
  bool identical = true;
};

// Times every query once per method (after one untimed warm-up query) and
// cross-checks the results.
BenchmarkRow benchmark_queries(const EmbeddingIndex& index,
                               const EmbeddingSet& queries, std::size_t k);

std::string benchmark_csv_header();
std::string benchmark_csv_row(const BenchmarkRow& r);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares y = slope * x + intercept.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace bevcv
