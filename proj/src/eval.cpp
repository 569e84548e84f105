#include "bevcv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bevcv/error.hpp"
#include "bevcv/parallel.hpp"
#include "bevcv/random.hpp"

namespace bevcv {

double recall_at_k(std::span<const RetrievalResult> retrievals,
                   std::span<const std::uint64_t> truth, std::size_t k) {
  if (retrievals.size() != truth.size()) {
    throw MissingTruth(std::to_string(truth.size()) + " truth ids for " +
                       std::to_string(retrievals.size()) + " queries");
  }
  if (retrievals.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < retrievals.size(); ++q) {
    const auto& r = retrievals[q];
    const std::size_t depth = std::min(k, r.size());
    if (std::any_of(r.begin(), r.begin() + depth,
                    [&](const Neighbor& n) { return n.id == truth[q]; })) {
      ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(retrievals.size());
}

std::size_t top_percent_k(std::size_t n, double pct) {
  if (n < 1) throw InvalidArgument("top-percent K needs a non-empty gallery");
  // The epsilon keeps exact products such as 100 * 1 / 100 from flooring
  // down through rounding.
  const double k = std::floor(static_cast<double>(n) * pct / 100.0 + 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::max(k, 0.0)));
}

std::size_t report_depth(std::size_t index_size) {
  if (index_size == 0) return 10;
  return std::max<std::size_t>(10, top_percent_k(index_size, 1.0));
}

RecallReport make_recall_report(std::span<const RetrievalResult> retrievals,
                                std::span<const std::uint64_t> truth,
                                std::size_t index_size) {
  RecallReport r;
  r.queries = retrievals.size();
  r.index_size = index_size;
  r.top_percent_k = index_size ? top_percent_k(index_size, 1.0) : 0;
  r.r1 = recall_at_k(retrievals, truth, 1);
  r.r5 = recall_at_k(retrievals, truth, 5);
  r.r10 = recall_at_k(retrievals, truth, 10);
  r.r1pct = recall_at_k(retrievals, truth, r.top_percent_k);
  return r;
}

RecallReport evaluate_retrieval(const EmbeddingIndex& index,
                                const EmbeddingSet& queries,
                                std::span<const std::uint64_t> truth,
                                int jobs) {
  queries.validate();
  if (truth.size() != queries.size()) {
    throw MissingTruth(std::to_string(truth.size()) + " truth ids for " +
                       std::to_string(queries.size()) + " queries");
  }
  const std::size_t depth = report_depth(index.size());
  std::vector<RetrievalResult> results(queries.size());
  parallel_for(queries.size(), jobs, [&](std::size_t q) {
    results[q] = index.query(queries.row(q), depth);
  });
  return make_recall_report(results, truth, index.size());
}

std::string recall_report_csv_header() {
  return "queries,index_size,top1pct_k,r@1,r@5,r@10,r@1%";
}

std::string recall_report_csv_row(const RecallReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.2f,%.2f,%.2f,%.2f", r.queries,
                r.index_size, r.top_percent_k, r.r1, r.r5, r.r10, r.r1pct);
  return buf;
}

std::string format_recall_report(const RecallReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "queries     %zu\n"
                "index size  %zu\n"
                "R@1         %6.2f\n"
                "R@5         %6.2f\n"
                "R@10        %6.2f\n"
                "R@1%%        %6.2f  (K=%zu)\n",
                r.queries, r.index_size, r.r1, r.r5, r.r10, r.r1pct,
                r.top_percent_k);
  return buf;
}

std::vector<int> offset_signs(std::size_t items, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> s(items);
  for (auto& v : s) v = (rng.next_u64() >> 63) ? 1 : -1;
  return s;
}

std::vector<OffsetRow> offset_sweep(const QueryEmbedder& embed,
                                    std::size_t items,
                                    const EmbeddingIndex& gallery,
                                    std::span<const std::uint64_t> truth,
                                    std::span<const double> offsets,
                                    std::uint64_t seed, int jobs) {
  if (truth.size() != items) {
    throw MissingTruth(std::to_string(truth.size()) + " truth ids for " +
                       std::to_string(items) + " items");
  }
  const auto signs = offset_signs(items, seed);
  const std::size_t depth = report_depth(gallery.size());
  std::vector<OffsetRow> rows;
  for (double off : offsets) {
    std::vector<RetrievalResult> results(items);
    parallel_for(items, jobs, [&](std::size_t i) {
      const double applied = off == 0.0 ? 0.0 : signs[i] * off;
      results[i] = gallery.query(embed(i, applied), depth);
    });
    rows.push_back({off, make_recall_report(results, truth, gallery.size())});
  }
  return rows;
}

std::string offset_sweep_csv(std::span<const OffsetRow> rows) {
  std::string out = "offset_deg,r@1,r@5,r@10,r@1%\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,%.2f,%.2f,%.2f,%.2f\n", r.offset_deg,
                  r.report.r1, r.report.r5, r.report.r10, r.report.r1pct);
    out += buf;
  }
  return out;
}

}  // namespace bevcv
