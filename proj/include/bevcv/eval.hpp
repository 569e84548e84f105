#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bevcv/index.hpp"

namespace bevcv {

// Percentage of queries whose truth id is among the first k retrievals.
// Throws MissingTruth unless there is exactly one truth id per query.
double recall_at_k(std::span<const RetrievalResult> retrievals,
                   std::span<const std::uint64_t> truth, std::size_t k);

// K for "top pct%" of an n-item gallery: max(1, floor(n * pct / 100)).
std::size_t top_percent_k(std::size_t n, double pct);

struct RecallReport {
  std::size_t queries = 0;
  std::size_t index_size = 0;
  std::size_t top_percent_k = 0;  // K used for R@1%
  double r1 = 0.0, r5 = 0.0, r10 = 0.0, r1pct = 0.0;

  bool operator==(const RecallReport&) const = default;
};

// Retrieval depth needed for a full report on an n-item gallery.
std::size_t report_depth(std::size_t index_size);

RecallReport make_recall_report(std::span<const RetrievalResult> retrievals,
                                std::span<const std::uint64_t> truth,
                                std::size_t index_size);

// Queries every row of `queries` against the index. R@1% uses the gallery
// (index) size.
RecallReport evaluate_retrieval(const EmbeddingIndex& index,
                                const EmbeddingSet& queries,
                                std::span<const std::uint64_t> truth,
                                int jobs = 1);

std::string recall_report_csv_header();
std::string recall_report_csv_row(const RecallReport& r);
std::string format_recall_report(const RecallReport& r);

// Returns the query embedding of dataset item `item` with `yaw_offset_deg`
// added to its heading before cropping.
using QueryEmbedder =
    std::function<std::vector<float>(std::size_t item, double yaw_offset_deg)>;

struct OffsetRow {
  double offset_deg = 0.0;
  RecallReport report;
};

// For each offset d, item i is re-embedded at yaw + s_i * d where the signs
// s_i = +-1 come from `seed` (the same signs for every offset) and evaluated
// against the fixed gallery. truth[i] is item i's gallery id.
std::vector<OffsetRow> offset_sweep(const QueryEmbedder& embed,
                                    std::size_t items,
                                    const EmbeddingIndex& gallery,
                                    std::span<const std::uint64_t> truth,
                                    std::span<const double> offsets,
                                    std::uint64_t seed, int jobs = 1);

std::vector<int> offset_signs(std::size_t items, std::uint64_t seed);

std::string offset_sweep_csv(std::span<const OffsetRow> rows);

}  // namespace bevcv
