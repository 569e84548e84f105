#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bevcv {

// Row-major float32 embeddings with one 64-bit id per row.
struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<std::uint64_t> ids;
  std::vector<float> values;

  std::size_t size() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  void append(std::uint64_t id, std::span<const float> v);
  // Throws DimensionMismatch unless values.size() == size() * dim.
  void validate() const;

  bool operator==(const EmbeddingSet&) const = default;
};

struct Neighbor {
  std::uint64_t id = 0;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Descending similarity, ties broken by ascending id.
using RetrievalResult = std::vector<Neighbor>;

inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
  return a.similarity > b.similarity ||
         (a.similarity == b.similarity && a.id < b.id);
}

// Dot product accumulated in double; the single similarity definition used by
// both search paths so their rankings agree bit for bit.
double dot_similarity(std::span<const float> a, std::span<const float> b);

struct IndexOptions {
  std::size_t leaf_size = 16;
  bool normalize = false;  // L2-normalise rows on build instead of checking
  double norm_tolerance = 1e-5;
};

// Immutable KD-tree over unit-norm embeddings answering exact top-k cosine
// queries. Branch-and-bound uses |q - v|^2 = |q|^2 + |v|^2 - 2 q.v, so the
// Euclidean lower bound of a cell caps the similarity anything inside it can
// reach.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  // Median split on the dimension of largest spread, down to leaf_size.
  // Throws DuplicateId, DimensionMismatch, or InvalidArgument for rows that
  // are not unit norm (unless options.normalize).
  static EmbeddingIndex build(EmbeddingSet set, const IndexOptions& options = {});

  RetrievalResult query(std::span<const float> q, std::size_t k) const;

  std::size_t size() const { return set_.size(); }
  std::size_t dim() const { return set_.dim; }
  const EmbeddingSet& embeddings() const { return set_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  std::size_t depth() const;

  // Every stored row is reachable from exactly one leaf.
  bool check_structure() const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range into order_
    std::int32_t left = -1, right = -1;
    std::uint32_t split_dim = 0;
    float split_value = 0.0f;
    bool leaf() const { return left < 0; }
  };

  std::int32_t build_node(std::uint32_t begin, std::uint32_t end,
                          std::size_t leaf_size);

  EmbeddingSet set_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  double max_norm_sq_ = 0.0;
};

RetrievalResult query_topk(const EmbeddingIndex& index,
                           std::span<const float> q, std::size_t k);

// Full scan with the same ranking rule.
RetrievalResult brute_force_topk(const EmbeddingSet& set,
                                 std::span<const float> q, std::size_t k);

}  // namespace bevcv
