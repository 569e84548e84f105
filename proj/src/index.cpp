#include "bevcv/index.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "bevcv/error.hpp"

namespace bevcv {

void EmbeddingSet::append(std::uint64_t id, std::span<const float> v) {
  if (v.size() != dim) {
    throw DimensionMismatch("row of length " + std::to_string(v.size()) +
                            " for a " + std::to_string(dim) + "-dim set");
  }
  ids.push_back(id);
  values.insert(values.end(), v.begin(), v.end());
}

void EmbeddingSet::validate() const {
  if (values.size() != ids.size() * dim) {
    throw DimensionMismatch(std::to_string(values.size()) + " values for " +
                            std::to_string(ids.size()) + " rows of dim " +
                            std::to_string(dim));
  }
}

double dot_similarity(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * b[i];
  }
  return s;
}

EmbeddingIndex EmbeddingIndex::build(EmbeddingSet set,
                                     const IndexOptions& options) {
  set.validate();
  if (set.size() > 0 && set.dim == 0) {
    throw DimensionMismatch("zero-dimensional embeddings");
  }
  if (set.size() > UINT32_MAX) throw InvalidArgument("index too large");
  std::unordered_set<std::uint64_t> seen;
  for (auto id : set.ids) {
    if (!seen.insert(id).second) {
      throw DuplicateId("id " + std::to_string(id) + " appears twice");
    }
  }

  EmbeddingIndex idx;
  for (std::size_t i = 0; i < set.size(); ++i) {
    float* row = set.values.data() + i * set.dim;
    const std::span<const float> r(row, set.dim);
    double n2 = dot_similarity(r, r);
    if (options.normalize) {
      if (n2 == 0.0) {
        throw InvalidArgument("cannot normalise zero row (id " +
                              std::to_string(set.ids[i]) + ")");
      }
      const double inv = 1.0 / std::sqrt(n2);
      for (std::size_t d = 0; d < set.dim; ++d) {
        row[d] = static_cast<float>(row[d] * inv);
      }
      n2 = dot_similarity(r, r);
    } else if (std::abs(std::sqrt(n2) - 1.0) > options.norm_tolerance) {
      throw InvalidArgument("row id " + std::to_string(set.ids[i]) +
                            " is not unit norm (|v| = " +
                            std::to_string(std::sqrt(n2)) + ")");
    }
    idx.max_norm_sq_ = std::max(idx.max_norm_sq_, n2);
  }
  idx.set_ = std::move(set);
  idx.order_.resize(idx.set_.size());
  for (std::uint32_t i = 0; i < idx.order_.size(); ++i) idx.order_[i] = i;
  if (!idx.order_.empty()) {
    idx.build_node(0, static_cast<std::uint32_t>(idx.order_.size()),
                   std::max<std::size_t>(options.leaf_size, 1));
  }
  return idx;
}

std::int32_t EmbeddingIndex::build_node(std::uint32_t begin, std::uint32_t end,
                                        std::size_t leaf_size) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, 0, 0.0f});
  if (end - begin <= leaf_size) return id;

  const std::size_t D = set_.dim;
  std::uint32_t best_dim = 0;
  float best_spread = 0.0f;
  for (std::size_t d = 0; d < D; ++d) {
    float lo = set_.values[order_[begin] * D + d], hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      const float v = set_.values[order_[i] * D + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = static_cast<std::uint32_t>(d);
    }
  }
  if (best_spread == 0.0f) return id;  // all rows identical

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto key = [&](std::uint32_t r) { return set_.values[r * D + best_dim]; };
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
                     return key(a) < key(b) || (key(a) == key(b) && a < b);
                   });
  const float split = key(order_[mid]);
  const std::int32_t left = build_node(begin, mid, leaf_size);
  const std::int32_t right = build_node(mid, end, leaf_size);
  Node& n = nodes_[id];
  n.left = left;
  n.right = right;
  n.split_dim = best_dim;
  n.split_value = split;
  return id;
}

std::size_t EmbeddingIndex::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(),
                    [](const Node& n) { return n.leaf(); }));
}

std::size_t EmbeddingIndex::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[n].leaf()) {
      stack.push_back({nodes_[n].left, d + 1});
      stack.push_back({nodes_[n].right, d + 1});
    }
  }
  return best;
}

bool EmbeddingIndex::check_structure() const {
  if (set_.size() == 0) return nodes_.empty();
  std::vector<int> hits(set_.size(), 0);
  for (const Node& n : nodes_) {
    if (!n.leaf()) {
      const Node& l = nodes_[n.left];
      const Node& r = nodes_[n.right];
      if (l.begin != n.begin || l.end != r.begin || r.end != n.end) return false;
      const std::size_t D = set_.dim;
      for (auto i = l.begin; i < l.end; ++i) {
        if (set_.values[order_[i] * D + n.split_dim] > n.split_value) return false;
      }
      for (auto i = r.begin; i < r.end; ++i) {
        if (set_.values[order_[i] * D + n.split_dim] < n.split_value) return false;
      }
      continue;
    }
    for (auto i = n.begin; i < n.end; ++i) ++hits[order_[i]];
  }
  return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

namespace {

// Keeps the k best neighbours; top() is the current worst.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  bool full() const { return heap_.size() >= k_; }
  const Neighbor& worst() const { return heap_.top(); }

  void offer(const Neighbor& n) {
    if (!full()) {
      heap_.push(n);
    } else if (ranks_before(n, heap_.top())) {
      heap_.pop();
      heap_.push(n);
    }
  }

  RetrievalResult take() {
    RetrievalResult out;
    out.reserve(heap_.size());
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Cmp {
    bool operator()(const Neighbor& a, const Neighbor& b) const {
      return ranks_before(a, b);
    }
  };
  std::size_t k_;
  std::priority_queue<Neighbor, std::vector<Neighbor>, Cmp> heap_;
};

// Slack on the pruning bound so rounding never discards a tie.
constexpr double kPruneSlack = 1e-9;

}  // namespace

RetrievalResult EmbeddingIndex::query(std::span<const float> q,
                                      std::size_t k) const {
  if (set_.size() > 0 && q.size() != set_.dim) {
    throw DimensionMismatch("query of dim " + std::to_string(q.size()) +
                            " against a " + std::to_string(set_.dim) +
                            "-dim index");
  }
  if (k == 0 || set_.size() == 0) return {};
  TopK best(std::min(k, set_.size()));
  const double q_norm_sq = dot_similarity(q, q);
  const std::size_t D = set_.dim;
  std::vector<double> offset(D, 0.0);

  // Incremental cell distance (per-dimension offsets to the query).
  auto visit = [&](auto&& self, std::int32_t ni, double cell_dist) -> void {
    const Node& n = nodes_[ni];
    if (best.full()) {
      const double cap = 0.5 * (q_norm_sq + max_norm_sq_ - cell_dist);
      if (cap < best.worst().similarity - kPruneSlack) return;
    }
    if (n.leaf()) {
      for (auto i = n.begin; i < n.end; ++i) {
        const std::uint32_t r = order_[i];
        best.offer({set_.ids[r], dot_similarity(q, set_.row(r))});
      }
      return;
    }
    const double diff = static_cast<double>(q[n.split_dim]) - n.split_value;
    const bool go_left = diff < 0.0;
    self(self, go_left ? n.left : n.right, cell_dist);
    const double old = offset[n.split_dim];
    const double far_dist = cell_dist - old * old + diff * diff;
    offset[n.split_dim] = diff;
    self(self, go_left ? n.right : n.left, far_dist);
    offset[n.split_dim] = old;
  };
  visit(visit, 0, 0.0);
  return best.take();
}

RetrievalResult query_topk(const EmbeddingIndex& index,
                           std::span<const float> q, std::size_t k) {
  return index.query(q, k);
}

RetrievalResult brute_force_topk(const EmbeddingSet& set,
                                 std::span<const float> q, std::size_t k) {
  set.validate();
  if (set.size() > 0 && q.size() != set.dim) {
    throw DimensionMismatch("query of dim " + std::to_string(q.size()) +
                            " against a " + std::to_string(set.dim) +
                            "-dim set");
  }
  if (k == 0 || set.size() == 0) return {};
  TopK best(std::min(k, set.size()));
  for (std::size_t r = 0; r < set.size(); ++r) {
    best.offer({set.ids[r], dot_similarity(q, set.row(r))});
  }
  return best.take();
}

}  // namespace bevcv
