#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oggbn {

struct RatingTriple {
  std::uint32_t user;
  std::uint32_t item;
  std::uint32_t level;  // in {1..V}; level 0 is never stored
};

// Sparse U x I matrix of ordinal levels with both row-major (per-user) and
// column-major (per-item) views over the identical nonzero set. Immutable
// after construction; safe for concurrent reads.
class OrdinalMatrix {
 public:
  OrdinalMatrix() = default;

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::uint32_t max_level() const { return max_level_; }
  std::size_t nnz() const { return row_item_.size(); }

  std::span<const std::uint32_t> row_items(std::size_t u) const {
    return {row_item_.data() + row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]};
  }
  std::span<const std::uint32_t> row_levels(std::size_t u) const {
    return {row_level_.data() + row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]};
  }
  std::span<const std::uint32_t> col_users(std::size_t i) const {
    return {col_user_.data() + col_ptr_[i], col_ptr_[i + 1] - col_ptr_[i]};
  }
  std::span<const std::uint32_t> col_levels(std::size_t i) const {
    return {col_level_.data() + col_ptr_[i], col_ptr_[i + 1] - col_ptr_[i]};
  }

  // Stored level at (u,i), or 0 when the cell is absent.
  std::uint32_t level_at(std::size_t u, std::size_t i) const;

  friend OrdinalMatrix build_ordinal(std::span<const RatingTriple> triples,
                                     std::size_t n_users, std::size_t n_items,
                                     std::uint32_t max_level);

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::uint32_t max_level_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> row_item_;
  std::vector<std::uint32_t> row_level_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::uint32_t> col_user_;
  std::vector<std::uint32_t> col_level_;
};

// Validates and indexes rating triples. Duplicates are an error: ordinal
// levels are not additive, so there is no meaningful merge.
// Throws IndexOutOfRange, LevelOutOfRange, DuplicateEntry.
OrdinalMatrix build_ordinal(std::span<const RatingTriple> triples,
                            std::size_t n_users, std::size_t n_items,
                            std::uint32_t max_level);

// Symmetric binary graph over users: sorted neighbor lists, no self-loops,
// no duplicates. Immutable after construction.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;

  std::size_t n_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t n_edges() const { return neighbors_.size() / 2; }
  std::size_t degree(std::size_t u) const { return offsets_[u + 1] - offsets_[u]; }
  std::span<const std::uint32_t> neighbors(std::size_t u) const {
    return {neighbors_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  bool has_edge(std::size_t u, std::size_t v) const;

  // Unordered edge pairs with u < v, ascending.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges() const;

  // From per-user sorted, deduplicated, symmetric, loop-free lists.
  static AdjacencyGraph from_sorted_lists(std::vector<std::size_t> offsets,
                                          std::vector<std::uint32_t> neighbors);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> neighbors_;
};

// Symmetrizes, drops self-loops, deduplicates. Throws IndexOutOfRange.
AdjacencyGraph build_adjacency(
    std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
    std::size_t n_users);

// Binarized t-th boolean power: edge (u,v) present iff u != v and a walk of
// length exactly t joins u and v. Intermediate products keep diagonal entries
// (closed walks feed longer walks); only the final result drops them. Rows
// are accumulated by merging sorted neighbor lists, never via a dense
// scratch, so memory stays proportional to the output.
AdjacencyGraph adjacency_power(const AdjacencyGraph& a, unsigned t);

}  // namespace oggbn
