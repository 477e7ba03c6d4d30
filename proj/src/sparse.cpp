#include "oggbn/sparse.hpp"

#include <algorithm>
#include <string>

#include "oggbn/errors.hpp"

namespace oggbn {

std::uint32_t OrdinalMatrix::level_at(std::size_t u, std::size_t i) const {
  const auto items = row_items(u);
  const auto it = std::lower_bound(items.begin(), items.end(),
                                   static_cast<std::uint32_t>(i));
  if (it == items.end() || *it != i) return 0;
  return row_level_[row_ptr_[u] + static_cast<std::size_t>(it - items.begin())];
}

OrdinalMatrix build_ordinal(std::span<const RatingTriple> triples,
                            std::size_t n_users, std::size_t n_items,
                            std::uint32_t max_level) {
  OrdinalMatrix m;
  m.n_users_ = n_users;
  m.n_items_ = n_items;
  m.max_level_ = max_level;

  for (const auto& t : triples) {
    if (t.user >= n_users || t.item >= n_items)
      throw IndexOutOfRange("rating index (" + std::to_string(t.user) + "," +
                            std::to_string(t.item) + ") outside " +
                            std::to_string(n_users) + "x" +
                            std::to_string(n_items));
    if (t.level < 1 || t.level > max_level)
      throw LevelOutOfRange("rating level " + std::to_string(t.level) +
                            " not in 1.." + std::to_string(max_level));
  }

  std::vector<RatingTriple> sorted(triples.begin(), triples.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  for (std::size_t j = 1; j < sorted.size(); ++j) {
    if (sorted[j].user == sorted[j - 1].user &&
        sorted[j].item == sorted[j - 1].item)
      throw DuplicateEntry("duplicate rating at (" +
                           std::to_string(sorted[j].user) + "," +
                           std::to_string(sorted[j].item) + ")");
  }

  m.row_ptr_.assign(n_users + 1, 0);
  m.row_item_.resize(sorted.size());
  m.row_level_.resize(sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    m.row_item_[j] = sorted[j].item;
    m.row_level_[j] = sorted[j].level;
    ++m.row_ptr_[sorted[j].user + 1];
  }
  for (std::size_t u = 0; u < n_users; ++u) m.row_ptr_[u + 1] += m.row_ptr_[u];

  // Column view by counting sort over items; within a column, users ascend
  // because the source order is (user, item) ascending.
  m.col_ptr_.assign(n_items + 1, 0);
  for (const auto& t : sorted) ++m.col_ptr_[t.item + 1];
  for (std::size_t i = 0; i < n_items; ++i) m.col_ptr_[i + 1] += m.col_ptr_[i];
  m.col_user_.resize(sorted.size());
  m.col_level_.resize(sorted.size());
  std::vector<std::size_t> cursor(m.col_ptr_.begin(), m.col_ptr_.end() - 1);
  for (const auto& t : sorted) {
    const std::size_t pos = cursor[t.item]++;
    m.col_user_[pos] = t.user;
    m.col_level_[pos] = t.level;
  }
  return m;
}

bool AdjacencyGraph::has_edge(std::size_t u, std::size_t v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(),
                            static_cast<std::uint32_t>(v));
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> AdjacencyGraph::edges()
    const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(n_edges());
  for (std::size_t u = 0; u < n_users(); ++u)
    for (std::uint32_t v : neighbors(u))
      if (v > u) out.emplace_back(static_cast<std::uint32_t>(u), v);
  return out;
}

AdjacencyGraph AdjacencyGraph::from_sorted_lists(
    std::vector<std::size_t> offsets, std::vector<std::uint32_t> neighbors) {
  AdjacencyGraph g;
  g.offsets_ = std::move(offsets);
  g.neighbors_ = std::move(neighbors);
  return g;
}

AdjacencyGraph build_adjacency(
    std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
    std::size_t n_users) {
  std::vector<std::vector<std::uint32_t>> adj(n_users);
  for (const auto& [u, v] : edges) {
    if (u >= n_users || v >= n_users)
      throw IndexOutOfRange("edge (" + std::to_string(u) + "," +
                            std::to_string(v) + ") outside " +
                            std::to_string(n_users) + " users");
    if (u == v) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<std::size_t> offsets(n_users + 1, 0);
  std::vector<std::uint32_t> flat;
  for (std::size_t u = 0; u < n_users; ++u) {
    auto& nb = adj[u];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    offsets[u + 1] = offsets[u] + nb.size();
    flat.insert(flat.end(), nb.begin(), nb.end());
  }
  return AdjacencyGraph::from_sorted_lists(std::move(offsets), std::move(flat));
}

namespace {

// out = union of sorted lists a and b (merge step of the boolean row product).
void merge_union(const std::vector<std::uint32_t>& a,
                 std::span<const std::uint32_t> b,
                 std::vector<std::uint32_t>& out) {
  out.clear();
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      out.push_back(a[i++]);
    } else if (b[j] < a[i]) {
      out.push_back(b[j++]);
    } else {
      out.push_back(a[i]);
      ++i;
      ++j;
    }
  }
  out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(i), a.end());
  for (; j < b.size(); ++j) out.push_back(b[j]);
}

}  // namespace

AdjacencyGraph adjacency_power(const AdjacencyGraph& a, unsigned t) {
  const std::size_t n = a.n_users();
  if (t == 1) {
    // Copy through the row lists unchanged.
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<std::uint32_t> flat;
    flat.reserve(2 * a.n_edges());
    for (std::size_t u = 0; u < n; ++u) {
      const auto nb = a.neighbors(u);
      flat.insert(flat.end(), nb.begin(), nb.end());
      offsets[u + 1] = flat.size();
    }
    return AdjacencyGraph::from_sorted_lists(std::move(offsets),
                                             std::move(flat));
  }

  // reach[u] holds the sorted row of the boolean power built so far,
  // including diagonal entries: a closed s-walk at u extends to an
  // (s+k)-walk through u, so the diagonal must survive until the end.
  std::vector<std::vector<std::uint32_t>> reach(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto nb = a.neighbors(u);
    reach[u].assign(nb.begin(), nb.end());
  }
  std::vector<std::uint32_t> acc, tmp;
  for (unsigned step = 1; step < t; ++step) {
    std::vector<std::vector<std::uint32_t>> next(n);
    for (std::size_t u = 0; u < n; ++u) {
      acc.clear();
      for (std::uint32_t w : reach[u]) {
        merge_union(acc, a.neighbors(w), tmp);
        acc.swap(tmp);
      }
      next[u] = acc;
    }
    reach.swap(next);
  }

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::uint32_t> flat;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::uint32_t v : reach[u])
      if (v != u) flat.push_back(v);
    offsets[u + 1] = flat.size();
  }
  return AdjacencyGraph::from_sorted_lists(std::move(offsets), std::move(flat));
}

}  // namespace oggbn
