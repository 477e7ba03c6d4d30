#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "oggbn/sparse.hpp"

namespace oggbn {

// External string ids <-> dense indices, in first-seen order.
struct IdMap {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::uint32_t> index;

  std::uint32_t intern(const std::string& name);
  // Dense index of a known id; throws UnknownUser with the id otherwise.
  std::uint32_t at(const std::string& name) const;
  std::size_t size() const { return names.size(); }
};

// Raw file value -> ordinal level in 1..V. Empty function means identity
// (value must already be a level).
using ValueMap = std::function<std::uint32_t(long long)>;

// Level = largest l with count >= bins[l-1]. Bins must be strictly
// increasing with bins[0] == 1, so every positive count lands in a level
// and larger counts never land lower. Throws NonPositiveCount on
// count <= 0, ConfigError on malformed bins.
std::uint32_t quantize_counts(long long count,
                              const std::vector<long long>& bins);

inline std::vector<long long> default_count_bins() { return {1, 2, 6, 51}; }

ValueMap count_quantizer(std::vector<long long> bins);

struct RawRatings {
  std::vector<RatingTriple> triples;  // levels in 1..V
  IdMap users;
  IdMap items;
};

// Parse "user<TAB>item<TAB>value" lines; gzip input is detected from the
// stream itself, so .gz and plain files both work. Ids are interned in file
// order. ParseError carries path:line; ValueOutOfRange names the offending
// value and line.
RawRatings load_ratings(const std::string& path, std::uint32_t V,
                        const ValueMap& value_map = {});

// Parse "user<TAB>user" lines; endpoints missing from the map are appended
// to it (graph-only users get empty rating rows).
std::vector<std::pair<std::uint32_t, std::uint32_t>> load_edges(
    const std::string& path, IdMap& users);

// Deterministic uniform shuffle-and-cut of the triples; train gets
// round(ratio * n) of them. Both halves come back sorted by (user, item).
std::pair<std::vector<RatingTriple>, std::vector<RatingTriple>> split(
    const std::vector<RatingTriple>& triples, double ratio,
    std::uint64_t seed);

// Edge iff cosine similarity of the two users' rating-level vectors exceeds
// eps. Built from an inverted item index, so cost is sum_i C(d_i, 2) and a
// pair is only ever considered if the users share an item. Dot products and
// norms accumulate in integers, making the result independent of worker
// count. Self-loop-free and symmetric.
AdjacencyGraph cosine_graph(const OrdinalMatrix& Y, double eps,
                            int workers = 1);

struct Dataset {
  OrdinalMatrix train;
  std::vector<RatingTriple> test;
  AdjacencyGraph graph;  // zero users when absent
  bool has_graph = false;
  IdMap users;
  IdMap items;
  std::uint32_t V = 0;
};

// Split raw triples and assemble the training matrix over the full id maps
// (call load_edges first if edge-only users should get rows).
Dataset make_dataset(RawRatings raw, std::uint32_t V, double ratio,
                     std::uint64_t seed);

}  // namespace oggbn
