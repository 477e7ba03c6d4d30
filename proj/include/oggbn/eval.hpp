#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oggbn/sparse.hpp"

namespace oggbn {

struct EvalConfig {
  std::size_t top_n = 100;
  std::vector<std::uint32_t> s_levels;  // relevance thresholds, each in 1..V
  bool graded_gain = false;
};

// Candidate items sorted by descending score; excluded items (the user's
// training nonzeros, sorted ascending) never appear; score ties break toward
// the smaller item index so rankings are reproducible.
std::vector<std::uint32_t> rank_items(
    std::span<const double> scores,
    std::span<const std::uint32_t> exclude_sorted, std::size_t top_n);

// Fraction of evaluable users (those holding out at least one item of level
// >= s) whose list contains such an item within the first top_n positions.
// Throws NoEvaluableUsers when the threshold leaves nobody to score.
double hit_ratio(std::span<const std::vector<std::uint32_t>> ranked,
                 std::span<const RatingTriple> test, std::uint32_t s,
                 std::size_t top_n);

// Mean over evaluable users of DCG/IDCG with gain 1[level >= s] at position
// discount 1/log2(p+1); the ideal list packs the user's relevant held-out
// items into the top positions. graded replaces the binary gain with the
// held-out level itself (users stay evaluable by the same threshold rule).
double ndcg(std::span<const std::vector<std::uint32_t>> ranked,
            std::span<const RatingTriple> test, std::uint32_t s,
            std::size_t top_n, bool graded = false);

std::size_t count_evaluable(std::span<const RatingTriple> test,
                            std::uint32_t s, std::size_t n_users);

struct MetricRow {
  std::string model;
  std::string dataset;
  std::uint32_t s = 0;
  std::size_t top_n = 0;
  double hr = 0.0;
  double ndcg = 0.0;
  std::size_t n_evaluable = 0;
};

std::string metrics_csv(std::span<const MetricRow> rows);
std::string metrics_json(std::span<const MetricRow> rows);

}  // namespace oggbn
