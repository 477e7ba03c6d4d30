#include "oggbn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "oggbn/errors.hpp"

namespace oggbn {

namespace {

// Held-out (item, level) pairs grouped per user.
std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> group_test(
    std::span<const RatingTriple> test, std::size_t n_users) {
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> by_user(
      n_users);
  for (const auto& t : test) {
    if (t.user >= n_users)
      throw IndexOutOfRange("held-out user " + std::to_string(t.user) +
                            " has no ranked list");
    by_user[t.user].emplace_back(t.item, t.level);
  }
  return by_user;
}

double position_discount(std::size_t p) {
  return 1.0 / std::log2(static_cast<double>(p) + 1.0);
}

}  // namespace

std::vector<std::uint32_t> rank_items(
    std::span<const double> scores,
    std::span<const std::uint32_t> exclude_sorted, std::size_t top_n) {
  std::vector<std::uint32_t> candidates;
  candidates.reserve(scores.size());
  std::size_t e = 0;
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    while (e < exclude_sorted.size() && exclude_sorted[e] < i) ++e;
    if (e < exclude_sorted.size() && exclude_sorted[e] == i) continue;
    candidates.push_back(i);
  }
  const std::size_t n = std::min(top_n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + n,
                    candidates.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  candidates.resize(n);
  return candidates;
}

std::size_t count_evaluable(std::span<const RatingTriple> test,
                            std::uint32_t s, std::size_t n_users) {
  std::vector<char> seen(n_users, 0);
  std::size_t n = 0;
  for (const auto& t : test)
    if (t.level >= s && t.user < n_users && !seen[t.user]) {
      seen[t.user] = 1;
      ++n;
    }
  return n;
}

double hit_ratio(std::span<const std::vector<std::uint32_t>> ranked,
                 std::span<const RatingTriple> test, std::uint32_t s,
                 std::size_t top_n) {
  const auto by_user = group_test(test, ranked.size());
  std::size_t evaluable = 0;
  std::size_t hits = 0;
  for (std::size_t u = 0; u < ranked.size(); ++u) {
    bool any_relevant = false;
    for (const auto& [item, level] : by_user[u])
      if (level >= s) {
        any_relevant = true;
        break;
      }
    if (!any_relevant) continue;
    ++evaluable;
    const std::size_t n = std::min(top_n, ranked[u].size());
    for (std::size_t p = 0; p < n; ++p) {
      bool hit = false;
      for (const auto& [item, level] : by_user[u])
        if (item == ranked[u][p] && level >= s) {
          hit = true;
          break;
        }
      if (hit) {
        ++hits;
        break;
      }
    }
  }
  if (evaluable == 0)
    throw NoEvaluableUsers("no user holds out an item at level >= " +
                           std::to_string(s));
  return static_cast<double>(hits) / static_cast<double>(evaluable);
}

double ndcg(std::span<const std::vector<std::uint32_t>> ranked,
            std::span<const RatingTriple> test, std::uint32_t s,
            std::size_t top_n, bool graded) {
  const auto by_user = group_test(test, ranked.size());
  std::size_t evaluable = 0;
  double total = 0.0;
  for (std::size_t u = 0; u < ranked.size(); ++u) {
    std::vector<double> gains;  // one per held-out item of positive gain
    for (const auto& [item, level] : by_user[u]) {
      (void)item;
      if (graded)
        gains.push_back(static_cast<double>(level));
      else if (level >= s)
        gains.push_back(1.0);
    }
    bool any_relevant = false;
    for (const auto& [item, level] : by_user[u])
      if (level >= s) {
        any_relevant = true;
        break;
      }
    if (!any_relevant) continue;
    ++evaluable;

    const std::size_t n = std::min(top_n, ranked[u].size());
    double dcg = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (const auto& [item, level] : by_user[u])
        if (item == ranked[u][p]) {
          const double gain =
              graded ? static_cast<double>(level) : (level >= s ? 1.0 : 0.0);
          dcg += gain * position_discount(p + 1);
          break;
        }
    }
    std::sort(gains.begin(), gains.end(), std::greater<>());
    double idcg = 0.0;
    const std::size_t ideal_n = std::min(top_n, gains.size());
    for (std::size_t p = 0; p < ideal_n; ++p)
      idcg += gains[p] * position_discount(p + 1);
    if (idcg > 0.0) total += dcg / idcg;
  }
  if (evaluable == 0)
    throw NoEvaluableUsers("no user holds out an item at level >= " +
                           std::to_string(s));
  return total / static_cast<double>(evaluable);
}

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::string out = "model,dataset,s,N,HR,NDCG,n_evaluable_users\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r.model + "," + r.dataset + "," + std::to_string(r.s) + "," +
           std::to_string(r.top_n) + ",";
    std::snprintf(buf, sizeof buf, "%.10g", r.hr);
    out += buf;
    out += ",";
    std::snprintf(buf, sizeof buf, "%.10g", r.ndcg);
    out += buf;
    out += "," + std::to_string(r.n_evaluable) + "\n";
  }
  return out;
}

std::string metrics_json(std::span<const MetricRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"model", r.model},
                   {"dataset", r.dataset},
                   {"s", r.s},
                   {"N", r.top_n},
                   {"HR", r.hr},
                   {"NDCG", r.ndcg},
                   {"n_evaluable_users", r.n_evaluable}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace oggbn
