#include "oggbn/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <thread>

#include "oggbn/errors.hpp"
#include "oggbn/rng.hpp"

namespace oggbn {

std::uint32_t IdMap::intern(const std::string& name) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names.size());
  names.push_back(name);
  index.emplace(name, id);
  return id;
}

std::uint32_t IdMap::at(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw UnknownUser("unknown id: " + name);
  return it->second;
}

std::uint32_t quantize_counts(long long count,
                              const std::vector<long long>& bins) {
  if (bins.empty() || bins.front() != 1)
    throw ConfigError("quantization bins must start at 1");
  for (std::size_t l = 1; l < bins.size(); ++l)
    if (bins[l] <= bins[l - 1])
      throw ConfigError("quantization bins must be strictly increasing");
  if (count <= 0)
    throw NonPositiveCount("count " + std::to_string(count) +
                           " is not a positive play count");
  for (std::size_t l = bins.size(); l-- > 0;)
    if (count >= bins[l]) return static_cast<std::uint32_t>(l + 1);
  return 1;  // unreachable: count >= 1 == bins[0]
}

ValueMap count_quantizer(std::vector<long long> bins) {
  quantize_counts(1, bins);  // validate the edges once up front
  return [bins = std::move(bins)](long long count) {
    return quantize_counts(count, bins);
  };
}

namespace {

// Line reader over a gz stream; zlib reads plain files through the same
// handle, so no extension sniffing is needed.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path) {
    f_ = gzopen(path.c_str(), "rb");
    if (f_ == nullptr) throw ParseError(path + ": cannot open");
  }
  ~LineReader() {
    if (f_ != nullptr) gzclose(f_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[1 << 16];
    bool got = false;
    for (;;) {
      if (gzgets(f_, buf, sizeof buf) == nullptr) {
        int errnum = 0;
        const char* msg = gzerror(f_, &errnum);
        if (errnum != Z_OK && errnum != Z_STREAM_END)
          throw ParseError(path_ + ": " + (msg != nullptr ? msg : "read error"));
        break;
      }
      got = true;
      line += buf;
      if (!line.empty() && line.back() == '\n') break;
    }
    if (!got) return false;
    ++lineno_;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
      line.pop_back();
    return true;
  }

  std::size_t lineno() const { return lineno_; }
  std::string where() const {
    return path_ + ":" + std::to_string(lineno_);
  }

 private:
  gzFile f_;
  std::string path_;
  std::size_t lineno_ = 0;
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

long long parse_int(const std::string& field, const std::string& where) {
  long long v = 0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError(where + ": expected an integer, got \"" + field + "\"");
  return v;
}

}  // namespace

RawRatings load_ratings(const std::string& path, std::uint32_t V,
                        const ValueMap& value_map) {
  if (V < 1) throw ConfigError("level count must be >= 1");
  RawRatings raw;
  LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() < 3 || fields[0].empty() || fields[1].empty())
      throw ParseError(reader.where() +
                       ": expected user<TAB>item<TAB>value");
    const long long value = parse_int(fields[2], reader.where());
    std::uint32_t level;
    if (value_map) {
      level = value_map(value);
    } else {
      if (value < 1 || value > static_cast<long long>(V))
        throw ValueOutOfRange(reader.where() + ": value " +
                              std::to_string(value) + " outside 1.." +
                              std::to_string(V));
      level = static_cast<std::uint32_t>(value);
    }
    if (level < 1 || level > V)
      throw ValueOutOfRange(reader.where() + ": mapped level " +
                            std::to_string(level) + " outside 1.." +
                            std::to_string(V));
    raw.triples.push_back(
        {raw.users.intern(fields[0]), raw.items.intern(fields[1]), level});
  }
  if (raw.triples.empty()) throw ParseError(path + ": no rating rows");
  return raw;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> load_edges(
    const std::string& path, IdMap& users) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty())
      throw ParseError(reader.where() + ": expected user<TAB>user");
    edges.emplace_back(users.intern(fields[0]), users.intern(fields[1]));
  }
  return edges;
}

std::pair<std::vector<RatingTriple>, std::vector<RatingTriple>> split(
    const std::vector<RatingTriple>& triples, double ratio,
    std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ConfigError("split ratio must lie strictly between 0 and 1");
  std::vector<RatingTriple> pool = triples;
  RngStream rng = make_stream(seed, Phase::DataSplit, 0, 0, 0);
  for (std::size_t i = pool.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(pool[i - 1], pool[j]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(pool.size())));
  std::vector<RatingTriple> train(pool.begin(), pool.begin() + n_train);
  std::vector<RatingTriple> test(pool.begin() + n_train, pool.end());
  auto by_cell = [](const RatingTriple& a, const RatingTriple& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  };
  std::sort(train.begin(), train.end(), by_cell);
  std::sort(test.begin(), test.end(), by_cell);
  return {std::move(train), std::move(test)};
}

AdjacencyGraph cosine_graph(const OrdinalMatrix& Y, double eps, int workers) {
  if (!(eps > 0.0 && eps < 1.0))
    throw ConfigError("similarity threshold must lie strictly in (0, 1)");
  const std::size_t U = Y.n_users();
  const std::size_t I = Y.n_items();

  std::vector<std::uint64_t> norm_sq(U, 0);
  for (std::size_t u = 0; u < U; ++u)
    for (const auto level : Y.row_levels(u))
      norm_sq[u] += static_cast<std::uint64_t>(level) * level;

  // Per-worker integer dot accumulators over co-rating pairs; integer sums
  // merge independently of the item partition.
  using PairDots = std::unordered_map<std::uint64_t, std::uint64_t>;
  const std::size_t W =
      std::max<std::size_t>(1, std::min<std::size_t>(workers, I > 0 ? I : 1));
  std::vector<PairDots> local(W);
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto work = [&](std::size_t w) {
    try {
      const std::size_t lo = I * w / W;
      const std::size_t hi = I * (w + 1) / W;
      PairDots& dots = local[w];
      for (std::size_t i = lo; i < hi; ++i) {
        const auto users = Y.col_users(i);
        const auto levels = Y.col_levels(i);
        for (std::size_t a = 0; a < users.size(); ++a)
          for (std::size_t b = a + 1; b < users.size(); ++b) {
            const std::uint64_t key =
                (static_cast<std::uint64_t>(users[a]) << 32) | users[b];
            dots[key] += static_cast<std::uint64_t>(levels[a]) * levels[b];
          }
      }
    } catch (...) {
      if (!failed.exchange(true)) first_error = std::current_exception();
    }
  };
  if (W == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(W - 1);
    for (std::size_t w = 1; w < W; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) std::rethrow_exception(first_error);

  PairDots merged = std::move(local[0]);
  for (std::size_t w = 1; w < W; ++w)
    for (const auto& [key, dot] : local[w]) merged[key] += dot;

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (const auto& [key, dot] : merged) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
    const double denom = std::sqrt(static_cast<double>(norm_sq[a]) *
                                   static_cast<double>(norm_sq[b]));
    if (static_cast<double>(dot) > eps * denom) edges.emplace_back(a, b);
  }
  return build_adjacency(edges, U);
}

Dataset make_dataset(RawRatings raw, std::uint32_t V, double ratio,
                     std::uint64_t seed) {
  Dataset ds;
  ds.V = V;
  auto [train, test] = split(raw.triples, ratio, seed);
  ds.train = build_ordinal(train, raw.users.size(), raw.items.size(), V);
  ds.test = std::move(test);
  ds.users = std::move(raw.users);
  ds.items = std::move(raw.items);
  return ds;
}

}  // namespace oggbn
