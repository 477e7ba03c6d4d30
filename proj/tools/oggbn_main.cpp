#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oggbn/checkpoint.hpp"
#include "oggbn/dataio.hpp"
#include "oggbn/deep.hpp"
#include "oggbn/errors.hpp"
#include "oggbn/eval.hpp"
#include "oggbn/ogfa.hpp"
#include "oggbn/parallel.hpp"
#include "oggbn/sparse.hpp"
#include "oggbn/thresholds.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oggbn;

namespace {

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

// Wall-clock sidecar; everything timestamped goes here so the primary
// outputs stay byte-identical across reruns.
class PhaseTimer {
 public:
  explicit PhaseTimer(const std::string& path) : out_(path, std::ios::binary) {
    out_ << "phase,seconds\n";
  }
  template <class F>
  void run(const std::string& phase, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - t0;
    out_ << phase << "," << fmt("%.6f", dt.count()) << "\n";
  }

 private:
  std::ofstream out_;
};

struct TrainOpts {
  std::string ratings;
  std::string edges;
  std::string out;
  std::string model = "ogfa";
  std::vector<std::uint32_t> widths;
  std::uint32_t levels = 5;
  std::vector<long long> bins;
  double cosine_eps = 0.0;
  double split_ratio = 0.8;
  std::size_t burnin = 500;
  std::size_t collect = 50;
  std::size_t stride = 5;
  std::size_t eval_every = 1;
  std::uint64_t seed = 1;
  double r = 1.0, gamma0 = 1.0, c0 = 1.0, eta = 0.05, e0 = 1.0, f0 = 1.0;
  std::string exposure = "exact";
  std::string theta_scan = "frozen";
  bool phi_mh = false;
  bool fix_thresholds = false;
  bool fix_rate_hyper = false;
  bool store_states = false;
  std::vector<double> delta_init;
};

struct EvalOpts {
  std::string checkpoint;
  std::string test;
  std::string train;  // exclusion source; defaults to checkpoint/train.tsv
  std::string out;
  std::string dataset_name;
  std::vector<std::uint32_t> s_levels;
  std::size_t top_n = 100;
  bool graded = false;
};

struct RecommendOpts {
  std::string checkpoint;
  std::vector<std::string> users;
  std::string users_file;
  std::string train;
  std::string out;  // "-" means stdout
  std::size_t top_n = 10;
};

struct TreeOpts {
  std::string checkpoint;
  std::string out;
  std::string item_names;
  std::size_t top_items = 10;
  double tau = 0.05;
};

struct SynthOpts {
  std::string out;
  std::size_t users = 200;
  std::size_t items = 300;
  std::uint32_t k = 5;
  std::uint32_t levels = 5;
  std::vector<double> true_deltas;
  std::uint64_t seed = 1;
  double r = 1.0, gamma0 = 1.0, c0 = 1.0, eta = 0.05, e0 = 1.0, f0 = 1.0;
};

Hyper make_hyper(double r, double gamma0, double c0, double eta, double e0,
                 double f0) {
  Hyper h;
  h.r = r;
  h.gamma0 = gamma0;
  h.c0 = c0;
  h.eta = eta;
  h.e0 = e0;
  h.f0 = f0;
  return h;
}

std::vector<double> resolve_deltas(const std::vector<double>& given,
                                   std::uint32_t V, const char* what) {
  if (given.empty())
    return std::vector<double>(V, 1.0 / static_cast<double>(V));
  if (given.size() != V)
    throw ConfigError(std::string(what) + " needs exactly " +
                      std::to_string(V) + " entries");
  for (double d : given)
    if (!(d > 0.0))
      throw ConfigError(std::string(what) + " entries must be positive");
  return given;
}

void write_triples(const std::string& path,
                   std::span<const RatingTriple> triples, const IdMap& users,
                   const IdMap& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& t : triples)
    out << users.names[t.user] << '\t' << items.names[t.item] << '\t'
        << t.level << '\n';
  if (!out) throw Error("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

// Rating-layer scoring sources: all persisted states when available,
// otherwise the posterior-mean matrices, otherwise the last state.
struct ScoreSources {
  std::vector<std::pair<const Matrix*, const Matrix*>> tp;
  std::size_t n_items = 0;

  std::vector<double> row(std::uint32_t u) const {
    std::vector<double> scores(n_items, 0.0);
    for (const auto& [theta, phi] : tp) {
      const auto theta_u = theta->row(u);
      for (std::size_t i = 0; i < n_items; ++i) {
        const auto phi_i = phi->row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < theta_u.size(); ++k)
          acc += theta_u[k] * phi_i[k];
        scores[i] += acc;
      }
    }
    const auto inv = 1.0 / static_cast<double>(tp.size());
    for (auto& x : scores) x *= inv;
    return scores;
  }
};

ScoreSources make_sources(const Checkpoint& c) {
  ScoreSources s;
  if (!c.states.empty()) {
    for (const auto& st : c.states) s.tp.emplace_back(&st.theta[0], &st.phi[0]);
  } else if (c.mean.count > 0) {
    s.tp.emplace_back(&c.mean.theta[0], &c.mean.phi[0]);
  } else {
    s.tp.emplace_back(&c.last.theta[0], &c.last.phi[0]);
  }
  s.n_items = s.tp[0].second->rows();
  return s;
}

// Re-keys triples from a file onto checkpoint id maps; rows naming users or
// items the model never saw are dropped (they cannot be scored).
struct MappedTriples {
  std::vector<RatingTriple> cells;
  std::size_t skipped = 0;
};

MappedTriples map_onto(const RawRatings& raw, const Checkpoint& c) {
  MappedTriples m;
  for (const auto& t : raw.triples) {
    const auto uit = c.users.index.find(raw.users.names[t.user]);
    const auto iit = c.items.index.find(raw.items.names[t.item]);
    if (uit == c.users.index.end() || iit == c.items.index.end()) {
      ++m.skipped;
      continue;
    }
    m.cells.push_back({uit->second, iit->second, t.level});
  }
  return m;
}

std::vector<std::vector<std::uint32_t>> exclusion_lists(
    const std::vector<RatingTriple>& train_cells, std::size_t n_users) {
  std::vector<std::vector<std::uint32_t>> excl(n_users);
  for (const auto& t : train_cells) excl[t.user].push_back(t.item);
  for (auto& e : excl) std::sort(e.begin(), e.end());
  return excl;
}

// ---------------------------------------------------------------- train

int cmd_train(const TrainOpts& o, int workers) {
  if (o.collect < 1 || o.stride < 1)
    throw ConfigError("collect and stride must be >= 1");
  std::uint32_t V = o.levels;
  ValueMap vmap;
  if (!o.bins.empty()) {
    vmap = count_quantizer(o.bins);
    V = static_cast<std::uint32_t>(o.bins.size());
  }

  fs::create_directories(o.out);
  PhaseTimer timer(o.out + "/timings.csv");
  std::ofstream log(o.out + "/run.log", std::ios::binary);
  if (!log) throw Error("cannot write " + o.out + "/run.log");

  RawRatings raw;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list;
  timer.run("load_data", [&] {
    raw = load_ratings(o.ratings, V, vmap);
    if (!o.edges.empty()) edge_list = load_edges(o.edges, raw.users);
  });
  Dataset ds = make_dataset(std::move(raw), V, o.split_ratio, o.seed);
  const std::size_t U = ds.users.size();
  const std::size_t I = ds.items.size();

  std::string graph_source = "none";
  timer.run("build_graph", [&] {
    if (!edge_list.empty()) {
      ds.graph = build_adjacency(edge_list, U);
      graph_source = "edges";
    } else if (o.cosine_eps > 0.0) {
      ds.graph = cosine_graph(ds.train, o.cosine_eps, workers);
      graph_source = "cosine";
    } else {
      ds.graph = build_adjacency({}, U);
    }
    ds.has_graph = graph_source != "none";
  });

  const std::vector<std::uint32_t> widths =
      !o.widths.empty() ? o.widths
      : o.model == "oggbn"
          ? std::vector<std::uint32_t>{150, 80, 40}
          : std::vector<std::uint32_t>{100};
  const Hyper hyper = make_hyper(o.r, o.gamma0, o.c0, o.eta, o.e0, o.f0);
  const auto deltas0 = resolve_deltas(o.delta_init, V, "--delta-init");

  SweepOptions opts;
  opts.workers = workers;
  opts.exposure = o.exposure == "simplified" ? ExposureMode::Simplified
                                             : ExposureMode::Exact;
  opts.theta_scan =
      o.theta_scan == "sequential" ? ThetaScan::Sequential : ThetaScan::Frozen;
  opts.phi_mh = o.phi_mh;
  opts.update_thresholds = !o.fix_thresholds;
  opts.resample_user_rate = !o.fix_rate_hyper;

  log << "model " << o.model << "\n";
  log << "users " << U << "\nitems " << I << "\n";
  log << "levels " << V << "\n";
  log << "train_nnz " << ds.train.nnz() << "\ntest_nnz " << ds.test.size()
      << "\n";
  log << "graph " << graph_source << " edges " << ds.graph.n_edges() << "\n";
  log << "widths";
  for (auto k : widths) log << " " << k;
  log << "\nseed " << o.seed << "\n";

  {
    json dm;
    dm["V"] = V;
    dm["bins"] = o.bins;
    dm["cosine_eps"] = o.cosine_eps;
    dm["seed"] = o.seed;
    dm["split_ratio"] = o.split_ratio;
    dm["n_users"] = U;
    dm["n_items"] = I;
    dm["n_train"] = ds.train.nnz();
    dm["n_test"] = ds.test.size();
    dm["n_edges"] = ds.graph.n_edges();
    dm["graph_source"] = graph_source;
    write_text(o.out + "/dataset.json", dm.dump(2) + "\n");
  }
  write_triples(o.out + "/test.tsv", ds.test, ds.users, ds.items);
  {
    std::vector<RatingTriple> train_cells;
    train_cells.reserve(ds.train.nnz());
    for (std::uint32_t u = 0; u < U; ++u) {
      const auto items = ds.train.row_items(u);
      const auto levels = ds.train.row_levels(u);
      for (std::size_t j = 0; j < items.size(); ++j)
        train_cells.push_back({u, items[j], levels[j]});
    }
    write_triples(o.out + "/train.tsv", train_cells, ds.users, ds.items);
  }

  const std::size_t total = o.burnin + o.collect * o.stride;
  StateMean mean;
  std::vector<DeepState> kept;

  std::function<void()> sweep_fn;
  std::function<DeepState()> snapshot;
  std::function<double()> heldout;

  OgfaState shallow;
  DeepState deep;
  std::vector<AdjacencyGraph> layer_graphs;
  if (o.model == "ogfa") {
    if (widths.size() != 1)
      throw ConfigError("the shallow model takes exactly one layer width");
    shallow = ogfa_init(U, I, widths[0], V, hyper, o.seed);
    shallow.tm = from_deltas(deltas0);
    sweep_fn = [&] { gibbs_sweep(ds.train, ds.graph, shallow, o.seed, opts); };
    snapshot = [&] { return to_layered(shallow); };
    heldout = [&] {
      return heldout_loglik(ds.test, shallow.theta, shallow.phi, shallow.tm);
    };
  } else {
    deep = deep_init(U, I, widths, V, hyper, o.seed);
    deep.tm = from_deltas(deltas0);
    timer.run("layer_graphs", [&] {
      layer_graphs =
          build_layer_graphs(ds.graph, static_cast<unsigned>(widths.size()));
    });
    for (unsigned t = 0; t < layer_graphs.size(); ++t)
      log << "layer_graph " << t + 1 << " edges "
          << layer_graphs[t].n_edges() << "\n";
    sweep_fn = [&] { deep_sweep(ds.train, layer_graphs, deep, o.seed, opts); };
    snapshot = [&] { return deep; };
    heldout = [&] {
      return heldout_loglik(ds.test, deep.theta[0], deep.phi[0], deep.tm);
    };
  }

  char phase[32];
  for (std::size_t sw = 1; sw <= total; ++sw) {
    std::snprintf(phase, sizeof phase, "sweep_%05zu", sw);
    timer.run(phase, sweep_fn);
    if (o.eval_every > 0 && !ds.test.empty() &&
        (sw % o.eval_every == 0 || sw == total)) {
      double ll = 0.0;
      std::snprintf(phase, sizeof phase, "heldout_%05zu", sw);
      timer.run(phase, [&] { ll = heldout(); });
      log << "sweep " << sw << " heldout_ll " << fmt("%.10g", ll) << "\n";
    }
    if (sw > o.burnin && (sw - o.burnin) % o.stride == 0) {
      const DeepState snap = snapshot();
      mean.add(snap);
      if (o.store_states) kept.push_back(snap);
    }
  }

  Checkpoint ckpt;
  ckpt.kind = o.model;
  ckpt.V = V;
  ckpt.mean = std::move(mean);
  ckpt.last = snapshot();
  ckpt.states = std::move(kept);
  ckpt.users = std::move(ds.users);
  ckpt.items = std::move(ds.items);
  timer.run("checkpoint", [&] { save_checkpoint(o.out, ckpt); });

  log << "collected " << ckpt.mean.count << "\n";
  log << "delta_final";
  for (double d : ckpt.last.tm.delta) log << " " << fmt("%.17g", d);
  log << "\ndelta_mean";
  for (double d : ckpt.mean.deltas) log << " " << fmt("%.17g", d);
  log << "\n";
  std::cout << "checkpoint written to " << o.out << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval

int cmd_eval(const EvalOpts& o, int workers) {
  Checkpoint c = load_checkpoint(o.checkpoint);
  std::vector<std::uint32_t> s_levels = o.s_levels;
  if (s_levels.empty()) {
    s_levels = {1, (1 + c.V) / 2, c.V};
    std::sort(s_levels.begin(), s_levels.end());
    s_levels.erase(std::unique(s_levels.begin(), s_levels.end()),
                   s_levels.end());
  }
  for (auto s : s_levels)
    if (s < 1 || s > c.V)
      throw ConfigError("relevance level " + std::to_string(s) +
                        " outside 1.." + std::to_string(c.V));

  const MappedTriples test = map_onto(load_ratings(o.test, c.V, {}), c);
  if (test.skipped > 0)
    std::cerr << test.skipped
              << " held-out rows name unseen users/items; skipped\n";

  std::string train_path = o.train;
  if (train_path.empty()) {
    const auto candidate = fs::path(o.checkpoint) / "train.tsv";
    if (fs::exists(candidate)) train_path = candidate.string();
  }
  std::vector<RatingTriple> train_cells;
  if (!train_path.empty())
    train_cells = map_onto(load_ratings(train_path, c.V, {}), c).cells;

  const ScoreSources sources = make_sources(c);
  const std::size_t U = c.last.n_users();
  const auto excl = exclusion_lists(train_cells, U);

  std::vector<std::uint32_t> active;
  {
    std::vector<char> has_test(U, 0);
    for (const auto& t : test.cells) has_test[t.user] = 1;
    for (std::uint32_t u = 0; u < U; ++u)
      if (has_test[u]) active.push_back(u);
  }
  std::vector<std::vector<std::uint32_t>> ranked(U);
  parallel_for(active.size(), workers, [&](std::size_t j) {
    const auto u = active[j];
    ranked[u] = rank_items(sources.row(u), excl[u], o.top_n);
  });

  const std::string dataset =
      o.dataset_name.empty() ? fs::path(o.test).filename().string()
                             : o.dataset_name;
  std::vector<MetricRow> rows;
  for (auto s : s_levels) {
    MetricRow row;
    row.model = c.kind;
    row.dataset = dataset;
    row.s = s;
    row.top_n = o.top_n;
    row.hr = hit_ratio(ranked, test.cells, s, o.top_n);
    row.ndcg = ndcg(ranked, test.cells, s, o.top_n, o.graded);
    row.n_evaluable = count_evaluable(test.cells, s, U);
    rows.push_back(row);
  }

  const std::string out_dir = o.out.empty() ? o.checkpoint : o.out;
  fs::create_directories(out_dir);
  const std::string csv = metrics_csv(rows);
  write_text(out_dir + "/metrics.csv", csv);
  write_text(out_dir + "/metrics.json", metrics_json(rows));
  std::cout << csv;
  return 0;
}

// ------------------------------------------------------------ recommend

int cmd_recommend(const RecommendOpts& o, int workers) {
  Checkpoint c = load_checkpoint(o.checkpoint);
  std::vector<std::string> user_ids = o.users;
  if (!o.users_file.empty()) {
    std::ifstream in(o.users_file, std::ios::binary);
    if (!in) throw ParseError("cannot open " + o.users_file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) user_ids.push_back(line);
    }
  }
  if (user_ids.empty()) throw ConfigError("no users requested");

  std::vector<std::uint32_t> dense;
  dense.reserve(user_ids.size());
  for (const auto& id : user_ids) dense.push_back(c.users.at(id));

  std::string train_path = o.train;
  if (train_path.empty()) {
    const auto candidate = fs::path(o.checkpoint) / "train.tsv";
    if (fs::exists(candidate)) train_path = candidate.string();
  }
  std::vector<RatingTriple> train_cells;
  if (!train_path.empty())
    train_cells = map_onto(load_ratings(train_path, c.V, {}), c).cells;

  const ScoreSources sources = make_sources(c);
  const auto excl = exclusion_lists(train_cells, c.last.n_users());

  std::vector<std::vector<std::uint32_t>> lists(dense.size());
  std::vector<std::vector<double>> scores(dense.size());
  parallel_for(dense.size(), workers, [&](std::size_t j) {
    scores[j] = sources.row(dense[j]);
    lists[j] = rank_items(scores[j], excl[dense[j]], o.top_n);
  });

  std::string out;
  for (std::size_t j = 0; j < dense.size(); ++j)
    for (std::size_t p = 0; p < lists[j].size(); ++p) {
      const auto item = lists[j][p];
      out += user_ids[j] + "\t" + std::to_string(p + 1) + "\t" +
             c.items.names[item] + "\t" + fmt("%.10g", scores[j][item]) + "\n";
    }
  if (o.out.empty() || o.out == "-")
    std::cout << out;
  else
    write_text(o.out, out);
  return 0;
}

// ---------------------------------------------------------- export-tree

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out;
}

int cmd_export_tree(const TreeOpts& o) {
  Checkpoint c = load_checkpoint(o.checkpoint);
  DeepState view;
  view.widths = c.last.widths;
  view.phi = c.mean.count > 0 ? c.mean.phi : c.last.phi;
  const unsigned T = view.depth();

  std::unordered_map<std::string, std::string> labels;
  if (!o.item_names.empty()) {
    std::ifstream in(o.item_names, std::ios::binary);
    if (!in) throw ParseError("cannot open " + o.item_names);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto tab = line.find('\t');
      if (tab != std::string::npos)
        labels[line.substr(0, tab)] = line.substr(tab + 1);
    }
  }
  auto label_of = [&](std::uint32_t item) {
    const std::string& id = c.items.names[item];
    const auto it = labels.find(id);
    return it == labels.end() ? id : it->second;
  };

  json tree;
  tree["layers"] = json::array();
  std::string dot = "digraph taxonomy {\n  rankdir=TB;\n  node [shape=box];\n";
  for (unsigned l = 1; l <= T; ++l) {
    json layer;
    layer["layer"] = l;
    layer["width"] = view.widths[l - 1];
    layer["communities"] = json::array();
    for (std::uint32_t k = 0; k < view.widths[l - 1]; ++k) {
      const auto proj = project_community(view, l, k);
      std::vector<std::uint32_t> order(proj.size());
      for (std::uint32_t i = 0; i < proj.size(); ++i) order[i] = i;
      const std::size_t n = std::min<std::size_t>(o.top_items, order.size());
      std::partial_sort(order.begin(), order.begin() + n, order.end(),
                        [&](std::uint32_t a, std::uint32_t b) {
                          if (proj[a] != proj[b]) return proj[a] > proj[b];
                          return a < b;
                        });
      json comm;
      comm["community"] = k;
      comm["top_items"] = json::array();
      std::string node_label = "L" + std::to_string(l) + "/C" +
                               std::to_string(k);
      for (std::size_t j = 0; j < n; ++j) {
        comm["top_items"].push_back({{"item", c.items.names[order[j]]},
                                     {"label", label_of(order[j])},
                                     {"weight", proj[order[j]]}});
        node_label += "\\n" + dot_escape(label_of(order[j])) + " " +
                      fmt("%.3g", proj[order[j]]);
      }
      layer["communities"].push_back(comm);
      dot += "  \"L" + std::to_string(l) + "_K" + std::to_string(k) +
             "\" [label=\"" + node_label + "\"];\n";
    }
    tree["layers"].push_back(layer);
  }
  tree["edges"] = json::array();
  for (unsigned l = 1; l < T; ++l) {
    // phi[l] maps layer l+1 communities onto layer l communities
    const Matrix& m = view.phi[l];
    for (std::size_t k = 0; k < m.rows(); ++k)
      for (std::size_t kn = 0; kn < m.cols(); ++kn) {
        const double w = m(k, kn);
        if (w < o.tau) continue;
        tree["edges"].push_back({{"from_layer", l + 1},
                                 {"from_community", kn},
                                 {"to_layer", l},
                                 {"to_community", k},
                                 {"weight", w}});
        dot += "  \"L" + std::to_string(l + 1) + "_K" + std::to_string(kn) +
               "\" -> \"L" + std::to_string(l) + "_K" + std::to_string(k) +
               "\" [penwidth=" + fmt("%.4g", 8.0 * w) + "];\n";
      }
  }
  dot += "}\n";

  const std::string out_dir = o.out.empty() ? o.checkpoint : o.out;
  fs::create_directories(out_dir);
  write_text(out_dir + "/tree.json", tree.dump(2) + "\n");
  write_text(out_dir + "/tree.dot", dot);
  std::cout << "taxonomy written to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const SynthOpts& o) {
  const auto deltas = resolve_deltas(o.true_deltas, o.levels, "--true-deltas");
  const Hyper hyper = make_hyper(o.r, o.gamma0, o.c0, o.eta, o.e0, o.f0);
  const SimData sim =
      simulate(o.users, o.items, o.k, o.levels, hyper, deltas, o.seed);

  fs::create_directories(o.out);
  fs::create_directories(o.out + "/truth");
  {
    std::string out;
    for (std::size_t u = 0; u < sim.ratings.n_users(); ++u) {
      const auto items = sim.ratings.row_items(u);
      const auto levels = sim.ratings.row_levels(u);
      for (std::size_t j = 0; j < items.size(); ++j)
        out += std::to_string(u) + "\t" + std::to_string(items[j]) + "\t" +
               std::to_string(levels[j]) + "\n";
    }
    write_text(o.out + "/ratings.tsv", out);
  }
  {
    std::string out;
    for (const auto& [a, b] : sim.graph.edges())
      out += std::to_string(a) + "\t" + std::to_string(b) + "\n";
    write_text(o.out + "/edges.tsv", out);
  }
  write_matrix_file(o.out + "/truth/theta.bin", sim.theta_star);
  write_matrix_file(o.out + "/truth/phi.bin", sim.phi_star);
  {
    Matrix u(1, sim.u_star.size());
    for (std::size_t k = 0; k < sim.u_star.size(); ++k) u(0, k) = sim.u_star[k];
    write_matrix_file(o.out + "/truth/u.bin", u);
    Matrix cu(1, sim.c_user_star.size());
    for (std::size_t i = 0; i < sim.c_user_star.size(); ++i)
      cu(0, i) = sim.c_user_star[i];
    write_matrix_file(o.out + "/truth/c_user.bin", cu);
  }
  json truth;
  truth["seed"] = o.seed;
  truth["n_users"] = o.users;
  truth["n_items"] = o.items;
  truth["k"] = o.k;
  truth["V"] = o.levels;
  truth["deltas"] = deltas;
  truth["n_ratings"] = sim.ratings.nnz();
  truth["n_edges"] = sim.graph.n_edges();
  write_text(o.out + "/truth/truth.json", truth.dump(2) + "\n");
  std::cout << "synthetic dataset written to " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse joint factorization of ordinal ratings and a social "
               "graph, with Gibbs-EM training, ranking evaluation, and "
               "community-taxonomy export"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "read options from an INI file");
  app.require_subcommand(0, 1);

  int workers = 1;
  app.add_option("--workers", workers, "worker threads for parallel phases")
      ->envname("OGGBN_WORKERS")
      ->check(CLI::PositiveNumber);
  bool dump_config = false;
  app.add_flag("--dump-config", dump_config,
               "print the resolved configuration and exit")
      ->configurable(false);

  TrainOpts t;
  auto* train = app.add_subcommand("train", "fit a model and write a "
                                            "checkpoint directory");
  train->configurable();
  train->fallthrough();
  train->add_option("--ratings", t.ratings, "rating TSV (user<TAB>item<TAB>value)")
      ->required();
  train->add_option("--edges", t.edges, "social edge TSV (user<TAB>user)");
  train->add_option("--out", t.out, "output/checkpoint directory")->required();
  train->add_option("--model", t.model, "model kind")
      ->check(CLI::IsMember({"ogfa", "oggbn"}));
  train->add_option("--widths", t.widths,
                    "community counts per layer (default 100, or 150 80 40 "
                    "for oggbn)")
      ->delimiter(',');
  train->add_option("--levels", t.levels, "number of ordinal levels V");
  train->add_option("--bins", t.bins,
                    "count-quantization bin edges; sets V and maps raw "
                    "counts to levels")
      ->delimiter(',');
  train->add_option("--cosine-eps", t.cosine_eps,
                    "build the user graph from rating cosine similarity at "
                    "this threshold (used when --edges is absent)");
  train->add_option("--split-ratio", t.split_ratio, "train fraction");
  train->add_option("--burnin", t.burnin, "burn-in sweeps");
  train->add_option("--collect", t.collect, "collected posterior states");
  train->add_option("--stride", t.stride, "sweeps between collected states");
  train->add_option("--eval-every", t.eval_every,
                    "held-out log-likelihood cadence (0 = off)");
  train->add_option("--seed", t.seed, "random seed");
  train->add_option("--r", t.r, "top-layer gamma shape");
  train->add_option("--gamma0", t.gamma0, "community-scale shape budget");
  train->add_option("--c0", t.c0, "community-scale rate");
  train->add_option("--eta", t.eta, "loading Dirichlet concentration");
  train->add_option("--e0", t.e0, "user-rate hyper shape");
  train->add_option("--f0", t.f0, "user-rate hyper rate");
  train->add_option("--exposure", t.exposure, "rating exposure mode")
      ->check(CLI::IsMember({"exact", "simplified"}));
  train->add_option("--theta-scan", t.theta_scan,
                    "preference update schedule")
      ->check(CLI::IsMember({"frozen", "sequential"}));
  train->add_flag("--phi-mh", t.phi_mh,
                  "apply the ordinal tilt correction to loading draws");
  train->add_flag("--fix-thresholds", t.fix_thresholds,
                  "skip threshold re-estimation");
  train->add_flag("--fix-rate-hyper", t.fix_rate_hyper,
                  "skip per-user rate hyper resampling");
  train->add_flag("--store-states", t.store_states,
                  "persist every collected state, not just mean and last");
  train->add_option("--delta-init", t.delta_init,
                    "initial threshold gaps (default uniform)")
      ->delimiter(',');

  EvalOpts e;
  auto* ev = app.add_subcommand("eval", "rank held-out items and report "
                                        "HR/NDCG");
  ev->configurable();
  ev->fallthrough();
  ev->add_option("--checkpoint", e.checkpoint, "checkpoint directory")
      ->required();
  ev->add_option("--test", e.test, "held-out rating TSV")->required();
  ev->add_option("--train", e.train,
                 "training TSV for candidate exclusion (default: train.tsv "
                 "next to the checkpoint)");
  ev->add_option("--out", e.out, "metrics directory (default: checkpoint)");
  ev->add_option("--dataset-name", e.dataset_name,
                 "dataset column value (default: test file name)");
  ev->add_option("--s", e.s_levels, "relevance thresholds")->delimiter(',');
  ev->add_option("--N", e.top_n, "ranking cutoff");
  ev->add_flag("--graded", e.graded, "use held-out levels as gains");

  RecommendOpts rc;
  auto* rec = app.add_subcommand("recommend", "top-N unseen items per user");
  rec->configurable();
  rec->fallthrough();
  rec->add_option("--checkpoint", rc.checkpoint, "checkpoint directory")
      ->required();
  rec->add_option("--users", rc.users, "external user ids")->delimiter(',');
  rec->add_option("--users-file", rc.users_file, "file of user ids, one per "
                                                 "line");
  rec->add_option("--train", rc.train,
                  "training TSV for exclusion (default: train.tsv next to "
                  "the checkpoint)");
  rec->add_option("--out", rc.out, "output TSV path, or - for stdout");
  rec->add_option("--N", rc.top_n, "list length");

  TreeOpts tr;
  auto* tree = app.add_subcommand("export-tree", "community taxonomy as JSON "
                                                 "and DOT");
  tree->configurable();
  tree->fallthrough();
  tree->add_option("--checkpoint", tr.checkpoint, "checkpoint directory")
      ->required();
  tree->add_option("--out", tr.out, "output directory (default: checkpoint)");
  tree->add_option("--item-names", tr.item_names,
                   "TSV mapping item id to display name");
  tree->add_option("--top-items", tr.top_items, "items shown per community");
  tree->add_option("--tau", tr.tau, "prune connection weights below this");

  SynthOpts sy;
  auto* synth = app.add_subcommand("synth", "draw a synthetic dataset with "
                                            "ground truth");
  synth->configurable();
  synth->fallthrough();
  synth->add_option("--out", sy.out, "output directory")->required();
  synth->add_option("--users", sy.users, "user count");
  synth->add_option("--items", sy.items, "item count");
  synth->add_option("--k", sy.k, "community count");
  synth->add_option("--levels", sy.levels, "ordinal levels V");
  synth->add_option("--true-deltas", sy.true_deltas,
                    "generative threshold gaps (default uniform)")
      ->delimiter(',');
  synth->add_option("--seed", sy.seed, "random seed");
  synth->add_option("--r", sy.r, "gamma shape of preferences");
  synth->add_option("--gamma0", sy.gamma0, "community-scale shape budget");
  synth->add_option("--c0", sy.c0, "community-scale rate");
  synth->add_option("--eta", sy.eta, "loading Dirichlet concentration");
  synth->add_option("--e0", sy.e0, "user-rate hyper shape");
  synth->add_option("--f0", sy.f0, "user-rate hyper rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  if (dump_config) {
    std::cout << app.config_to_str(false, true);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(t, workers);
    if (*ev) return cmd_eval(e, workers);
    if (*rec) return cmd_recommend(rc, workers);
    if (*tree) return cmd_export_tree(tr);
    if (*synth) return cmd_synth(sy);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
  return 0;
}
