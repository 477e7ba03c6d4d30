#include "oggbn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "oggbn/errors.hpp"

namespace oggbn {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "matrix files are little-endian and written verbatim");

namespace {

constexpr char kMagic[4] = {'O', 'G', 'M', '1'};

void mean_into(std::vector<double>& mean, const std::vector<double>& x,
               double n) {
  if (mean.size() != x.size())
    throw BadDimensions("state shape changed between collected samples");
  for (std::size_t i = 0; i < x.size(); ++i)
    mean[i] += (x[i] - mean[i]) / n;
}

Matrix vec_matrix(const std::vector<double>& v) {
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
  return m;
}

std::vector<double> matrix_vec(const Matrix& m) {
  if (m.rows() != 1)
    throw ParseError("expected a 1-row vector matrix, got " +
                     std::to_string(m.rows()) + " rows");
  return m.storage();
}

std::string state_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

// Matrices of one state, written under a common directory.
void write_state_matrices(const fs::path& dir,
                          const std::vector<Matrix>& theta,
                          const std::vector<Matrix>& phi,
                          const std::vector<std::vector<double>>& u,
                          const std::vector<std::vector<double>>& c_rate,
                          const std::vector<double>& r) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < theta.size(); ++t) {
    const std::string suffix = std::to_string(t) + ".bin";
    write_matrix_file((dir / ("theta_" + suffix)).string(), theta[t]);
    write_matrix_file((dir / ("phi_" + suffix)).string(), phi[t]);
    write_matrix_file((dir / ("u_" + suffix)).string(), vec_matrix(u[t]));
    write_matrix_file((dir / ("c_rate_" + suffix)).string(),
                      vec_matrix(c_rate[t]));
  }
  write_matrix_file((dir / "r.bin").string(), vec_matrix(r));
}

void read_state_matrices(const fs::path& dir, unsigned T,
                         std::vector<Matrix>& theta, std::vector<Matrix>& phi,
                         std::vector<std::vector<double>>& u,
                         std::vector<std::vector<double>>& c_rate,
                         std::vector<double>& r) {
  theta.resize(T);
  phi.resize(T);
  u.resize(T);
  c_rate.resize(T);
  for (unsigned t = 0; t < T; ++t) {
    const std::string suffix = std::to_string(t) + ".bin";
    theta[t] = read_matrix_file((dir / ("theta_" + suffix)).string());
    phi[t] = read_matrix_file((dir / ("phi_" + suffix)).string());
    u[t] = matrix_vec(read_matrix_file((dir / ("u_" + suffix)).string()));
    c_rate[t] =
        matrix_vec(read_matrix_file((dir / ("c_rate_" + suffix)).string()));
  }
  r = matrix_vec(read_matrix_file((dir / "r.bin").string()));
}

void write_id_map(const fs::path& path, const IdMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < map.names.size(); ++i)
    out << i << '\t' << map.names[i] << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

IdMap read_id_map(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  IdMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected index<TAB>id");
    const auto idx = std::stoull(line.substr(0, tab));
    if (idx != map.names.size())
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": indices must be dense and in order");
    map.intern(line.substr(tab + 1));
  }
  return map;
}

json hyper_json(const Hyper& h) {
  return {{"r", h.r},     {"gamma0", h.gamma0}, {"c0", h.c0},
          {"eta", h.eta}, {"e0", h.e0},         {"f0", h.f0}};
}

Hyper hyper_from_json(const json& j) {
  Hyper h;
  h.r = j.at("r").get<double>();
  h.gamma0 = j.at("gamma0").get<double>();
  h.c0 = j.at("c0").get<double>();
  h.eta = j.at("eta").get<double>();
  h.e0 = j.at("e0").get<double>();
  h.f0 = j.at("f0").get<double>();
  return h;
}

}  // namespace

void write_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::uint64_t rows = m.rows();
  const std::uint64_t cols = m.cols();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!out) throw Error("write failed: " + path);
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  char magic[4];
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError(path + ": not a matrix file");
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in) throw ParseError(path + ": truncated header");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in || in.gcount() !=
                 static_cast<std::streamsize>(rows * cols * sizeof(double)))
    throw ParseError(path + ": truncated payload");
  return m;
}

void StateMean::add(const DeepState& s) {
  ++count;
  if (count == 1) {
    theta = s.theta;
    phi = s.phi;
    u = s.u;
    c_rate = s.c_rate;
    r = s.r;
    deltas = s.tm.delta;
    return;
  }
  const auto n = static_cast<double>(count);
  if (theta.size() != s.theta.size())
    throw BadDimensions("layer count changed between collected samples");
  for (std::size_t t = 0; t < theta.size(); ++t) {
    mean_into(theta[t].storage(), s.theta[t].storage(), n);
    mean_into(phi[t].storage(), s.phi[t].storage(), n);
    mean_into(u[t], s.u[t], n);
    mean_into(c_rate[t], s.c_rate[t], n);
  }
  mean_into(r, s.r, n);
  mean_into(deltas, s.tm.delta, n);
}

DeepState to_layered(const OgfaState& s) {
  DeepState d;
  d.theta = {s.theta};
  d.phi = {s.phi};
  d.u = {s.u};
  d.c_rate = {s.c_user};
  d.r = s.r;
  d.tm = s.tm;
  d.hyper = s.hyper;
  d.widths = {s.k_comm()};
  d.sweep = s.sweep;
  return d;
}

OgfaState to_shallow(const DeepState& d) {
  if (d.depth() != 1)
    throw BadDimensions("shallow view requires a single-layer state");
  OgfaState s;
  s.theta = d.theta[0];
  s.phi = d.phi[0];
  s.u = d.u[0];
  s.r = d.r;
  s.c_user = d.c_rate[0];
  s.tm = d.tm;
  s.hyper = d.hyper;
  s.sweep = d.sweep;
  return s;
}

void save_checkpoint(const std::string& dir, const Checkpoint& c) {
  const fs::path root(dir);
  fs::create_directories(root);

  json manifest;
  manifest["format"] = 1;
  manifest["kind"] = c.kind;
  manifest["n_users"] = c.last.n_users();
  manifest["n_items"] = c.last.n_items();
  manifest["widths"] = c.last.widths;
  manifest["V"] = c.V;
  manifest["sweep"] = c.last.sweep;
  manifest["hyper"] = hyper_json(c.last.hyper);
  manifest["delta_last"] = c.last.tm.delta;
  manifest["delta_mean"] = c.mean.deltas;
  manifest["mean_count"] = c.mean.count;
  manifest["n_states"] = c.states.size();
  {
    std::vector<std::uint64_t> sweeps;
    for (const auto& s : c.states) sweeps.push_back(s.sweep);
    manifest["state_sweeps"] = sweeps;
  }

  std::ofstream out(root / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw Error("write failed: " + (root / "manifest.json").string());

  write_id_map(root / "users.tsv", c.users);
  write_id_map(root / "items.tsv", c.items);

  write_state_matrices(root / "last", c.last.theta, c.last.phi, c.last.u,
                       c.last.c_rate, c.last.r);
  if (c.mean.count > 0)
    write_state_matrices(root / "mean", c.mean.theta, c.mean.phi, c.mean.u,
                         c.mean.c_rate, c.mean.r);
  for (std::size_t i = 0; i < c.states.size(); ++i) {
    const fs::path sdir = root / "states" / state_dir_name(i);
    const auto& s = c.states[i];
    write_state_matrices(sdir, s.theta, s.phi, s.u, s.c_rate, s.r);
    write_matrix_file((sdir / "deltas.bin").string(),
                      vec_matrix(s.tm.delta));
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path))
    throw MissingCheckpoint("no manifest under " + dir);
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw MissingCheckpoint("cannot open " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  Checkpoint c;
  try {
    c.kind = manifest.at("kind").get<std::string>();
    c.V = manifest.at("V").get<std::uint32_t>();
    c.last.widths = manifest.at("widths").get<std::vector<std::uint32_t>>();
    c.last.sweep = manifest.at("sweep").get<std::uint64_t>();
    c.last.hyper = hyper_from_json(manifest.at("hyper"));
    c.last.tm =
        from_deltas(manifest.at("delta_last").get<std::vector<double>>());
    c.mean.deltas = manifest.at("delta_mean").get<std::vector<double>>();
    c.mean.count = manifest.at("mean_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const unsigned T = static_cast<unsigned>(c.last.widths.size());

  read_state_matrices(root / "last", T, c.last.theta, c.last.phi, c.last.u,
                      c.last.c_rate, c.last.r);
  if (c.mean.count > 0)
    read_state_matrices(root / "mean", T, c.mean.theta, c.mean.phi, c.mean.u,
                        c.mean.c_rate, c.mean.r);

  const auto n_states = manifest.value("n_states", std::size_t{0});
  std::vector<std::uint64_t> sweeps;
  if (manifest.contains("state_sweeps"))
    sweeps = manifest["state_sweeps"].get<std::vector<std::uint64_t>>();
  for (std::size_t i = 0; i < n_states; ++i) {
    const fs::path sdir = root / "states" / state_dir_name(i);
    DeepState s;
    s.widths = c.last.widths;
    s.hyper = c.last.hyper;
    s.sweep = i < sweeps.size() ? sweeps[i] : 0;
    read_state_matrices(sdir, T, s.theta, s.phi, s.u, s.c_rate, s.r);
    s.tm = from_deltas(
        matrix_vec(read_matrix_file((sdir / "deltas.bin").string())));
    c.states.push_back(std::move(s));
  }

  c.users = read_id_map(root / "users.tsv");
  c.items = read_id_map(root / "items.tsv");
  return c;
}

}  // namespace oggbn
