#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oggbn/dataio.hpp"
#include "oggbn/deep.hpp"
#include "oggbn/matrix.hpp"
#include "oggbn/ogfa.hpp"

namespace oggbn {

// One matrix per file: magic "OGM1", then rows and cols as 64-bit
// little-endian integers, then the row-major payload as binary64
// little-endian. Vectors are stored as 1 x n matrices.
void write_matrix_file(const std::string& path, const Matrix& m);
Matrix read_matrix_file(const std::string& path);

// Running elementwise mean over collected posterior states, matched
// layer-for-layer. All states added must share dimensions.
struct StateMean {
  std::vector<Matrix> theta;
  std::vector<Matrix> phi;
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> c_rate;
  std::vector<double> r;
  std::vector<double> deltas;
  std::size_t count = 0;

  void add(const DeepState& s);
};

// Single-layer view of a shallow state, sharing the checkpoint layout with
// the deep model.
DeepState to_layered(const OgfaState& s);
OgfaState to_shallow(const DeepState& s);

struct Checkpoint {
  std::string kind;  // "ogfa" or "oggbn"
  std::uint32_t V = 0;
  StateMean mean;
  DeepState last;
  std::vector<DeepState> states;  // filled only when states are persisted
  IdMap users;
  IdMap items;
};

// Writes manifest.json, id maps, and the mean/, last/ (and states/NNN/)
// matrix directories. The manifest carries dims, layer widths, V,
// hyperparameters, sweep index, and both threshold vectors with exact
// round-trip decimal encoding.
void save_checkpoint(const std::string& dir, const Checkpoint& c);

// Throws MissingCheckpoint when dir lacks a readable manifest; ParseError
// on corrupt contents.
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace oggbn
