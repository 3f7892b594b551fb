// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qfw/net.hpp"

namespace qfw {

struct CheckpointMeta {
  std::string kind;  // "mlp" or "lstm"
  std::vector<int> arch;
  std::uint64_t scenario_hash = 0;
  long epoch = 0;
};

// Container: magic, schema version, architecture, scenario hash, epoch,
// then flat little-endian float64 parameter and optimizer blobs. Writes go
// through a temp file plus rename.
void save_checkpoint(const std::string& path, const net::Mlp& net, const net::AdamState& adam,
                     std::uint64_t scenario_hash, long epoch);
void save_checkpoint(const std::string& path, const net::Lstm& net, const net::AdamState& adam,
                     std::uint64_t scenario_hash, long epoch);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  net::Mlp mlp;
  net::Lstm lstm;
  net::AdamState adam;
};

LoadedCheckpoint load_checkpoint(const std::string& path);
CheckpointMeta peek_checkpoint(const std::string& path);

// Debug dump of a superoperator: rows, cols, then row-major (re, im) pairs
// as little-endian float64.
void serialize_superoperator(const Matrix& superop, std::ostream& os);
Matrix deserialize_superoperator(std::istream& is);

}  // namespace qfw
