// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfw/qmem.hpp"

namespace qfw {

// Pauli string as paired bitmasks plus a sign bit.
struct PauliWord {
  std::uint32_t x_mask = 0;
  std::uint32_t z_mask = 0;
  int sign = +1;
};

struct ChzConversionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Compressed frame for CHZ circuits (CNOT, flips, z measurements, bit-flip
// dissipation). All four components share the block structure induced by the
// coherence mask F: rho0 and delta_z are diagonal, delta_x/y live on the
// index pairs (s, s^F). The four vectors hold exactly those entries.
struct ChzFrame {
  int n_qubits = 0;
  std::uint32_t coherence_mask = 0;
  RVector d0, dz;
  CVector dx, dy;
  long evolve_count = 0;

  static ChzFrame initial(int n_qubits, int data_qubit = 0);

  std::size_t dim() const { return std::size_t{1} << n_qubits; }
  LogicalFrame to_dense() const;
  // z-type words commuting with every component, with signs taken from the
  // rho0 support where that parity is constant.
  std::vector<PauliWord> stabilizers() const;
  double rq_axis() const;
  Vec3 trace_bias() const;
  // Bias vector of a z measurement on `qubit` (cheap diagonal contraction).
  Vec3 measurement_bias_z(int qubit) const;
};

ChzFrame chz_from_dense(const LogicalFrame& frame, double tol = 1e-10);

// Population-mixing matrix of e^{dt D_bf} in the shared eigenbasis.
struct ChzDissipation {
  RMatrix mix;
  double dt = 0.0;
  bool identity = true;

  static ChzDissipation none(int n_qubits);
  static ChzDissipation bit_flip(int n_qubits, double t_dec, double dt);
};

struct ChzStepBranch {
  std::string label;
  double probability = 1.0;
  ChzFrame frame;
};

// One action step with trailing bit-flip dissipation; outcome probabilities
// and frames match the dense path. Throws for actions outside the CHZ set.
std::vector<ChzStepBranch> chz_step(const ChzFrame& frame, const Action& action,
                                    const ChzDissipation& dis, double msmt_error = 0.0);

}  // namespace qfw
