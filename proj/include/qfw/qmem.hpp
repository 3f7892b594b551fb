// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qfw/linalg.hpp"
#include "qfw/rng.hpp"

namespace qfw {

enum class NoiseKind { BitFlip, CorrelatedDephasing };

// Exact one-step dissipation channel e^{dt D}. Bit-flip noise factorizes into
// commuting per-qubit channels; collective dephasing acts entrywise in the
// computational basis. Both closed forms agree with expm of the generator to
// machine precision.
class DissipationStep {
 public:
  static DissipationStep none(int n_qubits);
  static DissipationStep bit_flip(int n_qubits, double t_dec, double dt);
  static DissipationStep correlated(int n_qubits, double t_dec, const std::vector<double>& moments, double dt);

  void apply_in_place(Matrix& rho) const;
  Matrix apply(const Matrix& rho) const;
  double dt() const { return dt_; }
  // Per-qubit mixing weight pair (c_plus, c_minus) for the bit-flip kind.
  std::pair<double, double> bitflip_weights() const { return {c_plus_, c_minus_}; }

 private:
  enum class Kind { None, BitFlip, Correlated } kind_ = Kind::None;
  int n_qubits_ = 0;
  double dt_ = 0.0;
  double c_plus_ = 1.0, c_minus_ = 0.0;  // bit-flip mixing per qubit
  RMatrix damp_;                         // entrywise factors, correlated kind
};

struct NoiseGenerator {
  NoiseKind kind = NoiseKind::BitFlip;
  int n_qubits = 0;
  double t_dec = 0.0;
  std::vector<double> moments;  // couplings mu_q, correlated kind only
  Matrix superop;               // 4^n x 4^n generator matrix

  DissipationStep step(double dt) const;
  // expm(dt * superop); reference path used by tests and serialization.
  Matrix step_superoperator(double dt) const;
  double t_single() const;
};

NoiseGenerator build_generator(NoiseKind kind, int n_qubits, double t_dec,
                               const std::vector<double>& moments = {});

enum class ActionKind { Cnot, Flip, MeasureZ, MeasureX, MeasureY, Idle };

struct Action {
  ActionKind kind = ActionKind::Idle;
  int q1 = -1;  // control / measured / flipped qubit
  int q2 = -1;  // CNOT target
  std::string label;

  bool is_measurement() const {
    return kind == ActionKind::MeasureZ || kind == ActionKind::MeasureX || kind == ActionKind::MeasureY;
  }
  bool is_unitary() const { return !is_measurement(); }
};

// One completely positive branch of a time step: rho -> e^{dt D}(A rho A^+).
// For noisy measurements A = (1-eps) P_m + eps P_{1-m}, and branch
// probabilities carry the common normalizer (1-eps)^2 + eps^2.
struct CPBranch {
  std::string label = "unitary";
  Matrix kraus;
  Matrix povm;  // kraus^+ kraus, cached for probability evaluation
  std::shared_ptr<const DissipationStep> dissipation;
  double prob_scale = 1.0;
  bool measurement = false;

  Matrix apply(const Matrix& rho) const { return dissipation->apply(kraus * rho * kraus.adjoint()); }
  double probability(const Matrix& rho0) const {
    return (povm.transpose().cwiseProduct(rho0)).sum().real() / prob_scale;
  }
  Matrix superoperator() const;  // materialized map, for debugging dumps
};

// Branch decomposition of one time step for `action`, including trailing
// dissipation over dt. dt = 0 models quasi-instantaneous operations.
std::vector<CPBranch> step_maps(const Action& action, const NoiseGenerator& gen, double dt,
                                double msmt_error = 0.0);

struct LogicalFrame {
  int n_qubits = 0;
  Matrix rho0, dx, dy, dz;
  long evolve_count = 0;

  // Logical qubit on `data_qubit`, every other qubit prepared in |1>.
  static LogicalFrame initial(int n_qubits, int data_qubit = 0);

  const Matrix& delta(PauliAxis axis) const {
    switch (axis) {
      case PauliAxis::X: return dx;
      case PauliAxis::Y: return dy;
      default: return dz;
    }
  }
  // Density matrix for logical Bloch vector n, including the normalizing
  // denominator that matters once logical information has been revealed.
  Matrix reconstruct(const Vec3& n) const;
  // Trace vector b_j = tr(delta_j): zero while no logical information leaked.
  Vec3 trace_bias() const;
  LogicalFrame apply_unitary(const Matrix& u) const;
};

LogicalFrame evolve_frame(const LogicalFrame& frame, const CPBranch& branch);

// Draws a branch index with probability tr(P_m rho0); returns (index, prob).
std::pair<int, double> sample_branch(const std::vector<CPBranch>& branches, const LogicalFrame& frame,
                                     Rng& rng);

// Bias vector Delta b_j = tr((P_+ - P_-) delta_j) of a two-outcome
// measurement, and whether the measurement would reveal logical information.
std::pair<Vec3, bool> measurement_bias(const LogicalFrame& frame, const Action& measurement);

constexpr double kDestructiveBiasTol = 1e-9;
constexpr double kBranchProbFloor = 1e-12;

}  // namespace qfw
