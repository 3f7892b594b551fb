// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "qfw/qmem.hpp"

namespace qfw {

// Minimization shortcut over the Bloch sphere. Axis is valid for CHZ frames,
// Equator for collective dephasing; Grid is the general fallback.
enum class RqMethod { Axis, Equator, Grid };

struct RqResult {
  double value = 0.0;
  Vec3 minimizer = Vec3::UnitZ();
};

// Recoverable quantum information: min_n || sum_j n_j delta_j ||_1.
RqResult recoverable_q_info(const LogicalFrame& frame, RqMethod method);

// Trace norm of the delta combination along a fixed Bloch direction.
double rq_along(const LogicalFrame& frame, const Vec3& n);

// Probability-weighted R_Q over the measurement branches of one action.
double expected_q_info(const LogicalFrame& frame, const std::vector<CPBranch>& branches, RqMethod method);

// Worst-case overlap between the target state and the reduced final state.
double overlap_worst_case(const LogicalFrame& frame, int target_qubit);

// True for qubits whose reduced delta components are non-vanishing, i.e. that
// provably carry logical-qubit information.
std::vector<bool> qubit_info_flags(const LogicalFrame& frame, double tol = 1e-9);

// T_eff from <R_Q(horizon)> = exp(-2 horizon / T_eff). Returns +inf when the
// mean equals 1; throws std::domain_error outside (0, 1].
double effective_decay_time(double mean_rq_final, double horizon);

struct MetricReport {
  double rq = 0.0;
  double rq_expected = 0.0;
  double overlap = 0.0;
  std::vector<bool> qubit_flags;
  Vec3 minimizer = Vec3::UnitZ();
};

MetricReport metric_report(const LogicalFrame& frame, RqMethod method, int target_qubit);

}  // namespace qfw
