// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "qfw/chz.hpp"
#include "qfw/metrics.hpp"
#include "qfw/qmem.hpp"
#include "qfw/rng.hpp"

namespace qfw::test {

inline Matrix random_hermitian(int dim, Rng& rng) {
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = Complex(rng.uniform_symmetric(1.0), rng.uniform_symmetric(1.0));
  return 0.5 * (m + m.adjoint());
}

// Taylor-series matrix exponential with scaling and squaring; the
// independent oracle for the production expm path.
inline Matrix series_expm(const Matrix& a) {
  double norm = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) col += std::abs(a(i, j));
    norm = std::max(norm, col);
  }
  int k = 0;
  while (norm > 0.25) {
    norm /= 2.0;
    ++k;
  }
  Matrix as = a / std::pow(2.0, k);
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int n = 1; n < 60; ++n) {
    term = (term * as) / double(n);
    sum += term;
    if (max_abs(term) < 1e-20) break;
  }
  for (int i = 0; i < k; ++i) sum = sum * sum;
  return sum;
}

// Encoded 3-qubit repetition frame inside an n-qubit register (data qubit 0
// copied onto qubits 1 and 2 by CNOTs, no noise during encoding).
inline LogicalFrame repetition_frame(int n_qubits) {
  LogicalFrame f = LogicalFrame::initial(n_qubits, 0);
  f = f.apply_unitary(cnot_matrix(0, 1, n_qubits));
  f = f.apply_unitary(cnot_matrix(0, 2, n_qubits));
  return f;
}

inline LogicalFrame idle_frame(const LogicalFrame& f, const NoiseGenerator& gen, double time) {
  Action idle{ActionKind::Idle, -1, -1, "IDLE"};
  const auto maps = step_maps(idle, gen, time);
  return evolve_frame(f, maps[0]);
}

// Max relative finite-difference error of an analytic gradient, five-point
// central stencil; entries below 1e-8 in magnitude are compared absolutely.
template <typename EvalFn>
double fd_max_rel_error(const Eigen::VectorXd& analytic, EvalFn eval, Eigen::VectorXd& theta,
                        double h = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double keep = theta(i);
    theta(i) = keep + 2 * h;
    const double f2p = eval();
    theta(i) = keep + h;
    const double f1p = eval();
    theta(i) = keep - h;
    const double f1m = eval();
    theta(i) = keep - 2 * h;
    const double f2m = eval();
    theta(i) = keep;
    const double fd = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
    const double err = std::abs(analytic(i) - fd);
    const double rel = std::abs(analytic(i)) < 1e-8 ? err : err / std::abs(analytic(i));
    worst = std::max(worst, rel);
  }
  return worst;
}

// Random action from the CHZ set on n qubits.
inline Action random_chz_action(int n_qubits, Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.45) {
    int c = int(rng.next_u64() % n_qubits);
    int t = int(rng.next_u64() % n_qubits);
    if (t == c) t = (t + 1) % n_qubits;
    return {ActionKind::Cnot, c, t, "CNOT"};
  }
  if (u < 0.6) return {ActionKind::Flip, int(rng.next_u64() % n_qubits), -1, "X"};
  if (u < 0.85) return {ActionKind::MeasureZ, int(rng.next_u64() % n_qubits), -1, "MZ"};
  return {ActionKind::Idle, -1, -1, "IDLE"};
}

}  // namespace qfw::test
