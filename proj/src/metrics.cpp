// SPDX-License-Identifier: Apache-2.0

#include "qfw/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qfw {

double rq_along(const LogicalFrame& frame, const Vec3& n) {
  Matrix m = n(0) * frame.dx + n(1) * frame.dy + n(2) * frame.dz;
  return trace_norm(m);
}

namespace {

RqResult minimize_axis(const LogicalFrame& frame) {
  RqResult best;
  best.value = std::numeric_limits<double>::infinity();
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (const auto& a : axes) {
    const double v = rq_along(frame, a);
    if (v < best.value) {
      best.value = v;
      best.minimizer = a;
    }
  }
  return best;
}

RqResult minimize_equator(const LogicalFrame& frame) {
  auto f = [&](double phi) { return rq_along(frame, Vec3(std::cos(phi), std::sin(phi), 0.0)); };
  // The norm has period pi in phi; coarse scan then golden-section refinement.
  const int kScan = 64;
  const double kPi = 3.14159265358979323846;
  double best_phi = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    const double phi = kPi * i / kScan;
    const double v = f(phi);
    if (v < best_val) {
      best_val = v;
      best_phi = phi;
    }
  }
  double lo = best_phi - kPi / kScan;
  double hi = best_phi + kPi / kScan;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    }
  }
  const double phi = 0.5 * (lo + hi);
  RqResult r;
  r.value = std::min(f(phi), best_val);
  r.minimizer = Vec3(std::cos(phi), std::sin(phi), 0.0);
  return r;
}

RqResult minimize_grid(const LogicalFrame& frame) {
  static const std::vector<Vec3> verts = icosphere_vertices(3);  // 1280 faces
  RqResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& v : verts) {
    const double val = rq_along(frame, v);
    if (val < best.value) {
      best.value = val;
      best.minimizer = v;
    }
  }
  // Local refinement: probe tangent-plane directions with a shrinking step.
  Vec3 n = best.minimizer;
  double h = 0.15;
  for (int round = 0; round < 3; ++round) {
    for (int it = 0; it < 10; ++it) {
      Vec3 ref = std::abs(n(2)) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
      Vec3 u = n.cross(ref).normalized();
      Vec3 v = n.cross(u).normalized();
      bool moved = false;
      const Vec3 probes[4] = {u, -u, v, -v};
      for (const auto& p : probes) {
        Vec3 cand = (n + h * p).normalized();
        const double val = rq_along(frame, cand);
        if (val < best.value - 1e-15) {
          best.value = val;
          n = cand;
          moved = true;
        }
      }
      if (!moved) h *= 0.5;
    }
    h *= 0.5;
  }
  best.minimizer = n;
  return best;
}

}  // namespace

RqResult recoverable_q_info(const LogicalFrame& frame, RqMethod method) {
  switch (method) {
    case RqMethod::Axis:
      return minimize_axis(frame);
    case RqMethod::Equator:
      return minimize_equator(frame);
    case RqMethod::Grid:
      return minimize_grid(frame);
  }
  throw std::invalid_argument("recoverable_q_info: unknown method");
}

double expected_q_info(const LogicalFrame& frame, const std::vector<CPBranch>& branches, RqMethod method) {
  if (branches.size() == 1 && !branches[0].measurement) {
    return recoverable_q_info(evolve_frame(frame, branches[0]), method).value;
  }
  double acc = 0.0;
  for (const auto& b : branches) {
    const double p = b.probability(frame.rho0);
    if (p < kBranchProbFloor) continue;
    acc += p * recoverable_q_info(evolve_frame(frame, b), method).value;
  }
  return acc;
}

double overlap_worst_case(const LogicalFrame& frame, int target_qubit) {
  if (target_qubit < 0 || target_qubit >= frame.n_qubits)
    throw std::invalid_argument("overlap_worst_case: target qubit out of range");
  const Matrix red0 = partial_trace_to_qubit(frame.rho0, target_qubit, frame.n_qubits);
  const Matrix redj[3] = {partial_trace_to_qubit(frame.dx, target_qubit, frame.n_qubits),
                          partial_trace_to_qubit(frame.dy, target_qubit, frame.n_qubits),
                          partial_trace_to_qubit(frame.dz, target_qubit, frame.n_qubits)};
  const Vec3 bias = frame.trace_bias();
  const bool mixed0 = max_abs(red0 - 0.5 * Matrix::Identity(2, 2)) < 1e-9;
  if (mixed0 && bias.cwiseAbs().maxCoeff() < 1e-9) {
    // O_Q = (1 + mineig A)/2 with A the symmetrized overlap matrix
    // A_jk = (<e_j| red_k |e_j> + <e_k| red_j |e_k>) evaluated on the +e_j
    // single-qubit states; equals sym(tr(red_k sigma_j))/... in closed form.
    Eigen::Matrix3d a;
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        const Matrix sj = pauli(j == 0 ? PauliAxis::X : j == 1 ? PauliAxis::Y : PauliAxis::Z);
        const Matrix sk = pauli(k == 0 ? PauliAxis::X : k == 1 ? PauliAxis::Y : PauliAxis::Z);
        const double mjk = (sj * redj[k]).trace().real();
        const double mkj = (sk * redj[j]).trace().real();
        a(j, k) = 0.5 * (mjk + mkj);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a, Eigen::EigenvaluesOnly);
    const double o = 0.5 * (1.0 + es.eigenvalues().minCoeff());
    return std::min(1.0, std::max(0.0, o));
  }
  // General fallback: direct minimization over the icosphere grid.
  static const std::vector<Vec3> verts = icosphere_vertices(3);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& n : verts) {
    const Matrix rho_n = frame.reconstruct(n);
    const Matrix red = partial_trace_to_qubit(rho_n, target_qubit, frame.n_qubits);
    // |phi_n> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>
    const double theta = std::acos(std::min(1.0, std::max(-1.0, n(2))));
    const double phi = std::atan2(n(1), n(0));
    CVector ket(2);
    ket << std::cos(theta / 2.0), std::exp(Complex(0.0, phi)) * std::sin(theta / 2.0);
    const double val = (ket.adjoint() * red * ket)(0).real();
    best = std::min(best, val);
  }
  return std::min(1.0, std::max(0.0, best));
}

std::vector<bool> qubit_info_flags(const LogicalFrame& frame, double tol) {
  std::vector<bool> flags(frame.n_qubits, false);
  for (int q = 0; q < frame.n_qubits; ++q) {
    for (const auto* d : {&frame.dx, &frame.dy, &frame.dz}) {
      const Matrix red = partial_trace_to_qubit(*d, q, frame.n_qubits);
      if (trace_norm(red) > tol) {
        flags[q] = true;
        break;
      }
    }
  }
  return flags;
}

double effective_decay_time(double mean_rq_final, double horizon) {
  if (!(mean_rq_final > 0.0) || mean_rq_final > 1.0 + 1e-12)
    throw std::domain_error("effective_decay_time: mean R_Q must lie in (0, 1]");
  const double lg = std::log(std::min(mean_rq_final, 1.0));
  if (lg == 0.0) return std::numeric_limits<double>::infinity();
  return -2.0 * horizon / lg;
}

MetricReport metric_report(const LogicalFrame& frame, RqMethod method, int target_qubit) {
  MetricReport r;
  const RqResult rq = recoverable_q_info(frame, method);
  r.rq = rq.value;
  r.rq_expected = rq.value;
  r.minimizer = rq.minimizer;
  r.overlap = overlap_worst_case(frame, target_qubit);
  r.qubit_flags = qubit_info_flags(frame);
  return r;
}

}  // namespace qfw
