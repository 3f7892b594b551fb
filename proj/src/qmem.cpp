// SPDX-License-Identifier: Apache-2.0

#include "qfw/qmem.hpp"

#include <cmath>
#include <stdexcept>

namespace qfw {

DissipationStep DissipationStep::none(int n_qubits) {
  DissipationStep d;
  d.kind_ = Kind::None;
  d.n_qubits_ = n_qubits;
  return d;
}

DissipationStep DissipationStep::bit_flip(int n_qubits, double t_dec, double dt) {
  DissipationStep d;
  d.kind_ = Kind::BitFlip;
  d.n_qubits_ = n_qubits;
  d.dt_ = dt;
  const double a = std::exp(-2.0 * dt / t_dec);
  d.c_plus_ = 0.5 * (1.0 + a);
  d.c_minus_ = 0.5 * (1.0 - a);
  return d;
}

DissipationStep DissipationStep::correlated(int n_qubits, double t_dec, const std::vector<double>& moments,
                                            double dt) {
  DissipationStep d;
  d.kind_ = Kind::Correlated;
  d.n_qubits_ = n_qubits;
  d.dt_ = dt;
  const std::size_t dim = std::size_t{1} << n_qubits;
  double norm = 0.0;
  for (double m : moments) norm += m * m;
  norm = std::sqrt(norm);
  RVector ell(dim);
  for (std::size_t s = 0; s < dim; ++s) {
    double v = 0.0;
    for (int q = 0; q < n_qubits; ++q) v += moments[q] * (bit_of(s, q, n_qubits) ? -1.0 : 1.0);
    ell(s) = v / norm;
  }
  d.damp_.resize(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = ell(i) - ell(j);
      d.damp_(i, j) = std::exp(-dt * diff * diff / (2.0 * t_dec));
    }
  return d;
}

void DissipationStep::apply_in_place(Matrix& rho) const {
  switch (kind_) {
    case Kind::None:
      return;
    case Kind::BitFlip: {
      if (c_minus_ == 0.0) return;
      const Eigen::Index dim = rho.rows();
      Matrix flipped(dim, dim);
      for (int q = 0; q < n_qubits_; ++q) {
        const std::size_t m = qubit_mask(q, n_qubits_);
        for (Eigen::Index r = 0; r < dim; ++r)
          for (Eigen::Index c = 0; c < dim; ++c) flipped(r, c) = rho(r ^ m, c ^ m);
        rho = c_plus_ * rho + c_minus_ * flipped;
      }
      return;
    }
    case Kind::Correlated:
      rho.array() *= damp_.array();
      return;
  }
}

Matrix DissipationStep::apply(const Matrix& rho) const {
  Matrix out = rho;
  apply_in_place(out);
  return out;
}

NoiseGenerator build_generator(NoiseKind kind, int n_qubits, double t_dec,
                               const std::vector<double>& moments) {
  if (n_qubits < 1) throw std::invalid_argument("build_generator: need at least one qubit");
  if (t_dec <= 0.0) throw std::invalid_argument("build_generator: T_dec must be positive");
  NoiseGenerator g;
  g.kind = kind;
  g.n_qubits = n_qubits;
  g.t_dec = t_dec;
  const Eigen::Index sdim = Eigen::Index(1) << (2 * n_qubits);
  const Eigen::Index dim = Eigen::Index(1) << n_qubits;
  if (kind == NoiseKind::BitFlip) {
    Matrix s = Matrix::Zero(sdim, sdim);
    const Matrix id = Matrix::Identity(sdim, sdim);
    for (int q = 0; q < n_qubits; ++q) {
      const Matrix xq = op_on_qubit(pauli(PauliAxis::X), q, n_qubits);
      s += kron(xq.conjugate(), xq) - id;
    }
    g.superop = s / t_dec;
  } else {
    if (int(moments.size()) != n_qubits)
      throw std::invalid_argument("build_generator: moments length must equal qubit count");
    if (moments[0] <= 0.0) throw std::invalid_argument("build_generator: mu_1 must be positive");
    g.moments = moments;
    double norm2 = 0.0;
    for (double m : moments) norm2 += m * m;
    Matrix l = Matrix::Zero(dim, dim);
    for (int q = 0; q < n_qubits; ++q) l += moments[q] * op_on_qubit(pauli(PauliAxis::Z), q, n_qubits);
    l /= std::sqrt(norm2);
    const Matrix l2 = l * l;
    const Matrix id = Matrix::Identity(dim, dim);
    g.superop = (kron(l.conjugate(), l) - 0.5 * (kron(id, l2) + kron(l2.transpose(), id))) / t_dec;
  }
  return g;
}

DissipationStep NoiseGenerator::step(double dt) const {
  if (dt < 0.0) throw std::invalid_argument("NoiseGenerator::step: dt must be non-negative");
  if (dt == 0.0) return DissipationStep::none(n_qubits);
  if (kind == NoiseKind::BitFlip) return DissipationStep::bit_flip(n_qubits, t_dec, dt);
  return DissipationStep::correlated(n_qubits, t_dec, moments, dt);
}

Matrix NoiseGenerator::step_superoperator(double dt) const { return expm(dt * superop); }

double NoiseGenerator::t_single() const {
  if (kind == NoiseKind::BitFlip) return t_dec;
  double norm2 = 0.0;
  for (double m : moments) norm2 += m * m;
  return t_dec * norm2 / (moments[0] * moments[0]);
}

Matrix CPBranch::superoperator() const {
  const Eigen::Index dim = kraus.rows();
  // exp(dt D) applied column-by-column to the conjugation map.
  Matrix conj = conjugation_superop(kraus);
  Matrix out(dim * dim, dim * dim);
  for (Eigen::Index c = 0; c < conj.cols(); ++c) {
    Matrix col = unvec(conj.col(c), dim);
    dissipation->apply_in_place(col);
    out.col(c) = vec(col);
  }
  return out;
}

std::vector<CPBranch> step_maps(const Action& action, const NoiseGenerator& gen, double dt,
                                double msmt_error) {
  if (dt < 0.0) throw std::invalid_argument("step_maps: dt must be non-negative");
  if (msmt_error < 0.0 || msmt_error > 0.5)
    throw std::invalid_argument("step_maps: measurement error must lie in [0, 1/2]");
  const int n = gen.n_qubits;
  const Eigen::Index dim = Eigen::Index(1) << n;
  auto dis = std::make_shared<const DissipationStep>(gen.step(dt));

  auto unitary_branch = [&](Matrix u) {
    CPBranch b;
    b.label = "unitary";
    b.kraus = std::move(u);
    b.povm = Matrix::Identity(dim, dim);
    b.dissipation = dis;
    return std::vector<CPBranch>{std::move(b)};
  };

  switch (action.kind) {
    case ActionKind::Idle:
      return unitary_branch(Matrix::Identity(dim, dim));
    case ActionKind::Flip:
      return unitary_branch(flip_matrix(action.q1, n));
    case ActionKind::Cnot:
      return unitary_branch(cnot_matrix(action.q1, action.q2, n));
    case ActionKind::MeasureZ: {
      const double eps = msmt_error;
      std::vector<CPBranch> out;
      const Matrix p0 = projector_z(action.q1, 0, n);
      const Matrix p1 = projector_z(action.q1, 1, n);
      const double scale = (1.0 - eps) * (1.0 - eps) + eps * eps;
      for (int m = 0; m < 2; ++m) {
        CPBranch b;
        b.label = m == 0 ? "0" : "1";
        b.kraus = (1.0 - eps) * (m == 0 ? p0 : p1) + eps * (m == 0 ? p1 : p0);
        b.povm = b.kraus.adjoint() * b.kraus;
        b.dissipation = dis;
        b.prob_scale = scale;
        b.measurement = true;
        out.push_back(std::move(b));
      }
      return out;
    }
    case ActionKind::MeasureX:
    case ActionKind::MeasureY: {
      const PauliAxis axis = action.kind == ActionKind::MeasureX ? PauliAxis::X : PauliAxis::Y;
      const double eps = msmt_error;
      const Matrix pp = projector_axis(axis, action.q1, +1, n);
      const Matrix pm = projector_axis(axis, action.q1, -1, n);
      const double scale = (1.0 - eps) * (1.0 - eps) + eps * eps;
      std::vector<CPBranch> out;
      for (int m = 0; m < 2; ++m) {
        CPBranch b;
        b.label = m == 0 ? "+" : "-";
        b.kraus = (1.0 - eps) * (m == 0 ? pp : pm) + eps * (m == 0 ? pm : pp);
        b.povm = b.kraus.adjoint() * b.kraus;
        b.dissipation = dis;
        b.prob_scale = scale;
        b.measurement = true;
        out.push_back(std::move(b));
      }
      return out;
    }
  }
  throw std::invalid_argument("step_maps: unknown action kind");
}

LogicalFrame LogicalFrame::initial(int n_qubits, int data_qubit) {
  LogicalFrame f;
  f.n_qubits = n_qubits;
  Matrix down(2, 2);
  down << 0, 0, 0, 1;  // |1><1|
  auto build = [&](const Matrix& data_part) {
    Matrix m = Matrix::Identity(1, 1);
    for (int q = 0; q < n_qubits; ++q) m = kron(m, q == data_qubit ? data_part : down);
    return m;
  };
  f.rho0 = build(0.5 * Matrix::Identity(2, 2));
  f.dx = build(0.5 * pauli(PauliAxis::X));
  f.dy = build(0.5 * pauli(PauliAxis::Y));
  f.dz = build(0.5 * pauli(PauliAxis::Z));
  return f;
}

Matrix LogicalFrame::reconstruct(const Vec3& n) const {
  Matrix num = rho0 + n(0) * dx + n(1) * dy + n(2) * dz;
  const double den = 1.0 + n.dot(trace_bias());
  return num / den;
}

Vec3 LogicalFrame::trace_bias() const {
  return Vec3(dx.trace().real(), dy.trace().real(), dz.trace().real());
}

LogicalFrame LogicalFrame::apply_unitary(const Matrix& u) const {
  LogicalFrame out = *this;
  const Matrix ud = u.adjoint();
  out.rho0 = u * rho0 * ud;
  out.dx = u * dx * ud;
  out.dy = u * dy * ud;
  out.dz = u * dz * ud;
  return out;
}

LogicalFrame evolve_frame(const LogicalFrame& frame, const CPBranch& branch) {
  LogicalFrame out;
  out.n_qubits = frame.n_qubits;
  out.rho0 = branch.apply(frame.rho0);
  const double norm = out.rho0.trace().real();
  if (norm < 1e-14)
    throw std::runtime_error("evolve_frame: branch normalizer below 1e-14 (zero-probability branch)");
  out.rho0 /= norm;
  out.dx = branch.apply(frame.dx) / norm;
  out.dy = branch.apply(frame.dy) / norm;
  out.dz = branch.apply(frame.dz) / norm;
  out.evolve_count = frame.evolve_count + 1;
  if (out.evolve_count % 50 == 0) {
    out.rho0 = 0.5 * (out.rho0 + out.rho0.adjoint()).eval();
    out.dx = 0.5 * (out.dx + out.dx.adjoint()).eval();
    out.dy = 0.5 * (out.dy + out.dy.adjoint()).eval();
    out.dz = 0.5 * (out.dz + out.dz.adjoint()).eval();
  }
  return out;
}

std::pair<int, double> sample_branch(const std::vector<CPBranch>& branches, const LogicalFrame& frame,
                                     Rng& rng) {
  if (branches.size() == 1) return {0, 1.0};
  std::vector<double> probs(branches.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    probs[i] = branches[i].probability(frame.rho0);
    sum += probs[i];
  }
  if (std::abs(sum - 1.0) > 1e-8)
    throw std::runtime_error("sample_branch: branch probabilities do not sum to 1");
  // Zero-probability branches are excluded from the draw.
  const double u = rng.uniform();
  double acc = 0.0;
  int chosen = -1;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    if (probs[i] < kBranchProbFloor) continue;
    acc += probs[i];
    chosen = int(i);
    if (u < acc) break;
  }
  if (chosen < 0) throw std::runtime_error("sample_branch: all branches below probability floor");
  return {chosen, probs[chosen]};
}

std::pair<Vec3, bool> measurement_bias(const LogicalFrame& frame, const Action& measurement) {
  if (!measurement.is_measurement())
    throw std::invalid_argument("measurement_bias: action is not a measurement");
  PauliAxis axis = PauliAxis::Z;
  if (measurement.kind == ActionKind::MeasureX) axis = PauliAxis::X;
  if (measurement.kind == ActionKind::MeasureY) axis = PauliAxis::Y;
  // P_+ - P_- is the Pauli operator of the measured variable itself.
  const Matrix op = op_on_qubit(pauli(axis), measurement.q1, frame.n_qubits);
  Vec3 db((op * frame.dx).trace().real(), (op * frame.dy).trace().real(), (op * frame.dz).trace().real());
  const bool destructive = db.cwiseAbs().maxCoeff() > kDestructiveBiasTol;
  return {db, destructive};
}

}  // namespace qfw
