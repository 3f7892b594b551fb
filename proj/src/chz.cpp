// SPDX-License-Identifier: Apache-2.0

#include "qfw/chz.hpp"

#include <bit>
#include <cmath>

namespace qfw {

namespace {

void apply_mix(const RMatrix& t, RVector& v) { v = t * v; }

void apply_mix(const RMatrix& t, CVector& v) {
  RVector re = t * v.real();
  RVector im = t * v.imag();
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(re(i), im(i));
}

template <typename Vec>
Vec permute_cnot(const Vec& v, std::size_t cmask, std::size_t tmask) {
  Vec out(v.size());
  for (std::size_t s = 0; s < std::size_t(v.size()); ++s) {
    const std::size_t sp = (s & cmask) ? (s ^ tmask) : s;
    out(sp) = v(s);
  }
  return out;
}

template <typename Vec>
Vec permute_xor(const Vec& v, std::size_t mask) {
  Vec out(v.size());
  for (std::size_t s = 0; s < std::size_t(v.size()); ++s) out(s ^ mask) = v(s);
  return out;
}

}  // namespace

ChzFrame ChzFrame::initial(int n_qubits, int data_qubit) {
  ChzFrame f;
  f.n_qubits = n_qubits;
  const std::size_t dim = f.dim();
  f.coherence_mask = std::uint32_t(qubit_mask(data_qubit, n_qubits));
  f.d0 = RVector::Zero(dim);
  f.dz = RVector::Zero(dim);
  f.dx = CVector::Zero(dim);
  f.dy = CVector::Zero(dim);
  // Ancillas down (|1>), data qubit maximally mixed.
  std::size_t rest = 0;
  for (int q = 0; q < n_qubits; ++q)
    if (q != data_qubit) rest |= qubit_mask(q, n_qubits);
  const std::size_t up = rest;                          // data bit 0
  const std::size_t dn = rest | f.coherence_mask;       // data bit 1
  f.d0(up) = 0.5;
  f.d0(dn) = 0.5;
  f.dz(up) = 0.5;
  f.dz(dn) = -0.5;
  f.dx(up) = 0.5;   // entry at (up, dn)
  f.dx(dn) = 0.5;   // Hermitian partner
  f.dy(up) = Complex(0.0, -0.5);
  f.dy(dn) = Complex(0.0, 0.5);
  return f;
}

LogicalFrame ChzFrame::to_dense() const {
  LogicalFrame f;
  f.n_qubits = n_qubits;
  f.evolve_count = evolve_count;
  const std::size_t d = dim();
  f.rho0 = Matrix::Zero(d, d);
  f.dz = Matrix::Zero(d, d);
  f.dx = Matrix::Zero(d, d);
  f.dy = Matrix::Zero(d, d);
  for (std::size_t s = 0; s < d; ++s) {
    f.rho0(s, s) = d0(s);
    f.dz(s, s) = dz(s);
    f.dx(s, s ^ coherence_mask) = dx(s);
    f.dy(s, s ^ coherence_mask) = dy(s);
  }
  return f;
}

std::vector<PauliWord> ChzFrame::stabilizers() const {
  // Basis of z-masks orthogonal to F over GF(2): unit masks outside F plus
  // in-F pairs anchored at the lowest set bit of F.
  std::vector<std::uint32_t> masks;
  const std::uint32_t f = coherence_mask;
  if (f == 0) {
    for (int q = 0; q < n_qubits; ++q) masks.push_back(std::uint32_t(qubit_mask(q, n_qubits)));
  } else {
    std::uint32_t anchor = f & (~f + 1);
    for (int q = 0; q < n_qubits; ++q) {
      const std::uint32_t m = std::uint32_t(qubit_mask(q, n_qubits));
      if (!(f & m))
        masks.push_back(m);
      else if (m != anchor)
        masks.push_back(m | anchor);
    }
  }
  std::vector<PauliWord> words;
  for (std::uint32_t m : masks) {
    PauliWord w;
    w.z_mask = m;
    int sign = 0;
    bool constant = true;
    for (std::size_t s = 0; s < dim(); ++s) {
      if (std::abs(d0(s)) < 1e-12) continue;
      const int par = (std::popcount(s & std::size_t(m)) & 1) ? -1 : 1;
      if (sign == 0)
        sign = par;
      else if (sign != par)
        constant = false;
    }
    w.sign = constant && sign != 0 ? sign : +1;
    words.push_back(w);
  }
  return words;
}

double ChzFrame::rq_axis() const {
  const double nx = dx.cwiseAbs().sum();
  const double ny = dy.cwiseAbs().sum();
  const double nz = dz.cwiseAbs().sum();
  return std::min({nx, ny, nz});
}

Vec3 ChzFrame::trace_bias() const {
  Vec3 b = Vec3::Zero();
  if (coherence_mask == 0) {
    b(0) = dx.real().sum();
    b(1) = dy.real().sum();
  }
  b(2) = dz.sum();
  return b;
}

Vec3 ChzFrame::measurement_bias_z(int qubit) const {
  const std::size_t m = qubit_mask(qubit, n_qubits);
  Vec3 db = Vec3::Zero();
  for (std::size_t s = 0; s < dim(); ++s) {
    const double sgn = (s & m) ? -1.0 : 1.0;
    db(2) += sgn * dz(s);
    if (coherence_mask == 0) {
      db(0) += sgn * dx(s).real();
      db(1) += sgn * dy(s).real();
    }
  }
  return db;
}

ChzFrame chz_from_dense(const LogicalFrame& frame, double tol) {
  const std::size_t d = std::size_t{1} << frame.n_qubits;
  auto check_diagonal = [&](const Matrix& m, const char* what) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j && std::abs(m(i, j)) > tol)
          throw ChzConversionError(std::string("chz_from_dense: ") + what + " is not diagonal");
  };
  check_diagonal(frame.rho0, "rho0");
  check_diagonal(frame.dz, "delta_z");

  // The x/y components must live on a single XOR offset.
  std::int64_t offset = -1;
  for (const Matrix* m : {&frame.dx, &frame.dy}) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        if (std::abs((*m)(i, j)) <= tol) continue;
        const std::int64_t o = std::int64_t(i ^ j);
        if (offset < 0)
          offset = o;
        else if (offset != o)
          throw ChzConversionError("chz_from_dense: delta_x/y entries span multiple offsets");
      }
  }
  ChzFrame f;
  f.n_qubits = frame.n_qubits;
  f.evolve_count = frame.evolve_count;
  f.coherence_mask = offset < 0 ? 0 : std::uint32_t(offset);
  f.d0 = RVector::Zero(d);
  f.dz = RVector::Zero(d);
  f.dx = CVector::Zero(d);
  f.dy = CVector::Zero(d);
  for (std::size_t s = 0; s < d; ++s) {
    f.d0(s) = frame.rho0(s, s).real();
    f.dz(s) = frame.dz(s, s).real();
    f.dx(s) = frame.dx(s, s ^ f.coherence_mask);
    f.dy(s) = frame.dy(s, s ^ f.coherence_mask);
  }
  return f;
}

ChzDissipation ChzDissipation::none(int n_qubits) {
  ChzDissipation d;
  d.identity = true;
  d.mix = RMatrix::Identity(Eigen::Index(1) << n_qubits, Eigen::Index(1) << n_qubits);
  return d;
}

ChzDissipation ChzDissipation::bit_flip(int n_qubits, double t_dec, double dt) {
  ChzDissipation d;
  d.dt = dt;
  d.identity = dt == 0.0;
  const double a = std::exp(-2.0 * dt / t_dec);
  RMatrix q(2, 2);
  q << 0.5 * (1.0 + a), 0.5 * (1.0 - a), 0.5 * (1.0 - a), 0.5 * (1.0 + a);
  RMatrix t = RMatrix::Identity(1, 1);
  for (int i = 0; i < n_qubits; ++i) {
    RMatrix next(t.rows() * 2, t.cols() * 2);
    next.block(0, 0, t.rows(), t.cols()) = q(0, 0) * t;
    next.block(0, t.cols(), t.rows(), t.cols()) = q(0, 1) * t;
    next.block(t.rows(), 0, t.rows(), t.cols()) = q(1, 0) * t;
    next.block(t.rows(), t.cols(), t.rows(), t.cols()) = q(1, 1) * t;
    t.swap(next);
  }
  d.mix = std::move(t);
  return d;
}

namespace {

void dissipate(ChzFrame& f, const ChzDissipation& dis) {
  if (dis.identity) return;
  apply_mix(dis.mix, f.d0);
  apply_mix(dis.mix, f.dz);
  apply_mix(dis.mix, f.dx);
  apply_mix(dis.mix, f.dy);
}

void tick(ChzFrame& f) {
  f.evolve_count += 1;
  if (f.evolve_count % 50 == 0 && f.coherence_mask != 0) {
    // Re-impose the Hermitian pairing to control round-off drift.
    for (std::size_t s = 0; s < f.dim(); ++s) {
      const std::size_t p = s ^ f.coherence_mask;
      if (p < s) continue;
      const Complex cx = 0.5 * (f.dx(s) + std::conj(f.dx(p)));
      f.dx(s) = cx;
      f.dx(p) = std::conj(cx);
      const Complex cy = 0.5 * (f.dy(s) + std::conj(f.dy(p)));
      f.dy(s) = cy;
      f.dy(p) = std::conj(cy);
    }
  }
}

}  // namespace

std::vector<ChzStepBranch> chz_step(const ChzFrame& frame, const Action& action,
                                    const ChzDissipation& dis, double msmt_error) {
  if (msmt_error < 0.0 || msmt_error > 0.5)
    throw std::invalid_argument("chz_step: measurement error must lie in [0, 1/2]");
  const int n = frame.n_qubits;
  switch (action.kind) {
    case ActionKind::Idle: {
      ChzStepBranch b{"unitary", 1.0, frame};
      dissipate(b.frame, dis);
      tick(b.frame);
      return {std::move(b)};
    }
    case ActionKind::Flip: {
      const std::size_t m = qubit_mask(action.q1, n);
      ChzStepBranch b{"unitary", 1.0, frame};
      b.frame.d0 = permute_xor(frame.d0, m);
      b.frame.dz = permute_xor(frame.dz, m);
      b.frame.dx = permute_xor(frame.dx, m);
      b.frame.dy = permute_xor(frame.dy, m);
      dissipate(b.frame, dis);
      tick(b.frame);
      return {std::move(b)};
    }
    case ActionKind::Cnot: {
      const std::size_t cm = qubit_mask(action.q1, n);
      const std::size_t tm = qubit_mask(action.q2, n);
      ChzStepBranch b{"unitary", 1.0, frame};
      b.frame.d0 = permute_cnot(frame.d0, cm, tm);
      b.frame.dz = permute_cnot(frame.dz, cm, tm);
      b.frame.dx = permute_cnot(frame.dx, cm, tm);
      b.frame.dy = permute_cnot(frame.dy, cm, tm);
      if (frame.coherence_mask & cm) b.frame.coherence_mask = std::uint32_t(frame.coherence_mask ^ tm);
      dissipate(b.frame, dis);
      tick(b.frame);
      return {std::move(b)};
    }
    case ActionKind::MeasureZ: {
      const double eps = msmt_error;
      const double scale = (1.0 - eps) * (1.0 - eps) + eps * eps;
      std::vector<ChzStepBranch> out;
      for (int m = 0; m < 2; ++m) {
        ChzStepBranch b;
        b.label = m == 0 ? "0" : "1";
        b.frame = frame;
        double trace = 0.0;
        for (std::size_t s = 0; s < frame.dim(); ++s) {
          const double ws = (bit_of(s, action.q1, n) == m) ? (1.0 - eps) : eps;
          const double wp = (bit_of(s ^ frame.coherence_mask, action.q1, n) == m) ? (1.0 - eps) : eps;
          b.frame.d0(s) = ws * ws * frame.d0(s);
          b.frame.dz(s) = ws * ws * frame.dz(s);
          b.frame.dx(s) = ws * wp * frame.dx(s);
          b.frame.dy(s) = ws * wp * frame.dy(s);
          trace += b.frame.d0(s);
        }
        b.probability = trace / scale;
        if (trace > 1e-14) {
          b.frame.d0 /= trace;
          b.frame.dz /= trace;
          b.frame.dx /= trace;
          b.frame.dy /= trace;
        }
        dissipate(b.frame, dis);
        tick(b.frame);
        out.push_back(std::move(b));
      }
      return out;
    }
    default:
      throw std::invalid_argument("chz_step: action kind not supported by the CHZ backend");
  }
}

}  // namespace qfw
