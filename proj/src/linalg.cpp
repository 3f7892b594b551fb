// SPDX-License-Identifier: Apache-2.0

#include "qfw/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace qfw {

Matrix pauli(PauliAxis axis) {
  Matrix m(2, 2);
  switch (axis) {
    case PauliAxis::X:
      m << 0, 1, 1, 0;
      break;
    case PauliAxis::Y:
      m << 0, Complex(0, -1), Complex(0, 1), 0;
      break;
    case PauliAxis::Z:
      m << 1, 0, 0, -1;
      break;
  }
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix op_on_qubit(const Matrix& op, int qubit, int n_qubits) {
  if (qubit < 0 || qubit >= n_qubits) throw std::invalid_argument("op_on_qubit: qubit out of range");
  const Eigen::Index left = Eigen::Index(1) << qubit;
  const Eigen::Index right = Eigen::Index(1) << (n_qubits - 1 - qubit);
  return kron(kron(Matrix::Identity(left, left), op), Matrix::Identity(right, right));
}

Matrix cnot_matrix(int control, int target, int n_qubits) {
  if (control == target) throw std::invalid_argument("cnot_matrix: control equals target");
  const std::size_t dim = std::size_t{1} << n_qubits;
  Matrix m = Matrix::Zero(dim, dim);
  const std::size_t tmask = qubit_mask(target, n_qubits);
  for (std::size_t s = 0; s < dim; ++s) {
    std::size_t sp = bit_of(s, control, n_qubits) ? (s ^ tmask) : s;
    m(sp, s) = 1.0;
  }
  return m;
}

Matrix flip_matrix(int qubit, int n_qubits) { return op_on_qubit(pauli(PauliAxis::X), qubit, n_qubits); }

Matrix projector_z(int qubit, int m, int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  Matrix p = Matrix::Zero(dim, dim);
  for (std::size_t s = 0; s < dim; ++s)
    if (bit_of(s, qubit, n_qubits) == m) p(s, s) = 1.0;
  return p;
}

Matrix projector_axis(PauliAxis axis, int qubit, int sign, int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  return 0.5 * (Matrix::Identity(dim, dim) + double(sign) * op_on_qubit(pauli(axis), qubit, n_qubits));
}

CVector vec(const Matrix& m) {
  CVector v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) v(k++) = m(i, j);
  return v;
}

Matrix unvec(const CVector& v, Eigen::Index rows) {
  Matrix m(rows, v.size() / rows);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = v(k++);
  return m;
}

Matrix conjugation_superop(const Matrix& a) { return kron(a.conjugate(), a); }

Matrix expm(const Matrix& a) {
  // [13/13] Pade approximant, scaling chosen so the scaled norm is < 0.5.
  const Eigen::Index n = a.rows();
  double norm = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) col += std::abs(a(i, j));
    norm = std::max(norm, col);
  }
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, int(std::ceil(std::log2(norm / 0.5))));
  Matrix as = a / std::pow(2.0, squarings);

  static const std::array<double, 14> b = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};
  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a2 * a4;
  Matrix u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
  Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  Matrix num = v + u;
  Matrix den = v - u;
  Matrix r = den.partialPivLu().solve(num);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

double max_abs(const Matrix& m) {
  double v = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) v = std::max(v, std::abs(m(i, j)));
  return v;
}

bool is_hermitian(const Matrix& m, double tol) { return max_abs(m - m.adjoint()) <= tol; }

double trace_norm(const Matrix& m, double tol) {
  if (!is_hermitian(m, tol)) throw std::runtime_error("trace_norm: input is not Hermitian within tolerance");
  Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

Matrix partial_trace_to_qubit(const Matrix& m, int qubit, int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t qmask = qubit_mask(qubit, n_qubits);
  Matrix out = Matrix::Zero(2, 2);
  for (std::size_t s = 0; s < dim; ++s) {
    const int bs = (s & qmask) ? 1 : 0;
    // Partner index with the kept qubit toggled; all other qubits are traced
    // out, which keeps only index pairs agreeing outside `qubit`.
    out(bs, bs) += m(s, s);
    const std::size_t sp = s ^ qmask;
    out(bs, 1 - bs) += m(s, sp);
  }
  return out;
}

std::vector<Vec3> icosphere_vertices(int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec3 m = (verts[a] + verts[b]).normalized();
    verts.push_back(m);
    int idx = int(verts.size()) - 1;
    midpoint.emplace(key, idx);
    return idx;
  };
  for (int s = 0; s < subdivisions; ++s) {
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces.swap(next);
  }
  return verts;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fnv1a64_file: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace qfw
