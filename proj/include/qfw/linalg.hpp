// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace qfw {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;

enum class PauliAxis { X, Y, Z };

// Qubit 0 is the most significant bit of a basis-state index.
inline int bit_of(std::size_t state, int qubit, int n_qubits) {
  return static_cast<int>((state >> (n_qubits - 1 - qubit)) & 1u);
}
inline std::size_t qubit_mask(int qubit, int n_qubits) {
  return std::size_t{1} << (n_qubits - 1 - qubit);
}

Matrix pauli(PauliAxis axis);
Matrix kron(const Matrix& a, const Matrix& b);

// Single-qubit operator embedded at position `qubit` of an n-qubit register.
Matrix op_on_qubit(const Matrix& op, int qubit, int n_qubits);
Matrix cnot_matrix(int control, int target, int n_qubits);
Matrix flip_matrix(int qubit, int n_qubits);

// Projector onto outcome `m` (0 or 1) of a z measurement on `qubit`.
Matrix projector_z(int qubit, int m, int n_qubits);
// Projector onto the +/- eigenspace of sigma_x or sigma_y on `qubit`.
Matrix projector_axis(PauliAxis axis, int qubit, int sign, int n_qubits);

// vec/unvec with column-major stacking, so vec(A rho B) = kron(B^T, A) vec(rho).
CVector vec(const Matrix& m);
Matrix unvec(const CVector& v, Eigen::Index rows);
Matrix conjugation_superop(const Matrix& a);  // rho -> a rho a^dagger

// Matrix exponential by scaling-and-squaring with a diagonal Pade approximant.
Matrix expm(const Matrix& a);

// Sum of absolute eigenvalues of a Hermitian matrix. Throws if the input
// deviates from Hermiticity by more than `tol` (max abs entry of M - M^+).
double trace_norm(const Matrix& m, double tol = 1e-8);

double max_abs(const Matrix& m);
bool is_hermitian(const Matrix& m, double tol = 1e-10);

// Partial trace keeping only `qubit`; returns a 2x2 matrix.
Matrix partial_trace_to_qubit(const Matrix& m, int qubit, int n_qubits);

// Vertices of an icosphere (subdivided icosahedron), deduplicated unit vectors.
std::vector<Vec3> icosphere_vertices(int subdivisions);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace qfw
