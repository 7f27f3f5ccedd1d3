#pragma once

#include <complex>
#include <span>
#include <vector>

namespace barfiq::verify {

using CMatrix = std::vector<std::vector<std::complex<double>>>;

CMatrix kron(const CMatrix& a, const CMatrix& b);
CMatrix matmul(const CMatrix& a, const CMatrix& b);
CMatrix identity(std::size_t n);

/// Full 2^n × 2^n unitary for RY on one qubit (0-based, qubit 0 = MSB).
CMatrix ry_unitary(std::size_t n_qubits, std::size_t qubit, double theta);
/// Permutation matrix of CNOT built from its truth table.
CMatrix cnot_unitary(std::size_t n_qubits, std::size_t control, std::size_t target);

/// Applies every gate of the layered RY + ring-CNOT circuit as an explicit
/// dense matrix to |0...0>.
std::vector<std::complex<double>> dense_circuit_state(std::span<const double> angles, std::size_t n_qubits,
                                                      std::size_t depth);

}  // namespace barfiq::verify
