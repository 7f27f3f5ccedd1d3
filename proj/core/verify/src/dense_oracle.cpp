#include "barfiq/verify/dense_oracle.hpp"

#include <cmath>

namespace barfiq::verify {

CMatrix identity(std::size_t n) {
  CMatrix m(n, std::vector<std::complex<double>>(n));
  for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  const std::size_t ra = a.size(), ca = a[0].size(), rb = b.size(), cb = b[0].size();
  CMatrix k(ra * rb, std::vector<std::complex<double>>(ca * cb));
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < ca; ++j)
      for (std::size_t p = 0; p < rb; ++p)
        for (std::size_t q = 0; q < cb; ++q) k[i * rb + p][j * cb + q] = a[i][j] * b[p][q];
  return k;
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  const std::size_t n = a.size(), m = b[0].size(), inner = b.size();
  CMatrix c(n, std::vector<std::complex<double>>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < inner; ++k)
      for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

CMatrix ry_unitary(std::size_t n_qubits, std::size_t qubit, double theta) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  const CMatrix ry = {{c, -s}, {s, c}};
  CMatrix u = {{1.0}};
  for (std::size_t q = 0; q < n_qubits; ++q) u = kron(u, q == qubit ? ry : identity(2));
  return u;
}

CMatrix cnot_unitary(std::size_t n_qubits, std::size_t control, std::size_t target) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  CMatrix u(dim, std::vector<std::complex<double>>(dim));
  for (std::size_t col = 0; col < dim; ++col) {
    std::vector<int> bits(n_qubits);
    for (std::size_t q = 0; q < n_qubits; ++q) bits[q] = static_cast<int>((col >> (n_qubits - 1 - q)) & 1U);
    if (bits[control] == 1) bits[target] ^= 1;
    std::size_t row = 0;
    for (std::size_t q = 0; q < n_qubits; ++q) row = (row << 1) | static_cast<std::size_t>(bits[q]);
    u[row][col] = 1.0;
  }
  return u;
}

std::vector<std::complex<double>> dense_circuit_state(std::span<const double> angles, std::size_t n_qubits,
                                                      std::size_t depth) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  CMatrix total = identity(dim);
  for (std::size_t l = 0; l < depth; ++l) {
    for (std::size_t r = 0; r < n_qubits; ++r) total = matmul(ry_unitary(n_qubits, r, angles[r]), total);
    for (std::size_t r = 0; r < n_qubits; ++r) total = matmul(cnot_unitary(n_qubits, r, (r + 1) % n_qubits), total);
  }
  std::vector<std::complex<double>> psi(dim);
  for (std::size_t i = 0; i < dim; ++i) psi[i] = total[i][0];
  return psi;
}

}  // namespace barfiq::verify
