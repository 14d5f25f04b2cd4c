#pragma once

// Portable random streams. std::*_distribution output is implementation
// defined, so draws are built directly from mt19937_64 words to keep result
// files byte-identical across standard libraries.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace collapse::rng {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream with the given index: master ^ splitmix64(index).
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return master ^ splitmix64(index);
}

/// Uniform double in [0, 1) from the top 53 bits of one engine word.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller (one value per call; the partner is discarded).
inline double normal(Engine& eng) {
  double u1 = uniform01(eng);
  while (u1 <= 0.0) u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::complex<double> complex_normal(Engine& eng) {
  const double re = normal(eng);
  const double im = normal(eng);
  return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
}

/// Matrix with i.i.d. standard complex Gaussian entries.
inline Eigen::MatrixXcd ginibre(Eigen::Index rows, Eigen::Index cols, Engine& eng) {
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = complex_normal(eng);
  return m;
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase of R's diagonal removed).
inline Eigen::MatrixXcd haar_unitary(Eigen::Index dim, Engine& eng) {
  const Eigen::MatrixXcd z = ginibre(dim, dim, eng);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double mag = std::abs(r(j, j));
    if (mag > 0.0) q.col(j) *= r(j, j) / mag;
  }
  return q;
}

/// Haar-random unit vector.
inline Eigen::VectorXcd haar_vector(Eigen::Index dim, Engine& eng) {
  Eigen::VectorXcd v = ginibre(dim, 1, eng);
  return v / v.norm();
}

}  // namespace collapse::rng
