#pragma once

// Bundled Kraus families. None of these is specific to a particular collapse
// model; they are the standard single-site channels used as test fixtures and
// as lattice collapse events.

#include <cmath>
#include <string>
#include <vector>

#include "collapse/random.hpp"
#include "collapse/semigroup.hpp"

namespace collapse::families {

template <typename Real = double>
BasicKrausFamily<Real> identity(Index dim) {
  return BasicKrausFamily<Real>(dim, {{Real(1), Matrix<Real>::Identity(dim, dim)}}, "identity");
}

/// Single unitary branch.
template <typename Real>
BasicKrausFamily<Real> unitary(const Matrix<Real>& u, std::string label = "unitary") {
  require_square(u, "unitary");
  return BasicKrausFamily<Real>(u.rows(), {{Real(1), u}}, std::move(label));
}

/// Qubit dephasing: {sqrt(1-p) I, sqrt(p) Z}; off-diagonals scale by 1 - 2p.
template <typename Real = double>
BasicKrausFamily<Real> dephasing(Real p) {
  if (!(p >= Real(0) && p <= Real(1))) throw ValidationError("dephasing probability must lie in [0,1]", "p");
  std::vector<KrausBranch<Real>> b;
  if (p < Real(1)) b.push_back({Real(1), std::sqrt(Real(1) - p) * Pauli<Real>::I()});
  if (p > Real(0)) b.push_back({Real(1), std::sqrt(p) * Pauli<Real>::Z()});
  return BasicKrausFamily<Real>(2, std::move(b), "dephasing");
}

/// Qubit depolarizing: rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z).
template <typename Real = double>
BasicKrausFamily<Real> depolarizing(Real p) {
  if (!(p >= Real(0) && p <= Real(1))) throw ValidationError("depolarizing probability must lie in [0,1]", "p");
  const Real q = std::sqrt(p / Real(3));
  return BasicKrausFamily<Real>(2,
                                {{Real(1), std::sqrt(Real(1) - p) * Pauli<Real>::I()},
                                 {Real(1), q * Pauli<Real>::X()},
                                 {Real(1), q * Pauli<Real>::Y()},
                                 {Real(1), q * Pauli<Real>::Z()}},
                                "depolarizing");
}

/// Qubit amplitude damping with decay probability gamma.
template <typename Real = double>
BasicKrausFamily<Real> amplitude_damping(Real gamma) {
  if (!(gamma >= Real(0) && gamma <= Real(1)))
    throw ValidationError("amplitude damping probability must lie in [0,1]", "gamma");
  Matrix<Real> k0 = Matrix<Real>::Zero(2, 2);
  Matrix<Real> k1 = Matrix<Real>::Zero(2, 2);
  k0(0, 0) = Real(1);
  k0(1, 1) = std::sqrt(Real(1) - gamma);
  k1(0, 1) = std::sqrt(gamma);
  return BasicKrausFamily<Real>(2, {{Real(1), k0}, {Real(1), k1}}, "amplitude_damping");
}

/// Projective measurement in the computational basis of a dim-level site.
template <typename Real = double>
BasicKrausFamily<Real> measure_basis(Index dim) {
  std::vector<KrausBranch<Real>> b;
  for (Index k = 0; k < dim; ++k) {
    Matrix<Real> p = Matrix<Real>::Zero(dim, dim);
    p(k, k) = Real(1);
    b.push_back({Real(1), std::move(p)});
  }
  return BasicKrausFamily<Real>(dim, std::move(b), "measure");
}

/// Gaussian localization on the positions 0..dim-1 of a site: one branch per
/// centre c with K_c proportional to diag(exp(-(j-c)^2 / (4 width^2))),
/// normalized so that the branches are complete on the finite grid.
template <typename Real = double>
BasicKrausFamily<Real> localization(Index dim, Real width) {
  if (!(width > Real(0))) throw ValidationError("localization width must be positive", "width");
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> g(dim, dim);  // g(c, j)
  for (Index c = 0; c < dim; ++c)
    for (Index j = 0; j < dim; ++j) {
      const Real x = Real(j - c);
      g(c, j) = std::exp(-x * x / (Real(2) * width * width));
    }
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> norm = g.colwise().sum().transpose();
  std::vector<KrausBranch<Real>> b;
  for (Index c = 0; c < dim; ++c) {
    Matrix<Real> k = Matrix<Real>::Zero(dim, dim);
    for (Index j = 0; j < dim; ++j) k(j, j) = std::sqrt(g(c, j) / norm(j));
    b.push_back({Real(1), std::move(k)});
  }
  return BasicKrausFamily<Real>(dim, std::move(b), "localization");
}

/// Random family with `n_branches` branches from a Haar-random isometry
/// C^dim -> C^(dim n). Weights are drawn uniformly from [0.5, 2) and
/// compensated in the operators.
inline KrausFamily random_family(Index dim, Index n_branches, rng::Engine& eng) {
  const ComplexMatrix u = rng::haar_unitary(dim * n_branches, eng);
  std::vector<KrausBranch<double>> b;
  for (Index i = 0; i < n_branches; ++i) {
    const double w = 0.5 + 1.5 * rng::uniform01(eng);
    b.push_back({w, u.block(i * dim, 0, dim, dim) / std::sqrt(w)});
  }
  return KrausFamily(dim, std::move(b), "random");
}

/// Mixture of Haar-random unitaries with random probabilities.
inline KrausFamily random_unitary_mixture(Index dim, Index n_branches, rng::Engine& eng) {
  std::vector<double> p(static_cast<std::size_t>(n_branches));
  double total = 0.0;
  for (auto& x : p) total += (x = 0.1 + rng::uniform01(eng));
  std::vector<KrausBranch<double>> b;
  for (Index i = 0; i < n_branches; ++i) b.push_back({p[static_cast<std::size_t>(i)] / total, rng::haar_unitary(dim, eng)});
  return KrausFamily(dim, std::move(b), "random_unitary_mixture");
}

}  // namespace collapse::families
