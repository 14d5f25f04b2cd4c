#pragma once

// Dense complex linear algebra substrate: states, density operators, tensor
// products, partial traces and the norms used throughout the library.
//
// Conventions: tensor factors are ordered most-significant first, so for
// factor dims (d0, d1, ..., dn-1) the basis index is
//   i = ((i0 * d1 + i1) * d2 + i2) ... ,
// which matches tensor_product(a, b) placing a's index in the major position.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "collapse/error.hpp"

namespace collapse {

using Eigen::Index;

template <typename Real>
using Complex = std::complex<Real>;
template <typename Real>
using Matrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using Vector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

using ComplexMatrix = Matrix<double>;
using ComplexVector = Vector<double>;

/// Numerical tolerances shared by the validating constructors.
struct Tolerances {
  double hermitian = 1e-12;
  double trace = 1e-12;
  double psd_floor = -1e-10;
  double normalization = 1e-12;
  Index max_dim = 4096;
};

inline constexpr Tolerances kDefaultTolerances{};

namespace detail {

inline std::string dims_str(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) {
      const auto z = m(r, c);
      if (!std::isfinite(std::real(z)) || !std::isfinite(std::imag(z))) return false;
    }
  return true;
}

}  // namespace detail

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& name) {
  if (!detail::all_finite(m)) throw ValidationError(name + " has non-finite entries", name);
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const std::string& name) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ValidationError(name + " must be a non-empty square matrix, got " +
                              detail::dims_str(m.rows(), m.cols()),
                          name);
}

/// Largest entry of |A - A^dagger|.
template <typename Derived>
auto hermiticity_residual(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return (m + m.adjoint()) * Scalar(0.5);
}

/// Normalized pure state on a finite-dimensional space.
template <typename Real>
class BasicStateVector {
 public:
  using VectorType = Vector<Real>;

  /// Normalizes `amplitudes`; rejects zero or non-finite input.
  explicit BasicStateVector(VectorType amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() == 0) throw ValidationError("state vector must be non-empty", "state");
    require_finite(amps_, "state");
    const Real n = amps_.norm();
    if (!(n > Real(0))) throw ValidationError("state vector has zero norm", "state");
    amps_ /= n;
  }

  /// Computational basis vector |k>.
  static BasicStateVector basis(Index dim, Index k) {
    if (k < 0 || k >= dim) throw ValidationError("basis index out of range", "state");
    VectorType v = VectorType::Zero(dim);
    v(k) = Real(1);
    return BasicStateVector(std::move(v));
  }

  Index dim() const noexcept { return amps_.size(); }
  const VectorType& amplitudes() const noexcept { return amps_; }
  Complex<Real> operator[](Index i) const { return amps_(i); }

  friend bool operator==(const BasicStateVector& a, const BasicStateVector& b) {
    return a.amps_.size() == b.amps_.size() && a.amps_ == b.amps_;
  }

 private:
  VectorType amps_;
};

using StateVector = BasicStateVector<double>;

/// Hermitian, unit-trace, positive semidefinite operator.
template <typename Real>
class BasicDensityOperator {
 public:
  using MatrixType = Matrix<Real>;

  /// Validates Hermiticity, trace and the eigenvalue floor.
  explicit BasicDensityOperator(MatrixType m, const Tolerances& tol = kDefaultTolerances)
      : m_(std::move(m)) {
    validate(tol, /*check_spectrum=*/true);
  }

  /// Marker for matrices that are positive by construction (outputs of
  /// completely positive maps, reduced states). Hermiticity and trace are
  /// still checked; the eigen-decomposition is skipped.
  struct PositiveByConstruction {};
  BasicDensityOperator(MatrixType m, PositiveByConstruction, const Tolerances& tol = kDefaultTolerances)
      : m_(std::move(m)) {
    validate(tol, /*check_spectrum=*/false);
  }

  static BasicDensityOperator pure(const BasicStateVector<Real>& psi) {
    return BasicDensityOperator(psi.amplitudes() * psi.amplitudes().adjoint(), PositiveByConstruction{});
  }

  static BasicDensityOperator maximally_mixed(Index dim) {
    return BasicDensityOperator(MatrixType::Identity(dim, dim) / Real(dim), PositiveByConstruction{});
  }

  Index dim() const noexcept { return m_.rows(); }
  const MatrixType& matrix() const noexcept { return m_; }

 private:
  void validate(const Tolerances& tol, bool check_spectrum) {
    require_square(m_, "density operator");
    require_finite(m_, "density operator");
    if (m_.rows() > tol.max_dim)
      throw ValidationError("density operator exceeds max dimension", "density operator");
    const Real herm = hermiticity_residual(m_);
    if (herm > Real(tol.hermitian))
      throw ValidationError("density operator not Hermitian (residual " + std::to_string(double(herm)) + ")",
                            "density operator");
    const Real tr_err = std::abs(m_.trace() - Complex<Real>(1));
    if (tr_err > Real(tol.trace))
      throw ValidationError("density operator trace differs from 1 by " + std::to_string(double(tr_err)),
                            "density operator");
    m_ = hermitian_part(m_).eval();
    if (check_spectrum) {
      Eigen::SelfAdjointEigenSolver<MatrixType> es(m_, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < Real(tol.psd_floor))
        throw ValidationError("density operator has negative eigenvalue", "density operator");
    }
  }

  MatrixType m_;
};

using DensityOperator = BasicDensityOperator<double>;

/// Kronecker product a (x) b.
template <typename DA, typename DB>
auto tensor_product(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                    Index max_dim = kDefaultTolerances.max_dim) {
  using Scalar = typename DA::Scalar;
  using Result = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index rows = a.rows() * b.rows();
  const Index cols = a.cols() * b.cols();
  if (rows > max_dim || cols > max_dim)
    throw ValidationError("tensor product dimension " + detail::dims_str(rows, cols) +
                              " exceeds the maximum " + std::to_string(max_dim),
                          "dimension");
  Result out(rows, cols);
  for (Index ic = 0; ic < a.cols(); ++ic)
    for (Index ir = 0; ir < a.rows(); ++ir)
      out.block(ir * b.rows(), ic * b.cols(), b.rows(), b.cols()) = a(ir, ic) * b;
  return out;
}

/// Product of a list of factor dimensions, rejecting anything above `max_dim`.
inline Index total_dim(std::span<const Index> dims, Index max_dim = kDefaultTolerances.max_dim) {
  Index total = 1;
  for (Index d : dims) {
    if (d <= 0) throw ValidationError("factor dimensions must be positive", "factor_dims");
    if (total > max_dim / d) throw ValidationError("total dimension exceeds maximum", "factor_dims");
    total *= d;
  }
  return total;
}

namespace detail {

/// Row-major strides for most-significant-first factor ordering.
inline std::vector<Index> strides(std::span<const Index> dims) {
  std::vector<Index> s(dims.size());
  Index acc = 1;
  for (std::size_t k = dims.size(); k-- > 0;) {
    s[k] = acc;
    acc *= dims[k];
  }
  return s;
}

/// Index offsets of every configuration of the `sites` factors, with the
/// first listed site most significant; all other digits zero.
inline std::vector<Index> support_offsets(std::span<const Index> dims, std::span<const Index> sites) {
  const auto st = strides(dims);
  std::vector<Index> offs{0};
  for (Index site : sites) {
    std::vector<Index> next;
    next.reserve(offs.size() * static_cast<std::size_t>(dims[site]));
    for (Index o : offs)
      for (Index digit = 0; digit < dims[site]; ++digit) next.push_back(o + digit * st[site]);
    offs = std::move(next);
  }
  return offs;
}

/// Full indices whose digits on `sites` are all zero.
inline std::vector<Index> rest_bases(std::span<const Index> dims, std::span<const Index> sites) {
  std::vector<Index> others;
  for (Index k = 0; k < static_cast<Index>(dims.size()); ++k)
    if (std::find(sites.begin(), sites.end(), k) == sites.end()) others.push_back(k);
  return support_offsets(dims, others);
}

inline void check_sites(std::span<const Index> dims, std::span<const Index> sites, Index op_dim) {
  Index sub = 1;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Index s = sites[i];
    if (s < 0 || s >= static_cast<Index>(dims.size()))
      throw ValidationError("site index " + std::to_string(s) + " out of range", "sites");
    for (std::size_t j = 0; j < i; ++j)
      if (sites[j] == s) throw ValidationError("duplicate site index " + std::to_string(s), "sites");
    sub *= dims[s];
  }
  if (sub != op_dim)
    throw ValidationError("operator dimension " + std::to_string(op_dim) +
                              " does not match the product of its site dimensions " + std::to_string(sub),
                          "sites");
}

}  // namespace detail

/// Operator acting as `op` on the listed factors and as identity elsewhere.
template <typename Derived>
auto embed_operator(const Eigen::MatrixBase<Derived>& op, std::span<const Index> sites,
                    std::span<const Index> dims) {
  using Scalar = typename Derived::Scalar;
  using Result = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require_square(op, "operator");
  detail::check_sites(dims, sites, op.rows());
  const Index total = total_dim(dims);
  const auto offs = detail::support_offsets(dims, sites);
  const auto bases = detail::rest_bases(dims, sites);
  Result out = Result::Zero(total, total);
  const Index sub = op.rows();
  for (Index base : bases)
    for (Index c = 0; c < sub; ++c)
      for (Index r = 0; r < sub; ++r) out(base + offs[r], base + offs[c]) = op(r, c);
  return out;
}

/// Applies `op` on the listed factors of `psi` (not normalized).
template <typename DOp, typename DVec>
auto apply_on_sites(const Eigen::MatrixBase<DOp>& op, std::span<const Index> sites,
                    std::span<const Index> dims, const Eigen::MatrixBase<DVec>& psi) {
  using Scalar = typename DVec::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  require_square(op, "operator");
  detail::check_sites(dims, sites, op.rows());
  if (psi.size() != total_dim(dims)) throw ValidationError("state dimension mismatch", "state");
  const auto offs = detail::support_offsets(dims, sites);
  const auto bases = detail::rest_bases(dims, sites);
  const Index sub = op.rows();
  Vec out(psi.size());
  Vec local(sub);
  for (Index base : bases) {
    for (Index s = 0; s < sub; ++s) local(s) = psi(base + offs[s]);
    const Vec mapped = op * local;
    for (Index s = 0; s < sub; ++s) out(base + offs[s]) = mapped(s);
  }
  return out;
}

/// Reduced density matrix of `psi` on the listed factors (unnormalized if psi is).
template <typename DVec>
auto reduced_on_sites(const Eigen::MatrixBase<DVec>& psi, std::span<const Index> sites,
                      std::span<const Index> dims) {
  using Scalar = typename DVec::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Index sub = 1;
  for (Index s : sites) sub *= dims[s];
  detail::check_sites(dims, sites, sub);
  const auto offs = detail::support_offsets(dims, sites);
  const auto bases = detail::rest_bases(dims, sites);
  Mat out = Mat::Zero(sub, sub);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> local(sub);
  for (Index base : bases) {
    for (Index s = 0; s < sub; ++s) local(s) = psi(base + offs[s]);
    out.noalias() += local * local.adjoint();
  }
  return out;
}

/// Reduced density operator after tracing out `traced` factors.
template <typename Real>
BasicDensityOperator<Real> partial_trace(const BasicDensityOperator<Real>& rho, std::span<const Index> factor_dims,
                                         std::span<const Index> traced) {
  using Mat = Matrix<Real>;
  const Index total = total_dim(factor_dims);
  if (total != rho.dim())
    throw ValidationError("factor dimensions multiply to " + std::to_string(total) + " but the state has dimension " +
                              std::to_string(rho.dim()),
                          "factor_dims");
  std::vector<Index> kept;
  for (Index k = 0; k < static_cast<Index>(factor_dims.size()); ++k) {
    const bool is_traced = std::find(traced.begin(), traced.end(), k) != traced.end();
    if (!is_traced) kept.push_back(k);
  }
  for (Index t : traced)
    if (t < 0 || t >= static_cast<Index>(factor_dims.size()))
      throw ValidationError("traced factor index " + std::to_string(t) + " out of range", "traced_factors");

  const auto kept_offs = detail::support_offsets(factor_dims, kept);
  const auto traced_offs = detail::support_offsets(factor_dims, traced);
  const Index kd = static_cast<Index>(kept_offs.size());
  Mat out = Mat::Zero(kd, kd);
  const Mat& m = rho.matrix();
  for (Index j = 0; j < kd; ++j)
    for (Index i = 0; i < kd; ++i) {
      Complex<Real> acc(0);
      for (Index t : traced_offs) acc += m(kept_offs[i] + t, kept_offs[j] + t);
      out(i, j) = acc;
    }
  return BasicDensityOperator<Real>(std::move(out), typename BasicDensityOperator<Real>::PositiveByConstruction{});
}

template <typename Real>
BasicDensityOperator<Real> partial_trace(const BasicDensityOperator<Real>& rho, std::initializer_list<Index> factor_dims,
                                         std::initializer_list<Index> traced) {
  return partial_trace(rho, std::span<const Index>(factor_dims.begin(), factor_dims.size()),
                       std::span<const Index>(traced.begin(), traced.size()));
}

/// Tr(rho^2).
template <typename Real>
Real purity(const BasicDensityOperator<Real>& rho) {
  // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
  return rho.matrix().cwiseAbs2().sum();
}

/// Half the trace norm of a - b, from the eigenvalues of the Hermitian difference.
template <typename Real>
Real trace_distance(const BasicDensityOperator<Real>& a, const BasicDensityOperator<Real>& b) {
  if (a.dim() != b.dim()) throw ValidationError("trace_distance: dimension mismatch", "dim");
  const Matrix<Real> diff = hermitian_part(a.matrix() - b.matrix());
  Eigen::SelfAdjointEigenSolver<Matrix<Real>> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum() / Real(2);
}

/// Frobenius norm of AB - BA.
template <typename DA, typename DB>
auto commutator_norm(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  require_square(a, "a");
  require_square(b, "b");
  if (a.rows() != b.rows()) throw ValidationError("commutator_norm: dimension mismatch", "dim");
  return (a * b - b * a).norm();
}

/// Real part of Tr(rho O).
template <typename Real, typename Derived>
Real expectation(const BasicDensityOperator<Real>& rho, const Eigen::MatrixBase<Derived>& obs) {
  if (obs.rows() != rho.dim() || obs.cols() != rho.dim())
    throw ValidationError("observable dimension mismatch", "observable");
  return (rho.matrix() * obs).trace().real();
}

/// Single-qubit Pauli matrices.
template <typename Real = double>
struct Pauli {
  static Matrix<Real> I() { return Matrix<Real>::Identity(2, 2); }
  static Matrix<Real> X() {
    Matrix<Real> m(2, 2);
    m << Real(0), Real(1), Real(1), Real(0);
    return m;
  }
  static Matrix<Real> Y() {
    Matrix<Real> m(2, 2);
    m << Real(0), Complex<Real>(0, -1), Complex<Real>(0, 1), Real(0);
    return m;
  }
  static Matrix<Real> Z() {
    Matrix<Real> m(2, 2);
    m << Real(1), Real(0), Real(0), Real(-1);
    return m;
  }
};

}  // namespace collapse
