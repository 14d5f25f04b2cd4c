#pragma once

// Kraus families as completely positive trace-preserving maps.
//
// A family is a finite list of weighted branches (w_i, K_i). The weights play
// the role of a discrete measure over branch labels, so the completeness
// relation reads  sum_i w_i K_i^dagger K_i = 1  and the channel acts as
//   rho -> sum_i w_i K_i rho K_i^dagger.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "collapse/error.hpp"
#include "collapse/linops.hpp"

namespace collapse {

template <typename Real>
struct KrausBranch {
  Real weight;
  Matrix<Real> op;
};

inline constexpr double kCompletenessTolerance = 1e-10;

/// ||sum_i w_i K_i^dagger K_i - 1||_F
template <typename Real>
Real completeness_residual(const std::vector<KrausBranch<Real>>& branches, Index dim) {
  Matrix<Real> acc = Matrix<Real>::Zero(dim, dim);
  for (const auto& b : branches) acc.noalias() += b.weight * (b.op.adjoint() * b.op);
  acc -= Matrix<Real>::Identity(dim, dim);
  return acc.norm();
}

template <typename Real>
class BasicKrausFamily {
 public:
  using MatrixType = Matrix<Real>;
  using Branch = KrausBranch<Real>;

  /// Builds a family and rejects it unless its completeness residual is
  /// within `tolerance`.
  BasicKrausFamily(Index dim, std::vector<Branch> branches, std::string label = {},
                   Real tolerance = Real(kCompletenessTolerance))
      : BasicKrausFamily(dim, std::move(branches), std::move(label), tolerance, Unverified{}) {
    if (!(residual_ <= tolerance_))
      throw ValidationError("Kraus family '" + label_ + "' is not complete (residual " +
                                std::to_string(double(residual_)) + ")",
                            "completeness");
  }

  /// Builds a family without enforcing completeness; channel operations still
  /// refuse it. Used to inspect candidate families.
  static BasicKrausFamily unverified(Index dim, std::vector<Branch> branches, std::string label = {},
                                     Real tolerance = Real(kCompletenessTolerance)) {
    return BasicKrausFamily(dim, std::move(branches), std::move(label), tolerance, Unverified{});
  }

  Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return branches_.size(); }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  const Branch& operator[](std::size_t i) const { return branches_[i]; }
  const std::string& label() const noexcept { return label_; }
  Real residual() const noexcept { return residual_; }
  Real tolerance() const noexcept { return tolerance_; }
  bool is_complete() const noexcept { return residual_ <= tolerance_; }

  void require_complete() const {
    if (!is_complete())
      throw ValidationError("Kraus family '" + label_ + "' is incomplete (residual " +
                                std::to_string(double(residual_)) + ")",
                            "completeness");
  }

 private:
  struct Unverified {};

  BasicKrausFamily(Index dim, std::vector<Branch> branches, std::string label, Real tolerance, Unverified)
      : dim_(dim), branches_(std::move(branches)), label_(std::move(label)), tolerance_(tolerance) {
    if (dim_ <= 0) throw ValidationError("Kraus family dimension must be positive", "dim");
    if (dim_ > kDefaultTolerances.max_dim) throw ValidationError("Kraus family dimension too large", "dim");
    if (branches_.empty()) throw ValidationError("Kraus family has no branches", "branches");
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      const auto& b = branches_[i];
      const std::string where = "branches[" + std::to_string(i) + "]";
      if (!(b.weight > Real(0)) || !std::isfinite(double(b.weight)))
        throw ValidationError(where + ".weight must be positive and finite", where + ".weight");
      if (b.op.rows() != dim_ || b.op.cols() != dim_)
        throw ValidationError(where + " operator is " + detail::dims_str(b.op.rows(), b.op.cols()) + ", expected " +
                                  detail::dims_str(dim_, dim_),
                              where);
      require_finite(b.op, where);
    }
    residual_ = completeness_residual(branches_, dim_);
  }

  Index dim_;
  std::vector<Branch> branches_;
  std::string label_;
  Real tolerance_;
  Real residual_{};
};

using KrausFamily = BasicKrausFamily<double>;

struct ChannelReport {
  double completeness_residual;
  std::size_t branch_count;
  bool is_unitary_family;
  bool passes;
};

/// True when every sqrt(w) K is a multiple of a unitary.
template <typename Real>
bool is_unitary_mixture(const BasicKrausFamily<Real>& f, Real tol = Real(1e-10)) {
  for (const auto& b : f.branches()) {
    const Matrix<Real> g = b.op.adjoint() * b.op;
    const Complex<Real> scale = g.trace() / Real(f.dim());
    if ((g - scale * Matrix<Real>::Identity(f.dim(), f.dim())).norm() > tol) return false;
  }
  return true;
}

template <typename Real>
ChannelReport verify_completeness(const BasicKrausFamily<Real>& f) {
  return {double(f.residual()), f.size(), is_unitary_mixture(f), f.is_complete()};
}

template <typename Real>
BasicDensityOperator<Real> apply_channel(const BasicKrausFamily<Real>& f, const BasicDensityOperator<Real>& rho) {
  f.require_complete();
  if (f.dim() != rho.dim())
    throw ValidationError("channel dimension " + std::to_string(f.dim()) + " does not match state dimension " +
                              std::to_string(rho.dim()),
                          "dim");
  Matrix<Real> out = Matrix<Real>::Zero(f.dim(), f.dim());
  for (const auto& b : f.branches()) out.noalias() += b.weight * (b.op * rho.matrix() * b.op.adjoint());
  return BasicDensityOperator<Real>(std::move(out), typename BasicDensityOperator<Real>::PositiveByConstruction{});
}

/// Mean state over all branches: identical to apply_channel.
template <typename Real>
BasicDensityOperator<Real> ensemble_map(const BasicKrausFamily<Real>& f, const BasicDensityOperator<Real>& rho) {
  return apply_channel(f, rho);
}

/// f after g: branches (w_f w_g, K_f K_g), indexed f-major.
template <typename Real>
BasicKrausFamily<Real> compose(const BasicKrausFamily<Real>& f, const BasicKrausFamily<Real>& g) {
  if (f.dim() != g.dim()) throw ValidationError("compose: dimension mismatch", "dim");
  std::vector<KrausBranch<Real>> out;
  out.reserve(f.size() * g.size());
  for (const auto& bf : f.branches())
    for (const auto& bg : g.branches()) out.push_back({bf.weight * bg.weight, bf.op * bg.op});
  const Real tol = std::max<Real>(f.tolerance(), g.tolerance());
  return BasicKrausFamily<Real>(f.dim(), std::move(out), f.label() + "*" + g.label(), tol);
}

/// Minimal Kraus representation of the same channel (at most dim^2 branches,
/// unit weights), from the eigen-decomposition of the Choi matrix.
template <typename Real>
BasicKrausFamily<Real> compress(const BasicKrausFamily<Real>& f, Real relative_cutoff = Real(1e-14)) {
  f.require_complete();
  const Index d = f.dim();
  const Index d2 = d * d;
  Matrix<Real> choi = Matrix<Real>::Zero(d2, d2);
  for (const auto& b : f.branches()) {
    const Eigen::Map<const Vector<Real>> v(b.op.data(), d2);
    choi.noalias() += b.weight * (v * v.adjoint());
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Real>> es(hermitian_part(choi).eval());
  const Real top = es.eigenvalues().maxCoeff();
  std::vector<KrausBranch<Real>> out;
  for (Index k = d2; k-- > 0;) {
    const Real lam = es.eigenvalues()(k);
    if (lam <= relative_cutoff * top) break;
    Matrix<Real> op = Eigen::Map<const Matrix<Real>>(es.eigenvectors().col(k).data(), d, d) * std::sqrt(lam);
    out.push_back({Real(1), std::move(op)});
  }
  return BasicKrausFamily<Real>(d, std::move(out), f.label(), f.tolerance());
}

/// n-fold composition, compressed after every step.
template <typename Real>
BasicKrausFamily<Real> power(const BasicKrausFamily<Real>& f, int n) {
  if (n < 0) throw ValidationError("power: step count must be non-negative", "n_steps");
  BasicKrausFamily<Real> acc(f.dim(), {{Real(1), Matrix<Real>::Identity(f.dim(), f.dim())}}, "id");
  for (int i = 0; i < n; ++i) acc = compress(compose(f, acc));
  return BasicKrausFamily<Real>(f.dim(), acc.branches(), f.label() + "^" + std::to_string(n), f.tolerance());
}

/// First-order discrete-time family for the generator (H, {L_j}) with step dt:
///   K_0 ~ 1 - i H dt - 1/2 sum L^dagger L dt,  K_j = sqrt(dt) L_j.
/// K_0 is replaced by V (1 - dt sum L^dagger L)^{1/2}, V the unitary polar
/// factor of its first-order form, so the family is complete to rounding.
template <typename Real>
BasicKrausFamily<Real> trotter_family(const Matrix<Real>& hamiltonian, const std::vector<Matrix<Real>>& lindblad_ops,
                                      Real dt) {
  require_square(hamiltonian, "hamiltonian");
  require_finite(hamiltonian, "hamiltonian");
  if (hermiticity_residual(hamiltonian) > Real(1e-12))
    throw ValidationError("hamiltonian is not Hermitian", "hamiltonian");
  if (!(dt > Real(0)) || !std::isfinite(double(dt))) throw ValidationError("dt must be positive", "dt");
  const Index d = hamiltonian.rows();
  const Matrix<Real> id = Matrix<Real>::Identity(d, d);

  Matrix<Real> dissipator = Matrix<Real>::Zero(d, d);
  for (std::size_t j = 0; j < lindblad_ops.size(); ++j) {
    const auto& l = lindblad_ops[j];
    if (l.rows() != d || l.cols() != d)
      throw ValidationError("lindblad_ops[" + std::to_string(j) + "] has wrong dimension", "lindblad_ops");
    require_finite(l, "lindblad_ops");
    dissipator.noalias() += l.adjoint() * l;
  }
  const Matrix<Real> first_order = id - Complex<Real>(0, 1) * dt * hamiltonian - Real(0.5) * dt * dissipator;

  Eigen::JacobiSVD<Matrix<Real>> svd(first_order, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix<Real> polar = svd.matrixU() * svd.matrixV().adjoint();

  const Matrix<Real> remainder = hermitian_part(id - dt * dissipator).eval();
  Eigen::SelfAdjointEigenSolver<Matrix<Real>> es(remainder);
  if (es.eigenvalues().minCoeff() < Real(0))
    throw ValidationError("dt too large: 1 - dt sum L^dagger L is not positive semidefinite", "dt");
  const Matrix<Real> root = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                            es.eigenvectors().adjoint();

  std::vector<KrausBranch<Real>> branches;
  branches.push_back({Real(1), polar * root});
  for (const auto& l : lindblad_ops) branches.push_back({Real(1), std::sqrt(dt) * l});
  return BasicKrausFamily<Real>(d, std::move(branches), "trotter");
}

/// Family for n consecutive trotter steps (compressed composition).
template <typename Real>
BasicKrausFamily<Real> trotter_steps(const Matrix<Real>& hamiltonian, const std::vector<Matrix<Real>>& lindblad_ops,
                                     Real dt, int n_steps) {
  return power(trotter_family(hamiltonian, lindblad_ops, dt), n_steps);
}

/// Family acting as `f` on the listed factors and identity elsewhere.
template <typename Real>
BasicKrausFamily<Real> embed_family(const BasicKrausFamily<Real>& f, std::span<const Index> sites,
                                    std::span<const Index> dims) {
  std::vector<KrausBranch<Real>> out;
  out.reserve(f.size());
  for (const auto& b : f.branches()) out.push_back({b.weight, embed_operator(b.op, sites, dims)});
  return BasicKrausFamily<Real>(total_dim(dims), std::move(out), f.label(), f.tolerance());
}

}  // namespace collapse
