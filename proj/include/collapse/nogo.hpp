#pragma once

// Finite-dimensional certification of the vacuum-purity argument.
//
// Setting: a bipartite space H = H_1 (x) H_2. The local algebra is generated by
// operators on H_1; its commutant consists of operators on H_2. A vacuum
// vector Omega is cyclic for the local algebra exactly when its Schmidt rank
// equals dim H_2. For a Kraus family whose branches commute with the local
// algebra, a pure mean state from Omega forces every branch to be a multiple
// of one fixed operator: the evolution is deterministic.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "collapse/linops.hpp"
#include "collapse/semigroup.hpp"

namespace collapse::nogo {

inline constexpr double kCommutationTolerance = 1e-10;
inline constexpr double kPurityTolerance = 1e-10;
inline constexpr double kProportionalityTolerance = 1e-8;
inline constexpr double kRankTolerance = 1e-10;

/// Unital algebra generated (under products) by a set of operators.
class LocalAlgebra {
 public:
  LocalAlgebra(Index ambient_dim, std::vector<ComplexMatrix> generators);

  /// All operators on factor `factor` of the tensor product, identity elsewhere.
  static LocalAlgebra full_on_factor(std::span<const Index> factor_dims, Index factor);
  static LocalAlgebra full(Index dim);

  Index ambient_dim() const noexcept { return ambient_dim_; }
  const std::vector<ComplexMatrix>& generators() const noexcept { return generators_; }
  /// Frobenius-orthonormal basis of the algebra; the first element is 1/sqrt(d).
  const std::vector<ComplexMatrix>& basis() const noexcept { return basis_; }
  Index dimension() const noexcept { return static_cast<Index>(basis_.size()); }

  /// Largest commutator norm of `op` with the generators.
  double commutation_residual(const ComplexMatrix& op) const;

 private:
  Index ambient_dim_;
  std::vector<ComplexMatrix> generators_;
  std::vector<ComplexMatrix> basis_;
};

struct CyclicResult {
  bool cyclic;
  Index rank;
};

/// Rank of span{B Omega : B in the algebra}; cyclic iff it is the ambient dimension.
CyclicResult cyclic_check(const StateVector& omega, const LocalAlgebra& algebra);

/// Frobenius-orthonormal basis of the commutant {X : [X, g] = 0 for all generators g}.
std::vector<ComplexMatrix> commutant(const LocalAlgebra& algebra);

/// Basis of {A in the commutant : A Omega = 0}. Empty when Omega is cyclic.
std::vector<ComplexMatrix> commuting_annihilators(const StateVector& omega, const LocalAlgebra& algebra);

/// For A commuting with the algebra and annihilating a cyclic Omega, returns
/// max_B ||A B Omega|| over the algebra basis (zero up to rounding).
/// Rejects a non-commuting A, a non-cyclic Omega or A Omega != 0.
double corollary_check(const ComplexMatrix& a, const StateVector& omega, const LocalAlgebra& algebra);

enum class Verdict {
  deterministic,
  stochastic_violates_purity,
  stochastic_violates_commutation,
  /// Pure mean state, commuting branches, yet not all branches proportional.
  /// Only reachable when Omega is not cyclic.
  counterexample,
};

std::string to_string(Verdict v);

struct CertificationReport {
  double vacuum_purity = 0.0;
  bool is_cyclic = false;
  Index cyclic_rank = 0;
  double commutation_residual = 0.0;
  std::size_t reference_branch = 0;
  /// c_g = <K_ref Omega | K_g Omega> / ||K_ref Omega||^2
  std::vector<std::complex<double>> coefficients;
  /// ||K_g - c_g K_ref||_F for each branch g
  std::vector<double> reference_residuals;
  /// entry (i, j): ||K_j - c_ij K_i||_F with c_ij fitted on Omega
  std::vector<std::vector<double>> proportionality_residuals;
  double max_residual = 0.0;
  Verdict verdict = Verdict::deterministic;
};

CertificationReport determinism_certify(const KrausFamily& f, const StateVector& omega, const LocalAlgebra& algebra);

enum class VacuumKind { haar, maximally_entangled, product };

struct SweepConfig {
  std::size_t n_instances = 1000;
  Index ambient_dim = 4;
  std::uint64_t seed = 0;
  VacuumKind vacuum = VacuumKind::haar;
  /// 0 draws 1-3 branches per instance.
  Index branches = 0;
};

struct SweepInstance {
  std::uint64_t instance_seed;
  std::string construction;
  CertificationReport report;
};

struct SweepSummary {
  std::size_t n_instances = 0;
  Index factor_dim = 0;     // dimension of the algebra's factor
  Index commutant_dim = 0;  // dimension of the factor carrying the branches
  std::size_t n_commuting = 0;
  std::size_t n_pure = 0;
  std::size_t n_deterministic = 0;
  std::size_t n_violates_purity = 0;
  std::size_t n_counterexamples = 0;
  std::size_t n_cyclic = 0;
  /// Instances with some residual > 1e-6 but purity >= 1 - 1e-6.
  std::size_t n_contrapositive_failures = 0;
  double pure_fraction = 0.0;
  double max_pure_residual = 0.0;
  std::vector<SweepInstance> instances;
};

/// Factorization ambient = d1 * d2 used by the sweep: d2 is the smallest
/// divisor > 1 with d2 <= d1 (so a generic vector is cyclic for factor 1).
std::pair<Index, Index> sweep_factors(Index ambient_dim);

SweepSummary random_nogo_sweep(const SweepConfig& cfg);

/// Hamiltonian with its ground energy shifted to zero and its unique ground state.
class VacuumModel {
 public:
  explicit VacuumModel(const ComplexMatrix& hamiltonian);

  const ComplexMatrix& hamiltonian() const noexcept { return h_; }
  const StateVector& vacuum() const noexcept { return vacuum_; }
  /// Energy subtracted from the input Hamiltonian.
  double ground_energy_offset() const noexcept { return offset_; }
  double gap() const noexcept { return gap_; }
  const Eigen::VectorXd& spectrum() const noexcept { return spectrum_; }

 private:
  ComplexMatrix h_;
  StateVector vacuum_;
  double offset_;
  double gap_;
  Eigen::VectorXd spectrum_;
};

/// H = -J sum Z_i Z_{i+1} - h sum X_i on a periodic chain.
ComplexMatrix transverse_field_ising(Index n_sites, double coupling = 1.0, double field = 1.0);

/// Branches are the spectral projectors of H (eigenvalues grouped within `tol`).
KrausFamily spectral_projector_family(const ComplexMatrix& hamiltonian, double tol = 1e-9);

/// (Tr(H rhobar_n) - Tr(H rhobar_0)) / n after n exact ensemble steps from the vacuum.
double energy_production_rate(const VacuumModel& model, const KrausFamily& f, std::size_t n_steps);

/// Tr(H rhobar_k) for k = 0..n_steps.
std::vector<double> vacuum_energy_trace(const VacuumModel& model, const KrausFamily& f, std::size_t n_steps);

}  // namespace collapse::nogo
