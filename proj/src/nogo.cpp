#include "collapse/nogo.hpp"

#include <algorithm>
#include <cmath>

#include "collapse/random.hpp"

namespace collapse::nogo {

namespace {

std::complex<double> frobenius_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.conjugate().cwiseProduct(b).sum();
}

Eigen::JacobiSVD<ComplexMatrix> svd_of_images(const std::vector<ComplexMatrix>& ops, const StateVector& omega,
                                              unsigned options) {
  ComplexMatrix cols(omega.dim(), static_cast<Index>(ops.size()));
  for (std::size_t i = 0; i < ops.size(); ++i) cols.col(static_cast<Index>(i)) = ops[i] * omega.amplitudes();
  return Eigen::JacobiSVD<ComplexMatrix>(cols, options);
}

Index numerical_rank(const Eigen::VectorXd& singular_values) {
  Index r = 0;
  for (Index i = 0; i < singular_values.size(); ++i)
    if (singular_values(i) > kRankTolerance) ++r;
  return r;
}

}  // namespace

LocalAlgebra::LocalAlgebra(Index ambient_dim, std::vector<ComplexMatrix> generators)
    : ambient_dim_(ambient_dim), generators_(std::move(generators)) {
  if (ambient_dim_ <= 0) throw ValidationError("ambient dimension must be positive", "ambient_dim");
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    const auto& g = generators_[i];
    if (g.rows() != ambient_dim_ || g.cols() != ambient_dim_)
      throw ValidationError("generator " + std::to_string(i) + " has wrong dimension", "generators");
    require_finite(g, "generators");
  }
  const Index d = ambient_dim_;
  const auto max_dim = static_cast<std::size_t>(d * d);
  basis_.push_back(ComplexMatrix::Identity(d, d) / std::sqrt(double(d)));
  // Left-multiplying every basis word by every generator reaches all words.
  for (std::size_t idx = 0; idx < basis_.size() && basis_.size() < max_dim; ++idx) {
    for (const auto& g : generators_) {
      ComplexMatrix v = g * basis_[idx];
      const double scale = std::max(1.0, v.norm());
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis_) v -= frobenius_inner(b, v) * b;
      const double n = v.norm();
      if (n > 1e-10 * scale) basis_.push_back(v / n);
      if (basis_.size() == max_dim) break;
    }
  }
}

LocalAlgebra LocalAlgebra::full_on_factor(std::span<const Index> factor_dims, Index factor) {
  const Index total = total_dim(factor_dims);
  if (factor < 0 || factor >= static_cast<Index>(factor_dims.size()))
    throw ValidationError("factor index out of range", "factor");
  const Index d = factor_dims[static_cast<std::size_t>(factor)];
  const Index sites[] = {factor};
  std::vector<ComplexMatrix> gens;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      ComplexMatrix e = ComplexMatrix::Zero(d, d);
      e(i, j) = 1.0;
      gens.push_back(embed_operator(e, sites, factor_dims));
    }
  return LocalAlgebra(total, std::move(gens));
}

LocalAlgebra LocalAlgebra::full(Index dim) {
  const Index dims[] = {dim};
  return full_on_factor(dims, 0);
}

double LocalAlgebra::commutation_residual(const ComplexMatrix& op) const {
  double worst = 0.0;
  for (const auto& g : generators_) worst = std::max(worst, commutator_norm(op, g));
  return worst;
}

CyclicResult cyclic_check(const StateVector& omega, const LocalAlgebra& algebra) {
  if (omega.dim() != algebra.ambient_dim()) throw ValidationError("vacuum dimension mismatch", "omega");
  const auto svd = svd_of_images(algebra.basis(), omega, 0);
  const Index r = numerical_rank(svd.singularValues());
  return {r == algebra.ambient_dim(), r};
}

std::vector<ComplexMatrix> commutant(const LocalAlgebra& algebra) {
  const Index d = algebra.ambient_dim();
  const Index d2 = d * d;
  const auto& gens = algebra.generators();
  if (gens.empty()) {
    std::vector<ComplexMatrix> all;
    for (Index k = 0; k < d2; ++k) {
      ComplexMatrix e = ComplexMatrix::Zero(d, d);
      e(k % d, k / d) = 1.0;
      all.push_back(std::move(e));
    }
    return all;
  }
  // vec(X g - g X) = (g^T (x) 1 - 1 (x) g) vec(X), column-major vec.
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  ComplexMatrix normal = ComplexMatrix::Zero(d2, d2);
  for (const auto& g : gens) {
    const ComplexMatrix l = tensor_product(g.transpose(), id, d2) - tensor_product(id, g, d2);
    normal.noalias() += l.adjoint() * l;
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(normal).eval());
  std::vector<ComplexMatrix> out;
  // Eigenvalues of the normal matrix are squared singular values.
  for (Index k = 0; k < d2; ++k) {
    if (es.eigenvalues()(k) > kRankTolerance * kRankTolerance * std::max(1.0, es.eigenvalues().maxCoeff())) break;
    out.push_back(Eigen::Map<const ComplexMatrix>(es.eigenvectors().col(k).data(), d, d));
  }
  return out;
}

std::vector<ComplexMatrix> commuting_annihilators(const StateVector& omega, const LocalAlgebra& algebra) {
  if (omega.dim() != algebra.ambient_dim()) throw ValidationError("vacuum dimension mismatch", "omega");
  const auto comm = commutant(algebra);
  const auto svd = svd_of_images(comm, omega, Eigen::ComputeFullV);
  const Index r = numerical_rank(svd.singularValues());
  std::vector<ComplexMatrix> out;
  const ComplexMatrix& v = svd.matrixV();
  for (Index k = r; k < v.cols(); ++k) {
    ComplexMatrix a = ComplexMatrix::Zero(omega.dim(), omega.dim());
    for (Index j = 0; j < v.rows(); ++j) a += v(j, k) * comm[static_cast<std::size_t>(j)];
    out.push_back(std::move(a));
  }
  return out;
}

double corollary_check(const ComplexMatrix& a, const StateVector& omega, const LocalAlgebra& algebra) {
  if (a.rows() != algebra.ambient_dim() || a.cols() != algebra.ambient_dim())
    throw ValidationError("operator dimension mismatch", "a");
  const double comm = algebra.commutation_residual(a);
  if (comm > kCommutationTolerance)
    throw ValidationError("operator does not commute with the algebra (residual " + std::to_string(comm) + ")",
                          "commutation");
  if (!cyclic_check(omega, algebra).cyclic) throw ValidationError("vacuum is not cyclic for the algebra", "omega");
  const double kill = (a * omega.amplitudes()).norm();
  if (kill > 1e-12)
    throw ValidationError("operator does not annihilate the vacuum (norm " + std::to_string(kill) + ")", "a");
  double worst = 0.0;
  for (const auto& b : algebra.basis()) worst = std::max(worst, (a * (b * omega.amplitudes())).norm());
  return worst;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::deterministic:
      return "deterministic";
    case Verdict::stochastic_violates_purity:
      return "stochastic-violates-purity";
    case Verdict::stochastic_violates_commutation:
      return "stochastic-violates-commutation";
    case Verdict::counterexample:
      return "counterexample";
  }
  return "unknown";
}

CertificationReport determinism_certify(const KrausFamily& f, const StateVector& omega, const LocalAlgebra& algebra) {
  f.require_complete();
  if (f.dim() != omega.dim() || f.dim() != algebra.ambient_dim())
    throw ValidationError("family, vacuum and algebra dimensions differ", "dim");

  CertificationReport rep;
  for (const auto& b : f.branches())
    rep.commutation_residual = std::max(rep.commutation_residual, algebra.commutation_residual(b.op));
  const auto cyc = cyclic_check(omega, algebra);
  rep.is_cyclic = cyc.cyclic;
  rep.cyclic_rank = cyc.rank;
  rep.vacuum_purity = purity(ensemble_map(f, DensityOperator::pure(omega)));

  const std::size_t n = f.size();
  std::vector<ComplexVector> images;
  images.reserve(n);
  for (const auto& b : f.branches()) images.push_back(b.op * omega.amplitudes());
  for (std::size_t i = 1; i < n; ++i)
    if (images[i].norm() > images[rep.reference_branch].norm()) rep.reference_branch = i;

  auto fitted = [&](std::size_t i, std::size_t j) {
    const double nrm2 = images[i].squaredNorm();
    return nrm2 > 0.0 ? images[i].dot(images[j]) / nrm2 : std::complex<double>(0.0);
  };
  rep.proportionality_residuals.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      rep.proportionality_residuals[i][j] = (f[j].op - fitted(i, j) * f[i].op).norm();
  for (std::size_t j = 0; j < n; ++j) {
    rep.coefficients.push_back(fitted(rep.reference_branch, j));
    rep.reference_residuals.push_back(rep.proportionality_residuals[rep.reference_branch][j]);
  }
  rep.max_residual = *std::max_element(rep.reference_residuals.begin(), rep.reference_residuals.end());

  if (rep.commutation_residual > kCommutationTolerance)
    rep.verdict = Verdict::stochastic_violates_commutation;
  else if (rep.vacuum_purity < 1.0 - kPurityTolerance)
    rep.verdict = Verdict::stochastic_violates_purity;
  else if (rep.max_residual <= kProportionalityTolerance)
    rep.verdict = Verdict::deterministic;
  else
    rep.verdict = Verdict::counterexample;
  return rep;
}

std::pair<Index, Index> sweep_factors(Index ambient_dim) {
  for (Index d2 = 2; d2 * d2 <= ambient_dim; ++d2)
    if (ambient_dim % d2 == 0) return {ambient_dim / d2, d2};
  throw ValidationError("ambient_dim " + std::to_string(ambient_dim) + " has no factorization d1*d2 with 2 <= d2 <= d1",
                        "ambient_dim");
}

namespace {

struct Instance {
  std::string construction;
  std::vector<ComplexMatrix> local_ops;  // on the commutant factor
  std::vector<double> weights;
};

/// Branches B_k, completed as B_k S^{-1/2} with S = sum_k w_k B_k^dagger B_k,
/// via the polar factor of the stacked matrix [sqrt(w_k) B_k].
Instance complete(std::string name, std::vector<ComplexMatrix> ops, std::vector<double> weights) {
  const Index d = ops[0].cols();
  ComplexMatrix stacked(d * static_cast<Index>(ops.size()), d);
  for (std::size_t k = 0; k < ops.size(); ++k)
    stacked.middleRows(static_cast<Index>(k) * d, d) = std::sqrt(weights[k]) * ops[k];
  Eigen::JacobiSVD<ComplexMatrix> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const ComplexMatrix iso = svd.matrixU() * svd.matrixV().adjoint();
  for (std::size_t k = 0; k < ops.size(); ++k)
    ops[k] = iso.middleRows(static_cast<Index>(k) * d, d) / std::sqrt(weights[k]);
  return {std::move(name), std::move(ops), std::move(weights)};
}

std::vector<double> random_weights(std::size_t n, rng::Engine& eng) {
  std::vector<double> w(n);
  for (auto& x : w) x = 0.5 + rng::uniform01(eng);
  return w;
}

Instance make_instance(std::size_t index, Index d2, Index branches, rng::Engine& eng) {
  const std::size_t n = branches > 0 ? static_cast<std::size_t>(branches)
                                     : 1 + static_cast<std::size_t>(eng() % 3);
  switch (index % 3) {
    case 0: {  // generic
      std::vector<ComplexMatrix> ops;
      for (std::size_t k = 0; k < n; ++k) ops.push_back(rng::ginibre(d2, d2, eng));
      return complete("generic", std::move(ops), random_weights(n, eng));
    }
    case 1: {  // every branch a multiple of one operator
      const ComplexMatrix b = rng::ginibre(d2, d2, eng);
      std::vector<ComplexMatrix> ops;
      for (std::size_t k = 0; k < n; ++k) ops.push_back(rng::complex_normal(eng) * b);
      return complete("proportional", std::move(ops), random_weights(n, eng));
    }
    default: {  // W D_k with diagonal D_k, sum_k w_k |D_k|^2 = 1
      const ComplexMatrix w = rng::haar_unitary(d2, eng);
      const auto weights = random_weights(n, eng);
      std::vector<Eigen::VectorXd> mags(n, Eigen::VectorXd(d2));
      for (auto& m : mags)
        for (Index j = 0; j < d2; ++j) m(j) = 0.05 + rng::uniform01(eng);
      Eigen::VectorXd total = Eigen::VectorXd::Zero(d2);
      for (std::size_t k = 0; k < n; ++k) total += weights[k] * mags[k];
      std::vector<ComplexMatrix> ops;
      for (std::size_t k = 0; k < n; ++k) {
        ComplexVector diag(d2);
        for (Index j = 0; j < d2; ++j) {
          const double phase = 2.0 * std::numbers::pi * rng::uniform01(eng);
          diag(j) = std::sqrt(mags[k](j) / total(j)) * std::polar(1.0, phase);
        }
        ops.push_back(w * diag.asDiagonal());
      }
      return {"diagonal_mixture", std::move(ops), weights};
    }
  }
}

StateVector make_vacuum(VacuumKind kind, Index d1, Index d2, rng::Engine& eng) {
  switch (kind) {
    case VacuumKind::haar:
      return StateVector(rng::haar_vector(d1 * d2, eng));
    case VacuumKind::maximally_entangled: {
      ComplexVector v = ComplexVector::Zero(d1 * d2);
      for (Index k = 0; k < d2; ++k) v(k * d2 + k) = 1.0;
      return StateVector(std::move(v));
    }
    case VacuumKind::product:
      return StateVector::basis(d1 * d2, 0);
  }
  throw ValidationError("unknown vacuum kind", "vacuum");
}

}  // namespace

SweepSummary random_nogo_sweep(const SweepConfig& cfg) {
  if (cfg.n_instances == 0) throw ValidationError("n_instances must be at least 1", "n_instances");
  if (cfg.branches < 0) throw ValidationError("branches must be non-negative", "branches");
  const auto [d1, d2] = sweep_factors(cfg.ambient_dim);
  const Index dims[] = {d1, d2};
  const Index commutant_site[] = {1};
  const LocalAlgebra algebra = LocalAlgebra::full_on_factor(dims, 0);

  SweepSummary sum;
  sum.n_instances = cfg.n_instances;
  sum.factor_dim = d1;
  sum.commutant_dim = d2;
  for (std::size_t i = 0; i < cfg.n_instances; ++i) {
    const std::uint64_t seed = rng::stream_seed(cfg.seed, i);
    rng::Engine eng(seed);
    const Instance inst = make_instance(i, d2, cfg.branches, eng);
    const StateVector omega = make_vacuum(cfg.vacuum, d1, d2, eng);
    std::vector<KrausBranch<double>> branches;
    for (std::size_t k = 0; k < inst.local_ops.size(); ++k)
      branches.push_back({inst.weights[k], embed_operator(inst.local_ops[k], commutant_site, dims)});
    const KrausFamily f(cfg.ambient_dim, std::move(branches), inst.construction);
    CertificationReport rep = determinism_certify(f, omega, algebra);

    const bool commuting = rep.commutation_residual <= kCommutationTolerance;
    const bool pure = rep.vacuum_purity >= 1.0 - kPurityTolerance;
    sum.n_commuting += commuting;
    sum.n_pure += pure;
    sum.n_cyclic += rep.is_cyclic;
    sum.n_deterministic += rep.verdict == Verdict::deterministic;
    sum.n_violates_purity += rep.verdict == Verdict::stochastic_violates_purity;
    sum.n_counterexamples += rep.verdict == Verdict::counterexample;
    if (pure) sum.max_pure_residual = std::max(sum.max_pure_residual, rep.max_residual);
    if (rep.max_residual > 1e-6 && rep.vacuum_purity >= 1.0 - 1e-6) ++sum.n_contrapositive_failures;
    sum.instances.push_back({seed, inst.construction, std::move(rep)});
  }
  sum.pure_fraction = double(sum.n_pure) / double(sum.n_instances);
  return sum;
}

VacuumModel::VacuumModel(const ComplexMatrix& hamiltonian) : vacuum_(StateVector::basis(1, 0)) {
  require_square(hamiltonian, "hamiltonian");
  require_finite(hamiltonian, "hamiltonian");
  if (hermiticity_residual(hamiltonian) > 1e-12) throw ValidationError("hamiltonian is not Hermitian", "hamiltonian");
  const Index d = hamiltonian.rows();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(hamiltonian).eval());
  offset_ = es.eigenvalues()(0);
  gap_ = d > 1 ? es.eigenvalues()(1) - offset_ : std::numeric_limits<double>::infinity();
  if (!(gap_ > 1e-10)) throw ValidationError("ground state is degenerate; a unique vacuum is required", "hamiltonian");
  h_ = hermitian_part(hamiltonian).eval() - offset_ * ComplexMatrix::Identity(d, d);
  spectrum_ = es.eigenvalues().array() - offset_;
  vacuum_ = StateVector(es.eigenvectors().col(0));
  if ((h_ * vacuum_.amplitudes()).norm() > 1e-10)
    throw InconsistencyError("shifted hamiltonian does not annihilate its ground state");
}

ComplexMatrix transverse_field_ising(Index n_sites, double coupling, double field) {
  if (n_sites < 1) throw ValidationError("n_sites must be positive", "n_sites");
  const std::vector<Index> dims(static_cast<std::size_t>(n_sites), 2);
  const Index d = total_dim(dims);
  ComplexMatrix h = ComplexMatrix::Zero(d, d);
  const ComplexMatrix zz = tensor_product(Pauli<>::Z(), Pauli<>::Z());
  const Index bonds = n_sites >= 3 ? n_sites : n_sites - 1;
  for (Index i = 0; i < bonds; ++i) {
    const Index pair[] = {i, (i + 1) % n_sites};
    h -= coupling * embed_operator(zz, pair, dims);
  }
  for (Index i = 0; i < n_sites; ++i) {
    const Index site[] = {i};
    h -= field * embed_operator(Pauli<>::X(), site, dims);
  }
  return h;
}

KrausFamily spectral_projector_family(const ComplexMatrix& hamiltonian, double tol) {
  require_square(hamiltonian, "hamiltonian");
  const Index d = hamiltonian.rows();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(hamiltonian).eval());
  std::vector<KrausBranch<double>> branches;
  Index start = 0;
  while (start < d) {
    Index end = start + 1;
    while (end < d && es.eigenvalues()(end) - es.eigenvalues()(end - 1) <= tol) ++end;
    const auto v = es.eigenvectors().middleCols(start, end - start);
    branches.push_back({1.0, v * v.adjoint()});
    start = end;
  }
  return KrausFamily(d, std::move(branches), "spectral_projectors");
}

std::vector<double> vacuum_energy_trace(const VacuumModel& model, const KrausFamily& f, std::size_t n_steps) {
  if (f.dim() != model.hamiltonian().rows()) throw ValidationError("family and hamiltonian dimensions differ", "dim");
  std::vector<double> out;
  DensityOperator rho = DensityOperator::pure(model.vacuum());
  out.push_back(expectation(rho, model.hamiltonian()));
  for (std::size_t k = 0; k < n_steps; ++k) {
    rho = apply_channel(f, rho);
    out.push_back(expectation(rho, model.hamiltonian()));
  }
  return out;
}

double energy_production_rate(const VacuumModel& model, const KrausFamily& f, std::size_t n_steps) {
  if (n_steps == 0) throw ValidationError("n_steps must be at least 1", "n_steps");
  const auto trace = vacuum_energy_trace(model, f, n_steps);
  return (trace.back() - trace.front()) / double(n_steps);
}

}  // namespace collapse::nogo
