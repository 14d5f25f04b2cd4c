#include "collapse/relnet.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "collapse/random.hpp"

namespace collapse::relnet {

namespace {

std::string cell_str(const Cell& c) { return "(" + std::to_string(c.site) + "," + std::to_string(c.time) + ")"; }

/// rho -> sum_i w_i A_i rho A_i^dagger with A_i = K_i on `sites`.
ComplexMatrix apply_local_channel(const KrausFamily& f, std::span<const Index> sites, std::span<const Index> dims,
                                  const ComplexMatrix& rho) {
  const Index d = rho.rows();
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  ComplexMatrix left(d, d);
  ComplexMatrix both(d, d);
  for (const auto& b : f.branches()) {
    for (Index c = 0; c < d; ++c) left.col(c) = apply_on_sites(b.op, sites, dims, rho.col(c));
    const ComplexMatrix left_adj = left.adjoint();
    for (Index c = 0; c < d; ++c) both.col(c) = apply_on_sites(b.op, sites, dims, left_adj.col(c));
    out.noalias() += b.weight * both.adjoint();
  }
  return out;
}

}  // namespace

LatticeSpacetime::LatticeSpacetime(Index n_sites, Index site_dim, Index horizon)
    : n_sites_(n_sites), site_dim_(site_dim), horizon_(horizon) {
  if (n_sites <= 0) throw ValidationError("n_sites must be positive", "n_sites");
  if (site_dim < 2) throw ValidationError("site_dim must be at least 2", "site_dim");
  if (horizon < 0) throw ValidationError("horizon must be non-negative", "horizon");
  dims_.assign(static_cast<std::size_t>(n_sites), site_dim);
  try {
    total_dim_ = collapse::total_dim(dims_);
  } catch (const ValidationError&) {
    throw ValidationError("site_dim^n_sites exceeds the maximum dimension " + std::to_string(kDefaultTolerances.max_dim),
                          "n_sites");
  }
}

Index LatticeSpacetime::distance(Index x, Index y) const {
  const Index d = std::abs(x - y) % n_sites_;
  return std::min(d, n_sites_ - d);
}

bool LatticeSpacetime::spacelike(const Cell& a, const Cell& b) const {
  return distance(a.site, b.site) > std::abs(a.time - b.time);
}

CauchySurface::CauchySurface(const LatticeSpacetime& lattice, std::vector<Index> times) : times_(std::move(times)) {
  const Index n = lattice.n_sites();
  if (static_cast<Index>(times_.size()) != n)
    throw ValidationError("surface has " + std::to_string(times_.size()) + " entries for " + std::to_string(n) +
                              " sites",
                          "times");
  for (Index x = 0; x < n; ++x) {
    const Index t = times_[static_cast<std::size_t>(x)];
    if (t < 0 || t > lattice.horizon())
      throw ValidationError("surface time at site " + std::to_string(x) + " lies outside [0, horizon]",
                            "times[" + std::to_string(x) + "]");
  }
  if (n < 2) return;
  for (Index x = 0; x < n; ++x) {
    const Index next = (x + 1) % n;
    if (n == 2 && x == 1) break;
    if (std::abs(times_[static_cast<std::size_t>(next)] - times_[static_cast<std::size_t>(x)]) > 1)
      throw ValidationError("surface violates the light-cone slope between site " + std::to_string(x) +
                                " and site " + std::to_string(next),
                            "times[" + std::to_string(x) + "]");
  }
}

CauchySurface CauchySurface::flat(const LatticeSpacetime& lattice, Index time) {
  return CauchySurface(lattice, std::vector<Index>(static_cast<std::size_t>(lattice.n_sites()), time));
}

CauchySurface CauchySurface::raised(const LatticeSpacetime& lattice, Index site) const {
  auto t = times_;
  t.at(static_cast<std::size_t>(site)) += 1;
  return CauchySurface(lattice, std::move(t));
}

CellRegion surface_diff(const CauchySurface& sigma0, const CauchySurface& sigma1) {
  if (sigma0.size() != sigma1.size()) throw ValidationError("surfaces have different site counts", "surfaces");
  CellRegion r;
  for (Index x = 0; x < sigma0.size(); ++x) {
    if (sigma1[x] < sigma0[x])
      throw ValidationError("later surface dips below the earlier one at site " + std::to_string(x),
                            "times[" + std::to_string(x) + "]");
    for (Index t = sigma0[x]; t < sigma1[x]; ++t) r.cells.insert({x, t});
  }
  return r;
}

LocalKrausAssignment::LocalKrausAssignment(LatticeSpacetime lattice) : lattice_(std::move(lattice)) {}

void LocalKrausAssignment::check_local(const LocalFamily& f) const {
  if (f.support.empty()) throw ValidationError("family support is empty", "support");
  Index sub = 1;
  for (std::size_t i = 0; i < f.support.size(); ++i) {
    const Index s = f.support[i];
    if (s < 0 || s >= lattice_.n_sites())
      throw ValidationError("support site " + std::to_string(s) + " out of range", "support");
    for (std::size_t j = 0; j < i; ++j)
      if (f.support[j] == s) throw ValidationError("duplicate support site", "support");
    sub *= lattice_.site_dim();
  }
  if (f.family.dim() != sub)
    throw ValidationError("family dimension " + std::to_string(f.family.dim()) + " does not match its support", "family");
  f.family.require_complete();
}

void LocalKrausAssignment::set_site_family(Index site, KrausFamily family) {
  LocalFamily lf{{site}, std::move(family)};
  check_local(lf);
  site_families_.insert_or_assign(site, std::move(lf));
}

void LocalKrausAssignment::set_cell_family(const Cell& cell, LocalFamily family) {
  if (cell.site < 0 || cell.site >= lattice_.n_sites())
    throw ValidationError("cell site out of range", "cell");
  check_local(family);
  cell_families_.insert_or_assign(cell, std::move(family));
}

bool LocalKrausAssignment::covers(const Cell& cell) const {
  return cell_families_.contains(cell) || site_families_.contains(cell.site);
}

const LocalFamily& LocalKrausAssignment::at(const Cell& cell) const {
  if (auto it = cell_families_.find(cell); it != cell_families_.end()) return it->second;
  if (auto it = site_families_.find(cell.site); it != site_families_.end()) return it->second;
  throw ValidationError("no Kraus family assigned to cell " + cell_str(cell), "families");
}

bool LocalKrausAssignment::admissible() const {
  for (const auto& [cell, f] : cell_families_)
    if (f.support.size() != 1 || f.support[0] != cell.site) return false;
  return true;
}

double cell_draw(std::uint64_t seed, const LatticeSpacetime& lattice, const Cell& cell) {
  const auto key = static_cast<std::uint64_t>(cell.time) * static_cast<std::uint64_t>(lattice.n_sites()) +
                   static_cast<std::uint64_t>(cell.site);
  rng::Engine eng(rng::stream_seed(seed, key));
  return rng::uniform01(eng);
}

SurfaceState::SurfaceState(const LatticeSpacetime& lattice, CauchySurface surface, StateVector initial)
    : lattice_(lattice),
      surface_(std::move(surface)),
      initial_(std::move(initial)),
      site_ops_(static_cast<std::size_t>(lattice.n_sites()),
                ComplexMatrix::Identity(lattice.site_dim(), lattice.site_dim())),
      touched_(static_cast<std::size_t>(lattice.n_sites()), false) {
  if (initial_.dim() != lattice_.total_dim())
    throw ValidationError("initial state dimension " + std::to_string(initial_.dim()) + " does not match lattice " +
                              std::to_string(lattice_.total_dim()),
                          "initial_state");
}

StateVector SurfaceState::state() const {
  ComplexVector v = initial_.amplitudes();
  for (Index x = 0; x < lattice_.n_sites(); ++x) {
    if (!touched_[static_cast<std::size_t>(x)]) continue;
    const Index site[] = {x};
    v = apply_on_sites(site_ops_[static_cast<std::size_t>(x)], site, lattice_.dims(), v);
  }
  return StateVector(std::move(v));
}

void SurfaceState::require_on_surface(const Cell& cell) const {
  if (cell.site < 0 || cell.site >= lattice_.n_sites())
    throw ValidationError("cell " + cell_str(cell) + " outside the lattice", "cell");
  if (surface_[cell.site] != cell.time)
    throw ValidationError("cell " + cell_str(cell) + " is not on the current surface (site time " +
                              std::to_string(surface_[cell.site]) + ")",
                          "cell");
}

std::vector<double> SurfaceState::branch_probabilities(const Cell& cell, const LocalKrausAssignment& assignment) const {
  require_on_surface(cell);
  const LocalFamily& lf = assignment.at(cell);
  if (lf.support.size() != 1 || lf.support[0] != cell.site)
    throw ValidationError("cell " + cell_str(cell) + " has a multi-site family; only single-site supports evolve",
                          "support");
  const StateVector psi = state();
  const Index site[] = {cell.site};
  const ComplexMatrix rho = reduced_on_sites(psi.amplitudes(), site, lattice_.dims());
  std::vector<double> probs;
  probs.reserve(lf.family.size());
  for (const auto& b : lf.family.branches())
    probs.push_back(b.weight * (b.op * rho * b.op.adjoint()).trace().real());
  return probs;
}

void SurfaceState::apply_branch(const Cell& cell, const LocalKrausAssignment& assignment, std::size_t branch) {
  const auto probs = branch_probabilities(cell, assignment);
  if (branch >= probs.size()) throw ValidationError("branch index out of range at cell " + cell_str(cell), "branch");
  if (probs[branch] < unravel::kZeroBranchEpsilon)
    throw ValidationError("branch " + std::to_string(branch) + " has zero probability at cell " + cell_str(cell),
                          "branch");
  const auto x = static_cast<std::size_t>(cell.site);
  ComplexMatrix next = assignment.at(cell).family[branch].op * site_ops_[x];
  next /= next.norm();
  site_ops_[x] = std::move(next);
  touched_[x] = true;
  surface_ = surface_.raised(lattice_, cell.site);
}

CellOutcome SurfaceState::advance(const Cell& cell, const LocalKrausAssignment& assignment, double draw,
                                  double zero_branch_epsilon) {
  if (!(draw >= 0.0 && draw < 1.0)) throw ValidationError("random draw must lie in [0,1)", "draw");
  const auto probs = branch_probabilities(cell, assignment);
  const std::size_t i = unravel::select_branch(probs, draw, zero_branch_epsilon);
  apply_branch(cell, assignment, i);
  return {cell, i, probs[i]};
}

AdvanceResult advance_cell(const LatticeSpacetime& lattice, const StateVector& state, const Cell& cell,
                           const LocalKrausAssignment& assignment, double draw) {
  if (state.dim() != lattice.total_dim()) throw ValidationError("state dimension mismatch", "state");
  const LocalFamily& lf = assignment.at(cell);
  std::vector<ComplexVector> images;
  std::vector<double> probs;
  for (const auto& b : lf.family.branches()) {
    images.push_back(apply_on_sites(b.op, lf.support, lattice.dims(), state.amplitudes()));
    probs.push_back(b.weight * images.back().squaredNorm());
  }
  if (!(draw >= 0.0 && draw < 1.0)) throw ValidationError("random draw must lie in [0,1)", "draw");
  const std::size_t i = unravel::select_branch(probs, draw);
  return {StateVector(std::move(images[i])), i, probs[i]};
}

std::vector<CellOutcome> evolve_to(SurfaceState& s, const CauchySurface& target,
                                   const LocalKrausAssignment& assignment, std::uint64_t seed) {
  const CellRegion region = surface_diff(s.surface(), target);
  std::vector<CellOutcome> out;
  out.reserve(region.size());
  for (const Cell& c : region.cells) out.push_back(s.advance(c, assignment, cell_draw(seed, s.lattice(), c)));
  return out;
}

void evolve_to_fixed(SurfaceState& s, const CauchySurface& target, const LocalKrausAssignment& assignment,
                     const std::function<std::size_t(const Cell&)>& choose) {
  const CellRegion region = surface_diff(s.surface(), target);
  for (const Cell& c : region.cells) s.apply_branch(c, assignment, choose(c));
}

EvolutionResult evolve_between(const LatticeSpacetime& lattice, const StateVector& state, const CauchySurface& sigma0,
                               const CauchySurface& sigma1, const LocalKrausAssignment& assignment,
                               std::uint64_t seed) {
  SurfaceState s(lattice, sigma0, state);
  unravel::TrajectoryRecord rec{seed, {}, state};
  const CellRegion region = surface_diff(sigma0, sigma1);
  for (const Cell& c : region.cells) {
    const auto o = s.advance(c, assignment, cell_draw(seed, lattice, c));
    rec.steps.push_back({o.branch_index, o.probability, s.state()});
  }
  return {s.state(), std::move(rec)};
}

DensityOperator ensemble_through(const LocalKrausAssignment& assignment, const CellRegion& region,
                                 const DensityOperator& rho) {
  const auto& lattice = assignment.lattice();
  if (rho.dim() != lattice.total_dim()) throw ValidationError("state dimension mismatch", "state");
  ComplexMatrix m = rho.matrix();
  for (const Cell& c : region.cells) {
    const LocalFamily& lf = assignment.at(c);
    m = apply_local_channel(lf.family, lf.support, lattice.dims(), m);
  }
  return DensityOperator(hermitian_part(m).eval(), DensityOperator::PositiveByConstruction{});
}

double check_spacelike_commutation(const LocalKrausAssignment& assignment, const CellRegion& region1,
                                   const CellRegion& region2) {
  const auto& lattice = assignment.lattice();
  for (const Cell& a : region1.cells)
    for (const Cell& b : region2.cells) {
      if (a == b) throw ValidationError("regions overlap at cell " + cell_str(a), "regions");
      if (!lattice.spacelike(a, b))
        throw ValidationError("cells " + cell_str(a) + " and " + cell_str(b) + " are not spacelike separated",
                              "regions");
    }

  double worst = 0.0;
  for (const Cell& a : region1.cells) {
    const LocalFamily& fa = assignment.at(a);
    for (const Cell& b : region2.cells) {
      const LocalFamily& fb = assignment.at(b);
      std::vector<Index> sites = fa.support;
      sites.insert(sites.end(), fb.support.begin(), fb.support.end());
      std::sort(sites.begin(), sites.end());
      sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
      const std::vector<Index> dims(sites.size(), lattice.site_dim());
      auto positions = [&](const std::vector<Index>& support) {
        std::vector<Index> pos;
        for (Index s : support) pos.push_back(std::lower_bound(sites.begin(), sites.end(), s) - sites.begin());
        return pos;
      };
      const auto pa = positions(fa.support);
      const auto pb = positions(fb.support);
      for (const auto& ba : fa.family.branches()) {
        const ComplexMatrix ea = embed_operator(ba.op, pa, dims);
        for (const auto& bb : fb.family.branches())
          worst = std::max(worst, commutator_norm(ea, embed_operator(bb.op, pb, dims)));
      }
    }
  }
  return worst;
}

double check_no_signaling(const LocalKrausAssignment& assignment, const CellRegion& region,
                          const LocalObservable& observable, const StateVector& psi) {
  const auto& lattice = assignment.lattice();
  if (observable.sites.empty()) throw ValidationError("observable has no sites", "observable");
  for (std::size_t i = 0; i < observable.sites.size(); ++i) {
    const Index s = observable.sites[i];
    if (s < 0 || s >= lattice.n_sites()) throw ValidationError("observable site out of range", "observable");
    if (i > 0 && s <= observable.sites[i - 1])
      throw ValidationError("observable sites must be strictly ascending", "observable");
    for (const Cell& c : region.cells) {
      const LocalFamily& lf = assignment.at(c);
      for (Index support_site : lf.support)
        if (!lattice.spacelike({support_site, c.time}, {s, observable.time}))
          throw ValidationError("observable at site " + std::to_string(s) + " lies in the causal shadow of cell " +
                                    cell_str(c),
                                "observable");
    }
  }
  const Index sub = static_cast<Index>(std::pow(lattice.site_dim(), observable.sites.size()));
  if (observable.op.rows() != sub || observable.op.cols() != sub)
    throw ValidationError("observable dimension does not match its sites", "observable");

  std::vector<Index> traced;
  for (Index x = 0; x < lattice.n_sites(); ++x)
    if (!std::binary_search(observable.sites.begin(), observable.sites.end(), x)) traced.push_back(x);

  const DensityOperator before = DensityOperator::pure(psi);
  const DensityOperator after = ensemble_through(assignment, region, before);
  const double e0 = expectation(partial_trace(before, lattice.dims(), traced), observable.op);
  const double e1 = expectation(partial_trace(after, lattice.dims(), traced), observable.op);
  return std::abs(e0 - e1);
}

}  // namespace collapse::relnet
