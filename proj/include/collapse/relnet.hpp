#pragma once

// 1+1 dimensional lattice spacetime with local stochastic evolution between
// Cauchy surfaces.
//
// Sites form a periodic ring; a surface assigns an integer time to every site
// with neighbouring times differing by at most one. The region between two
// surfaces is a set of cells (site, time), each carrying a Kraus family that
// acts on its own site only. Two cells are spacelike separated when their
// cyclic spatial distance exceeds their time difference.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "collapse/linops.hpp"
#include "collapse/semigroup.hpp"
#include "collapse/unravel.hpp"

namespace collapse::relnet {

/// Cell ordering is canonical: time first, then site.
struct Cell {
  Index site;
  Index time;

  friend auto operator<=>(const Cell& a, const Cell& b) {
    if (auto c = a.time <=> b.time; c != 0) return c;
    return a.site <=> b.site;
  }
  friend bool operator==(const Cell&, const Cell&) = default;
};

class LatticeSpacetime {
 public:
  LatticeSpacetime(Index n_sites, Index site_dim = 2, Index horizon = 64);

  Index n_sites() const noexcept { return n_sites_; }
  Index site_dim() const noexcept { return site_dim_; }
  Index horizon() const noexcept { return horizon_; }
  Index total_dim() const noexcept { return total_dim_; }
  std::span<const Index> dims() const noexcept { return dims_; }

  Index distance(Index x, Index y) const;
  /// Neither cell lies in the closed light cone of the other.
  bool spacelike(const Cell& a, const Cell& b) const;

 private:
  Index n_sites_;
  Index site_dim_;
  Index horizon_;
  Index total_dim_;
  std::vector<Index> dims_;
};

class CauchySurface {
 public:
  /// Rejects slopes above one between cyclic neighbours and times outside
  /// [0, horizon]; the error names the offending site index.
  CauchySurface(const LatticeSpacetime& lattice, std::vector<Index> times);

  static CauchySurface flat(const LatticeSpacetime& lattice, Index time);

  const std::vector<Index>& times() const noexcept { return times_; }
  Index operator[](Index site) const { return times_[static_cast<std::size_t>(site)]; }
  Index size() const noexcept { return static_cast<Index>(times_.size()); }

  /// Same surface with `site` pushed one step to the future (validated).
  CauchySurface raised(const LatticeSpacetime& lattice, Index site) const;

  friend bool operator==(const CauchySurface&, const CauchySurface&) = default;

 private:
  std::vector<Index> times_;
};

struct CellRegion {
  std::set<Cell> cells;

  bool empty() const noexcept { return cells.empty(); }
  std::size_t size() const noexcept { return cells.size(); }
};

/// Cells (x, t) with sigma0[x] <= t < sigma1[x].
CellRegion surface_diff(const CauchySurface& sigma0, const CauchySurface& sigma1);

/// A family together with the sites it acts on (in the order of its tensor factors).
struct LocalFamily {
  std::vector<Index> support;
  KrausFamily family;
};

/// Kraus families for the cells of a lattice: a per-site default plus
/// optional per-cell overrides. Only single-site supports are admissible for
/// evolution; wider supports exist for violation fixtures.
class LocalKrausAssignment {
 public:
  explicit LocalKrausAssignment(LatticeSpacetime lattice);

  void set_site_family(Index site, KrausFamily family);
  void set_cell_family(const Cell& cell, LocalFamily family);

  const LatticeSpacetime& lattice() const noexcept { return lattice_; }
  /// Throws ValidationError when no family covers the cell.
  const LocalFamily& at(const Cell& cell) const;
  bool covers(const Cell& cell) const;
  bool admissible() const;

 private:
  void check_local(const LocalFamily& f) const;

  LatticeSpacetime lattice_;
  std::map<Index, LocalFamily> site_families_;
  std::map<Cell, LocalFamily> cell_families_;
};

/// Per-cell random draw derived from the seed and the cell alone, so the
/// draw a cell receives does not depend on processing order.
double cell_draw(std::uint64_t seed, const LatticeSpacetime& lattice, const Cell& cell);

struct CellOutcome {
  Cell cell;
  std::size_t branch_index;
  double probability;
};

/// State on a Cauchy surface: an initial vector plus, per site, the product of
/// the local operators realized so far. The vector is materialized by
/// applying the per-site products in ascending site order, so evolution
/// through spacelike separated regions yields bit-identical states whatever
/// the order in which the regions are processed.
class SurfaceState {
 public:
  SurfaceState(const LatticeSpacetime& lattice, CauchySurface surface, StateVector initial);

  const CauchySurface& surface() const noexcept { return surface_; }
  const LatticeSpacetime& lattice() const noexcept { return lattice_; }
  /// Normalized current state.
  StateVector state() const;

  /// Branch probabilities for the next event at `cell` (which must sit on the surface).
  std::vector<double> branch_probabilities(const Cell& cell, const LocalKrausAssignment& assignment) const;

  /// Applies a chosen branch and raises the surface at the cell's site.
  void apply_branch(const Cell& cell, const LocalKrausAssignment& assignment, std::size_t branch);

  /// Samples a branch with `draw` in [0, 1) and applies it.
  CellOutcome advance(const Cell& cell, const LocalKrausAssignment& assignment, double draw,
                      double zero_branch_epsilon = unravel::kZeroBranchEpsilon);

 private:
  void require_on_surface(const Cell& cell) const;

  LatticeSpacetime lattice_;
  CauchySurface surface_;
  StateVector initial_;
  std::vector<ComplexMatrix> site_ops_;
  std::vector<bool> touched_;
};

/// One stochastic local update: (post_state, branch, probability).
struct AdvanceResult {
  StateVector state;
  std::size_t branch_index;
  double probability;
};
AdvanceResult advance_cell(const LatticeSpacetime& lattice, const StateVector& state, const Cell& cell,
                           const LocalKrausAssignment& assignment, double draw);

/// Evolves through every cell of the region between the state's surface and
/// `target`, in canonical order, using cell_draw(seed, .) for each cell.
std::vector<CellOutcome> evolve_to(SurfaceState& s, const CauchySurface& target,
                                   const LocalKrausAssignment& assignment, std::uint64_t seed);

/// Same, with the realized branch of each cell fixed by `choose`.
void evolve_to_fixed(SurfaceState& s, const CauchySurface& target, const LocalKrausAssignment& assignment,
                     const std::function<std::size_t(const Cell&)>& choose);

struct EvolutionResult {
  StateVector state;
  unravel::TrajectoryRecord record;
};
EvolutionResult evolve_between(const LatticeSpacetime& lattice, const StateVector& state, const CauchySurface& sigma0,
                               const CauchySurface& sigma1, const LocalKrausAssignment& assignment,
                               std::uint64_t seed);

/// Exact mean state after every cell of `region` has acted (canonical order).
DensityOperator ensemble_through(const LocalKrausAssignment& assignment, const CellRegion& region,
                                 const DensityOperator& rho);

/// Largest Frobenius norm of [A, B] over branch operators A of cells in
/// region1 and B of cells in region2, both embedded on the union of their
/// supports. Rejects overlapping or causally connected regions.
double check_spacelike_commutation(const LocalKrausAssignment& assignment, const CellRegion& region1,
                                   const CellRegion& region2);

/// Observable supported on `sites` (ascending), located at `time`.
struct LocalObservable {
  std::vector<Index> sites;
  Index time;
  ComplexMatrix op;
};

/// |<O>_rho - <O>_rhobar| where rhobar is the exact mean state after the
/// region. Rejects observables inside the causal shadow of the region.
double check_no_signaling(const LocalKrausAssignment& assignment, const CellRegion& region,
                          const LocalObservable& observable, const StateVector& psi);

}  // namespace collapse::relnet
