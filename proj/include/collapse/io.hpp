#pragma once

// JSON encodings of families, states, scenarios and reports.
//
// Family:     {"dim": d, "label": "...", "branches": [{"weight": w, "re": [[..]], "im": [[..]]}]}
//             (matrices row-major; doubles round-trip bit-exactly)
// Trajectory: {"seed": s, "branch_indices": [...], "final_state": {"re": [...], "im": [...]}}
// Report:     {"instance_seed": s, "purity": p, "residuals": [...], "verdict": "..."}
// Scenario:   {"n_sites": n, "site_dim": d, "surfaces": [[...], ...],
//              "families": {"<site>" | "*": label-or-family}, "observables": [...]}

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "collapse/linops.hpp"
#include "collapse/nogo.hpp"
#include "collapse/relnet.hpp"
#include "collapse/semigroup.hpp"
#include "collapse/unravel.hpp"

namespace collapse::io {

using nlohmann::json;

json matrix_to_json(const ComplexMatrix& m);  // {"re": [[..]], "im": [[..]]}
ComplexMatrix matrix_from_json(const json& j, const std::string& field);

json family_to_json(const KrausFamily& f);
KrausFamily family_from_json(const json& j);

/// Named single-site families: identity, dephasing:p, depolarizing:p,
/// amplitude_damping:g, measure, localization:width, hadamard.
KrausFamily family_from_label(const std::string& label, Index site_dim = 2);
/// A label string or a family object.
KrausFamily family_from_spec(const json& j, Index site_dim = 2);

/// Named observables on one site: I, X, Y, Z, number (diag(0..d-1)), or a matrix object.
ComplexMatrix observable_from_spec(const json& j, Index dim);

json state_to_json(const StateVector& psi);  // {"re": [...], "im": [...]}
/// "zero", "plus", "ghz", "w", "haar:<seed>" or {"re": [...], "im": [...]}.
StateVector state_from_spec(const json& j, Index n_sites, Index site_dim);

json trajectory_to_json(const unravel::TrajectoryRecord& r);
json report_to_json(std::uint64_t instance_seed, const nogo::CertificationReport& rep);

struct Scenario {
  relnet::LatticeSpacetime lattice;
  std::vector<relnet::CauchySurface> surfaces;
  relnet::LocalKrausAssignment assignment;
  std::vector<relnet::LocalObservable> observables;
};

/// Parses and validates a scenario; `extra_keys` are tolerated in addition to the schema.
Scenario scenario_from_json(const json& j, const std::vector<std::string>& extra_keys = {});

/// Throws ValidationError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed, const std::string& context);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double x);

}  // namespace collapse::io
