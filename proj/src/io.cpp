#include "collapse/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "collapse/families.hpp"
#include "collapse/random.hpp"

namespace collapse::io {

namespace {

double number_at(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field + " must be a number", field);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(field + " must be finite", field);
  return v;
}

double parse_parameter(const std::string& label, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("family label '" + label + "' has an invalid parameter", "family");
  }
}

std::vector<double> number_row(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field + " must be an array", field);
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_at(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

Index index_at(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ValidationError(field + " must be an integer", field);
  return j.get<Index>();
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed, const std::string& context) {
  if (!j.is_object()) throw ValidationError(context + " must be a JSON object", context);
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      const std::string field = context.empty() ? key : context + "." + key;
      throw ValidationError("unknown key '" + field + "'", field);
    }
}

json matrix_to_json(const ComplexMatrix& m) {
  json re = json::array();
  json im = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json rr = json::array();
    json ri = json::array();
    for (Index c = 0; c < m.cols(); ++c) {
      rr.push_back(m(r, c).real());
      ri.push_back(m(r, c).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  return {{"re", std::move(re)}, {"im", std::move(im)}};
}

ComplexMatrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("re")) throw ValidationError(field + " must have an 're' array", field);
  const json& re = j.at("re");
  if (!re.is_array() || re.empty()) throw ValidationError(field + ".re must be a non-empty array", field + ".re");
  const auto rows = static_cast<Index>(re.size());
  const auto cols = static_cast<Index>(number_row(re[0], field + ".re[0]").size());
  ComplexMatrix m = ComplexMatrix::Zero(rows, cols);
  auto fill = [&](const json& part, const std::string& name, bool imag) {
    if (!part.is_array() || static_cast<Index>(part.size()) != rows)
      throw ValidationError(name + " has the wrong number of rows", name);
    for (Index r = 0; r < rows; ++r) {
      const auto row = number_row(part[static_cast<std::size_t>(r)], name + "[" + std::to_string(r) + "]");
      if (static_cast<Index>(row.size()) != cols) throw ValidationError(name + " rows differ in length", name);
      for (Index c = 0; c < cols; ++c) {
        if (imag)
          m(r, c).imag(row[static_cast<std::size_t>(c)]);
        else
          m(r, c).real(row[static_cast<std::size_t>(c)]);
      }
    }
  };
  fill(re, field + ".re", false);
  if (j.contains("im")) fill(j.at("im"), field + ".im", true);
  return m;
}

json family_to_json(const KrausFamily& f) {
  json branches = json::array();
  for (const auto& b : f.branches()) {
    json jb = matrix_to_json(b.op);
    jb["weight"] = b.weight;
    branches.push_back(std::move(jb));
  }
  return {{"dim", f.dim()}, {"label", f.label()}, {"branches", std::move(branches)}};
}

KrausFamily family_from_json(const json& j) {
  reject_unknown_keys(j, {"dim", "label", "branches"}, "family");
  if (!j.contains("dim")) throw ValidationError("family.dim is required", "family.dim");
  if (!j.contains("branches")) throw ValidationError("family.branches is required", "family.branches");
  const Index dim = index_at(j.at("dim"), "family.dim");
  const std::string label = j.value("label", std::string{});
  const json& jb = j.at("branches");
  if (!jb.is_array()) throw ValidationError("family.branches must be an array", "family.branches");
  std::vector<KrausBranch<double>> branches;
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string where = "family.branches[" + std::to_string(i) + "]";
    reject_unknown_keys(jb[i], {"weight", "re", "im"}, where);
    const double w = jb[i].contains("weight") ? number_at(jb[i].at("weight"), where + ".weight") : 1.0;
    branches.push_back({w, matrix_from_json(jb[i], where)});
  }
  return KrausFamily(dim, std::move(branches), label);
}

KrausFamily family_from_label(const std::string& label, Index site_dim) {
  const auto colon = label.find(':');
  const std::string name = label.substr(0, colon);
  const bool has_param = colon != std::string::npos;
  const double param = has_param ? parse_parameter(label, label.substr(colon + 1)) : 0.0;
  auto need_param = [&] {
    if (!has_param) throw ValidationError("family label '" + label + "' needs a parameter (name:value)", "family");
  };
  auto need_qubit = [&] {
    if (site_dim != 2) throw ValidationError("family '" + name + "' is defined for site_dim 2 only", "family");
  };
  KrausFamily f = [&]() -> KrausFamily {
    if (name == "identity") return families::identity(site_dim);
    if (name == "measure") return families::measure_basis(site_dim);
    if (name == "dephasing") return need_param(), need_qubit(), families::dephasing(param);
    if (name == "depolarizing") return need_param(), need_qubit(), families::depolarizing(param);
    if (name == "amplitude_damping") return need_param(), need_qubit(), families::amplitude_damping(param);
    if (name == "localization") return need_param(), families::localization(site_dim, param);
    if (name == "hadamard") {
      need_qubit();
      ComplexMatrix h(2, 2);
      h << 1.0, 1.0, 1.0, -1.0;
      return families::unitary<double>(h / std::numbers::sqrt2, "hadamard");
    }
    throw ValidationError("unknown family label '" + label + "'", "family");
  }();
  return KrausFamily(f.dim(), f.branches(), label);
}

KrausFamily family_from_spec(const json& j, Index site_dim) {
  if (j.is_string()) return family_from_label(j.get<std::string>(), site_dim);
  if (j.is_object()) return family_from_json(j);
  throw ValidationError("family must be a label string or a family object", "family");
}

ComplexMatrix observable_from_spec(const json& j, Index dim) {
  if (j.is_object()) {
    ComplexMatrix m = matrix_from_json(j, "observable");
    if (m.rows() != dim || m.cols() != dim) throw ValidationError("observable matrix has wrong dimension", "observable");
    if (hermiticity_residual(m) > 1e-12) throw ValidationError("observable must be Hermitian", "observable");
    return m;
  }
  if (!j.is_string()) throw ValidationError("observable op must be a name or a matrix", "observable");
  const auto name = j.get<std::string>();
  if (name == "I") return ComplexMatrix::Identity(dim, dim);
  if (name == "number") {
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    for (Index k = 0; k < dim; ++k) m(k, k) = double(k);
    return m;
  }
  if (dim != 2) throw ValidationError("observable '" + name + "' requires site_dim 2", "observable");
  if (name == "X") return Pauli<>::X();
  if (name == "Y") return Pauli<>::Y();
  if (name == "Z") return Pauli<>::Z();
  throw ValidationError("unknown observable '" + name + "'", "observable");
}

json state_to_json(const StateVector& psi) {
  json re = json::array();
  json im = json::array();
  for (Index i = 0; i < psi.dim(); ++i) {
    re.push_back(psi[i].real());
    im.push_back(psi[i].imag());
  }
  return {{"re", std::move(re)}, {"im", std::move(im)}};
}

StateVector state_from_spec(const json& j, Index n_sites, Index site_dim) {
  const std::vector<Index> dims(static_cast<std::size_t>(n_sites), site_dim);
  const Index total = total_dim(dims);
  if (j.is_object()) {
    reject_unknown_keys(j, {"re", "im"}, "initial_state");
    const auto re = number_row(j.at("re"), "initial_state.re");
    const auto im = j.contains("im") ? number_row(j.at("im"), "initial_state.im") : std::vector<double>(re.size(), 0.0);
    if (static_cast<Index>(re.size()) != total || im.size() != re.size())
      throw ValidationError("initial_state has " + std::to_string(re.size()) + " amplitudes, expected " +
                                std::to_string(total),
                            "initial_state");
    ComplexVector v(total);
    for (Index i = 0; i < total; ++i) v(i) = {re[static_cast<std::size_t>(i)], im[static_cast<std::size_t>(i)]};
    return StateVector(std::move(v));
  }
  if (!j.is_string()) throw ValidationError("initial_state must be a name or an amplitude object", "initial_state");
  const auto name = j.get<std::string>();
  if (name == "zero") return StateVector::basis(total, 0);
  if (name == "plus") return StateVector(ComplexVector::Ones(total));
  if (name == "ghz") {
    ComplexVector v = ComplexVector::Zero(total);
    Index stride_sum = 0;
    for (Index k = 0, s = 1; k < n_sites; ++k, s *= site_dim) stride_sum += s;
    for (Index level = 0; level < site_dim; ++level) v(level * stride_sum) = 1.0;
    return StateVector(std::move(v));
  }
  if (name == "w") {
    ComplexVector v = ComplexVector::Zero(total);
    for (Index k = 0, s = 1; k < n_sites; ++k, s *= site_dim) v(s) = 1.0;
    return StateVector(std::move(v));
  }
  if (name.rfind("haar:", 0) == 0) {
    const auto seed = static_cast<std::uint64_t>(parse_parameter(name, name.substr(5)));
    rng::Engine eng(seed);
    return StateVector(rng::haar_vector(total, eng));
  }
  throw ValidationError("unknown initial_state '" + name + "'", "initial_state");
}

json trajectory_to_json(const unravel::TrajectoryRecord& r) {
  return {{"seed", r.seed}, {"branch_indices", r.branch_indices()}, {"final_state", state_to_json(r.final_state())}};
}

json report_to_json(std::uint64_t instance_seed, const nogo::CertificationReport& rep) {
  return {{"instance_seed", instance_seed},
          {"purity", rep.vacuum_purity},
          {"residuals", rep.reference_residuals},
          {"verdict", nogo::to_string(rep.verdict)}};
}

Scenario scenario_from_json(const json& j, const std::vector<std::string>& extra_keys) {
  std::vector<std::string> allowed = {"n_sites", "site_dim", "horizon", "surfaces", "families", "cell_families",
                                      "observables"};
  allowed.insert(allowed.end(), extra_keys.begin(), extra_keys.end());
  reject_unknown_keys(j, allowed, "");
  for (const char* key : {"n_sites", "surfaces", "families"})
    if (!j.contains(key)) throw ValidationError(std::string("missing required key '") + key + "'", key);

  const Index n_sites = index_at(j.at("n_sites"), "n_sites");
  const Index site_dim = j.contains("site_dim") ? index_at(j.at("site_dim"), "site_dim") : 2;
  const json& js = j.at("surfaces");
  if (!js.is_array() || js.size() < 2) throw ValidationError("surfaces must list at least two surfaces", "surfaces");

  std::vector<std::vector<Index>> raw;
  Index max_time = 0;
  for (std::size_t s = 0; s < js.size(); ++s) {
    const std::string where = "surfaces[" + std::to_string(s) + "]";
    if (!js[s].is_array()) throw ValidationError(where + " must be an array of times", where);
    std::vector<Index> times;
    for (std::size_t x = 0; x < js[s].size(); ++x) {
      times.push_back(index_at(js[s][x], where + "[" + std::to_string(x) + "]"));
      max_time = std::max(max_time, times.back());
    }
    raw.push_back(std::move(times));
  }
  const Index horizon = j.contains("horizon") ? index_at(j.at("horizon"), "horizon") : max_time + 1;
  relnet::LatticeSpacetime lattice(n_sites, site_dim, horizon);

  std::vector<relnet::CauchySurface> surfaces;
  for (std::size_t s = 0; s < raw.size(); ++s) {
    try {
      surfaces.emplace_back(lattice, raw[s]);
    } catch (const ValidationError& e) {
      throw ValidationError("surfaces[" + std::to_string(s) + "]: " + e.what(),
                            "surfaces[" + std::to_string(s) + "]." + e.field());
    }
    if (s > 0) {
      for (Index x = 0; x < n_sites; ++x)
        if (surfaces[s][x] < surfaces[s - 1][x])
          throw ValidationError("surfaces[" + std::to_string(s) + "] lies below the previous surface at site " +
                                    std::to_string(x),
                                "surfaces[" + std::to_string(s) + "].times[" + std::to_string(x) + "]");
    }
  }

  relnet::LocalKrausAssignment assignment(lattice);
  const json& jf = j.at("families");
  if (!jf.is_object()) throw ValidationError("families must map site indices to families", "families");
  if (jf.contains("*"))
    for (Index x = 0; x < n_sites; ++x) assignment.set_site_family(x, family_from_spec(jf.at("*"), site_dim));
  for (const auto& [key, value] : jf.items()) {
    if (key == "*") continue;
    Index site = -1;
    const auto res = std::from_chars(key.data(), key.data() + key.size(), site);
    if (res.ec != std::errc{} || res.ptr != key.data() + key.size() || site < 0 || site >= n_sites)
      throw ValidationError("families key '" + key + "' is not a site index", "families." + key);
    assignment.set_site_family(site, family_from_spec(value, site_dim));
  }
  if (j.contains("cell_families")) {
    const json& jc = j.at("cell_families");
    if (!jc.is_array()) throw ValidationError("cell_families must be an array", "cell_families");
    for (std::size_t i = 0; i < jc.size(); ++i) {
      const std::string where = "cell_families[" + std::to_string(i) + "]";
      reject_unknown_keys(jc[i], {"site", "time", "support", "family"}, where);
      const relnet::Cell cell{index_at(jc[i].at("site"), where + ".site"), index_at(jc[i].at("time"), where + ".time")};
      std::vector<Index> support{cell.site};
      if (jc[i].contains("support")) {
        support.clear();
        for (const auto& s : jc[i].at("support")) support.push_back(index_at(s, where + ".support"));
      }
      Index sub = 1;
      for (std::size_t k = 0; k < support.size(); ++k) sub *= site_dim;
      const json& fam = jc[i].at("family");
      KrausFamily f = fam.is_string() && support.size() == 1 ? family_from_label(fam.get<std::string>(), site_dim)
                                                             : family_from_spec(fam, sub);
      assignment.set_cell_family(cell, {std::move(support), std::move(f)});
    }
  }
  for (std::size_t s = 1; s < surfaces.size(); ++s)
    for (const auto& c : relnet::surface_diff(surfaces[s - 1], surfaces[s]).cells)
      if (!assignment.covers(c))
        throw ValidationError("no family assigned to cell (" + std::to_string(c.site) + "," + std::to_string(c.time) +
                                  ")",
                              "families");

  std::vector<relnet::LocalObservable> observables;
  if (j.contains("observables")) {
    const json& jo = j.at("observables");
    if (!jo.is_array()) throw ValidationError("observables must be an array", "observables");
    for (std::size_t i = 0; i < jo.size(); ++i) {
      const std::string where = "observables[" + std::to_string(i) + "]";
      reject_unknown_keys(jo[i], {"site", "sites", "time", "op"}, where);
      std::vector<Index> sites;
      if (jo[i].contains("site")) sites.push_back(index_at(jo[i].at("site"), where + ".site"));
      if (jo[i].contains("sites"))
        for (const auto& s : jo[i].at("sites")) sites.push_back(index_at(s, where + ".sites"));
      if (sites.empty()) throw ValidationError(where + " needs 'site' or 'sites'", where);
      for (std::size_t k = 0; k < sites.size(); ++k)
        if (sites[k] < 0 || sites[k] >= n_sites || (k > 0 && sites[k] <= sites[k - 1]))
          throw ValidationError(where + " sites must be ascending lattice sites", where + ".sites");
      const Index time = jo[i].contains("time") ? index_at(jo[i].at("time"), where + ".time")
                                                : surfaces.back()[sites.front()];
      Index sub = 1;
      for (std::size_t k = 0; k < sites.size(); ++k) sub *= site_dim;
      if (!jo[i].contains("op")) throw ValidationError(where + ".op is required", where + ".op");
      observables.push_back({std::move(sites), time, observable_from_spec(jo[i].at("op"), sub)});
    }
  }
  return {lattice, std::move(surfaces), std::move(assignment), std::move(observables)};
}

}  // namespace collapse::io
