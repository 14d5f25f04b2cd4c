#include "collapse/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "collapse/error.hpp"
#include "collapse/io.hpp"
#include "collapse/linops.hpp"
#include "collapse/massshell.hpp"
#include "collapse/nogo.hpp"
#include "collapse/random.hpp"
#include "collapse/relnet.hpp"
#include "collapse/semigroup.hpp"
#include "collapse/unravel.hpp"

namespace collapse::cli {

namespace {

using io::format_double;

const std::vector<std::string> kExperiments = {"unravel", "relnet", "massshell", "nogo-sweep", "vacuum-energy"};

std::string param_field(const std::string& name) { return "parameters." + name; }

/// Typed access to the parameter table; records the resolved value of every
/// parameter read and rejects parameters that were never read.
class Params {
 public:
  explicit Params(const json& given) : given_(given) {
    if (!given_.is_object()) throw ValidationError("parameters must be a JSON object", "parameters");
  }

  const json& raw(const std::string& name, const json& def) {
    const json& v = given_.contains(name) ? given_.at(name) : def;
    resolved_[name] = v;
    return resolved_[name];
  }

  double number(const std::string& name, double def) {
    const json& v = raw(name, def);
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw ValidationError(param_field(name) + " must be a finite number", param_field(name));
    return v.get<double>();
  }

  std::int64_t integer(const std::string& name, std::int64_t def, std::int64_t lo, std::int64_t hi) {
    const json& v = raw(name, def);
    if (!v.is_number_integer())
      throw ValidationError(param_field(name) + " must be an integer", param_field(name));
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi)
      throw ValidationError(param_field(name) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                            param_field(name));
    return x;
  }

  std::string string(const std::string& name, const std::string& def, const std::vector<std::string>& choices) {
    const json& v = raw(name, def);
    if (!v.is_string()) throw ValidationError(param_field(name) + " must be a string", param_field(name));
    const auto s = v.get<std::string>();
    if (std::find(choices.begin(), choices.end(), s) == choices.end())
      throw ValidationError(param_field(name) + " has unknown value '" + s + "'", param_field(name));
    return s;
  }

  bool boolean(const std::string& name, bool def) {
    const json& v = raw(name, def);
    if (!v.is_boolean()) throw ValidationError(param_field(name) + " must be true or false", param_field(name));
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& name, const json& def) {
    const json& v = raw(name, def);
    if (!v.is_array()) throw ValidationError(param_field(name) + " must be an array of numbers", param_field(name));
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number() || !std::isfinite(x.get<double>()))
        throw ValidationError(param_field(name) + " must contain finite numbers", param_field(name));
      out.push_back(x.get<double>());
    }
    return out;
  }

  /// Marks keys handled elsewhere as known, copying them into the resolved table.
  void accept(const std::vector<std::string>& names) {
    for (const auto& n : names)
      if (given_.contains(n)) resolved_[n] = given_.at(n);
  }

  json finish() const {
    for (const auto& [key, _] : given_.items())
      if (!resolved_.contains(key))
        throw ValidationError("unknown key '" + param_field(key) + "'", param_field(key));
    return resolved_;
  }

 private:
  const json& given_;
  json resolved_ = json::object();
};

/// Rethrows validation errors from library code with the field placed under "parameters".
template <typename F>
auto in_parameters(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError& e) {
    const std::string field = e.field().rfind("parameters", 0) == 0 ? e.field() : param_field(e.field());
    throw ValidationError(std::string(e.what()) + " (" + field + ")", field);
  }
}

struct Plan {
  json parameters;
  std::function<RunOutput()> execute;
};

class Csv {
 public:
  explicit Csv(std::vector<Column> columns) : columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << columns_[i].name;
    os_ << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }
  ResultFile file(std::string name) const { return {std::move(name), "csv", columns_, os_.str()}; }

 private:
  std::vector<Column> columns_;
  std::ostringstream os_;
};

std::string num(double x) { return format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }
std::string num(Index x) { return std::to_string(x); }

std::string jsonl(const std::vector<json>& lines) {
  std::string out;
  for (const auto& l : lines) out += l.dump() + '\n';
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  const std::size_t t = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (t == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < t; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += t) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Family acting on every site: one step applies f to site 0, then site 1, ...
KrausFamily product_family(const KrausFamily& f, Index n_sites, Index site_dim) {
  const std::vector<Index> dims(static_cast<std::size_t>(n_sites), site_dim);
  std::optional<KrausFamily> acc;
  for (Index k = 0; k < n_sites; ++k) {
    const Index site[] = {k};
    KrausFamily e = embed_family(f, std::span<const Index>(site), dims);
    acc = acc ? compose(e, *acc) : std::move(e);
  }
  return KrausFamily(acc->dim(), acc->branches(), f.label() + "^" + std::to_string(n_sites));
}

// ---------------------------------------------------------------- unravel

Plan prepare_unravel(const ExperimentConfig& cfg) {
  Params p(cfg.parameters);
  const Index site_dim = p.integer("site_dim", 2, 2, 16);
  const Index sites = p.integer("sites", 2, 1, 12);
  const json family_spec = p.raw("family", "dephasing:0.3");
  const json state_spec = p.raw("initial_state", "plus");
  const auto n_steps = static_cast<std::size_t>(p.integer("n_steps", 1, 0, 100000));
  const auto n_traj = static_cast<std::size_t>(p.integer("n_trajectories", 10000, 1, 100000000));
  const double eps = p.number("zero_branch_epsilon", unravel::kZeroBranchEpsilon);
  if (!(eps >= 0.0 && eps < 1.0))
    throw ValidationError("parameters.zero_branch_epsilon must lie in [0, 1)", "parameters.zero_branch_epsilon");
  const auto convergence = p.numbers("convergence", json::array());
  for (double n : convergence)
    if (!(n >= 1.0) || n != std::floor(n))
      throw ValidationError("parameters.convergence must list positive integers", "parameters.convergence");
  const bool write_traj = p.boolean("write_trajectories", true);
  json resolved = p.finish();

  const Index total = static_cast<Index>(std::pow(double(site_dim), double(sites)));
  if (total > kDefaultTolerances.max_dim)
    throw ValidationError("parameters.sites gives a state space above the dimension limit", "parameters.sites");
  KrausFamily f = in_parameters([&] {
    KrausFamily single = io::family_from_spec(family_spec, site_dim);
    if (single.dim() == total) return single;
    if (single.dim() != site_dim) throw ValidationError("family dimension matches neither a site nor the system", "family");
    return sites == 1 ? single : product_family(single, sites, site_dim);
  });
  const StateVector psi0 = in_parameters([&] { return io::state_from_spec(state_spec, sites, site_dim); });

  Plan plan;
  plan.parameters = std::move(resolved);
  plan.execute = [=, seed = cfg.seed, threads = cfg.threads] {
    unravel::SamplerConfig sc{seed, n_traj, eps, threads};
    RunOutput out;
    const DensityOperator exact = unravel::exact_ensemble(f, psi0, n_steps);
    const DensityOperator est = unravel::estimate_ensemble(f, psi0, n_steps, sc);

    Csv ens({{"row", "row index of the density matrix"},
             {"col", "column index"},
             {"estimate_re", "Monte Carlo mean state, real part"},
             {"estimate_im", "Monte Carlo mean state, imaginary part"},
             {"exact_re", "exact iterated-channel state, real part"},
             {"exact_im", "exact iterated-channel state, imaginary part"}});
    for (Index r = 0; r < exact.dim(); ++r)
      for (Index c = 0; c < exact.dim(); ++c)
        ens.row({num(r), num(c), num(est.matrix()(r, c).real()), num(est.matrix()(r, c).imag()),
                 num(exact.matrix()(r, c).real()), num(exact.matrix()(r, c).imag())});
    out.files.push_back(ens.file("ensemble.csv"));

    Csv cons({{"n_trajectories", "number of trajectories N"},
              {"trace_distance", "trace distance between Monte Carlo and exact mean states"},
              {"bound", "5/sqrt(N)"}});
    std::vector<std::size_t> ns;
    for (double n : convergence) ns.push_back(static_cast<std::size_t>(n));
    if (std::find(ns.begin(), ns.end(), n_traj) == ns.end()) ns.push_back(n_traj);
    std::sort(ns.begin(), ns.end());
    std::vector<std::pair<double, double>> points;
    for (std::size_t n : ns) {
      const double d = n == n_traj ? trace_distance(est, exact)
                                   : unravel::ensemble_consistency(f, psi0, n_steps, {seed, n, eps, threads});
      cons.row({num(n), num(d), num(5.0 / std::sqrt(double(n)))});
      points.emplace_back(std::log10(double(n)), std::log10(d));
    }
    out.files.push_back(cons.file("consistency.csv"));

    if (write_traj) {
      std::vector<json> lines(n_traj);
      parallel_for(n_traj, threads, [&](std::size_t i) {
        const auto rec = unravel::run_trajectory(f, psi0, n_steps, rng::stream_seed(seed, i), eps);
        json j = io::trajectory_to_json(rec);
        j["index"] = i;
        lines[i] = std::move(j);
      });
      out.files.push_back({"trajectories.jsonl",
                           "jsonl",
                           {{"index", "trajectory index"},
                            {"seed", "per-trajectory seed"},
                            {"branch_indices", "realized branch per step"},
                            {"final_state", "final state amplitudes {re, im}"}},
                           jsonl(lines)});
    }

    std::ostringstream s;
    s << "unravel: family " << f.label() << " (" << f.size() << " branches, dim " << f.dim() << "), " << n_steps
      << " step(s), " << n_traj << " trajectories\n";
    s << "completeness residual: " << num(f.residual()) << '\n';
    s << "trace distance (N=" << n_traj << "): " << num(trace_distance(est, exact)) << "  bound 5/sqrt(N) = "
      << num(5.0 / std::sqrt(double(n_traj))) << '\n';
    if (points.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (auto [x, y] : points) sx += x, sy += y, sxx += x * x, sxy += x * y;
      const double n = double(points.size());
      s << "log-log convergence slope: " << num((n * sxy - sx * sy) / (n * sxx - sx * sx)) << '\n';
    }
    out.summary = s.str();
    return out;
  };
  return plan;
}

// ---------------------------------------------------------------- relnet

std::string cell_str(const relnet::Cell& c) {
  return "(" + std::to_string(c.site) + "," + std::to_string(c.time) + ")";
}

Plan prepare_relnet(const ExperimentConfig& cfg) {
  Params p(cfg.parameters);
  const json state_spec = p.raw("initial_state", "plus");
  const auto n_traj = static_cast<std::size_t>(p.integer("n_trajectories", 100, 0, 10000000));
  p.accept({"n_sites", "site_dim", "horizon", "surfaces", "families", "cell_families", "observables"});
  json resolved = p.finish();

  auto scenario = std::make_shared<io::Scenario>(
      in_parameters([&] { return io::scenario_from_json(cfg.parameters, {"initial_state", "n_trajectories"}); }));
  const auto& lat = scenario->lattice;
  resolved["site_dim"] = lat.site_dim();
  resolved["horizon"] = lat.horizon();
  const StateVector psi0 = in_parameters([&] { return io::state_from_spec(state_spec, lat.n_sites(), lat.site_dim()); });
  if (psi0.dim() != lat.total_dim())
    throw ValidationError("parameters.initial_state has the wrong dimension", "parameters.initial_state");
  const bool admissible = scenario->assignment.admissible();

  Plan plan;
  plan.parameters = std::move(resolved);
  plan.execute = [=, seed = cfg.seed, threads = cfg.threads] {
    const auto& sc = *scenario;
    const auto& assignment = sc.assignment;
    RunOutput out;
    std::vector<relnet::CellRegion> regions;
    for (std::size_t s = 1; s < sc.surfaces.size(); ++s)
      regions.push_back(relnet::surface_diff(sc.surfaces[s - 1], sc.surfaces[s]));

    Csv checks({{"check", "commutation | no_signaling | order_swap"},
                {"subject", "cells, observable or region the check applies to"},
                {"value", "commutator Frobenius norm, expectation deviation, or max amplitude difference"},
                {"tolerance", "pass threshold"},
                {"passed", "true when value <= tolerance"}});
    auto record = [&](const std::string& check, const std::string& subject, double value, double tol) {
      checks.row({check, subject, num(value), num(tol), value <= tol ? "true" : "false"});
    };

    std::set<relnet::Cell> all;
    for (const auto& r : regions) all.insert(r.cells.begin(), r.cells.end());
    double worst_comm = 0.0;
    std::size_t n_pairs = 0;
    for (auto a = all.begin(); a != all.end(); ++a)
      for (auto b = std::next(a); b != all.end(); ++b) {
        if (!lat.spacelike(*a, *b)) continue;
        const double v = relnet::check_spacelike_commutation(assignment, {{*a}}, {{*b}});
        record("commutation", cell_str(*a) + " " + cell_str(*b), v, 0.0);
        worst_comm = std::max(worst_comm, v);
        ++n_pairs;
      }

    double worst_signal = 0.0;
    std::size_t n_signal = 0;
    for (std::size_t r = 0; r < regions.size(); ++r)
      for (std::size_t o = 0; o < sc.observables.size(); ++o) {
        double v = 0.0;
        try {
          v = relnet::check_no_signaling(assignment, regions[r], sc.observables[o], psi0);
        } catch (const ValidationError&) {
          continue;  // observable in the causal shadow of the region
        }
        record("no_signaling", "region " + std::to_string(r + 1) + " observable " + std::to_string(o), v, 1e-12);
        worst_signal = std::max(worst_signal, v);
        ++n_signal;
      }

    double worst_swap = 0.0;
    if (admissible)
      for (std::size_t r = 0; r < regions.size(); ++r) {
        std::vector<relnet::Cell> forward(regions[r].cells.begin(), regions[r].cells.end());
        std::vector<relnet::Cell> swapped = forward;
        std::stable_sort(swapped.begin(), swapped.end(), [](const relnet::Cell& a, const relnet::Cell& b) {
          return a.time != b.time ? a.time < b.time : a.site > b.site;
        });
        relnet::SurfaceState canonical(lat, sc.surfaces[r], psi0), replay(lat, sc.surfaces[r], psi0);
        std::map<relnet::Cell, std::size_t> branch;
        for (const auto& c : forward)
          branch[c] = canonical.advance(c, assignment, relnet::cell_draw(seed, lat, c)).branch_index;
        for (const auto& c : swapped) replay.apply_branch(c, assignment, branch.at(c));
        const double v = (canonical.state().amplitudes() - replay.state().amplitudes()).cwiseAbs().maxCoeff();
        record("order_swap", "region " + std::to_string(r + 1), v, 0.0);
        worst_swap = std::max(worst_swap, v);
      }
    out.files.push_back(checks.file("checks.csv"));

    std::vector<ComplexMatrix> obs_full;
    for (const auto& o : sc.observables) obs_full.push_back(embed_operator(o.op, o.sites, lat.dims()));
    const std::size_t n_run = admissible ? n_traj : 0;
    std::vector<json> lines(n_run);
    parallel_for(n_run, threads, [&](std::size_t i) {
      const std::uint64_t tseed = rng::stream_seed(seed, i);
      relnet::SurfaceState st(lat, sc.surfaces.front(), psi0);
      json outcomes = json::array();
      for (std::size_t s = 1; s < sc.surfaces.size(); ++s)
        for (const auto& oc : relnet::evolve_to(st, sc.surfaces[s], assignment, tseed))
          outcomes.push_back({oc.cell.site, oc.cell.time, oc.branch_index});
      const StateVector fin = st.state();
      json expect = json::array();
      for (const auto& o : obs_full) expect.push_back(fin.amplitudes().dot(o * fin.amplitudes()).real());
      lines[i] = {{"index", i}, {"seed", tseed}, {"outcomes", std::move(outcomes)},
                  {"observables", std::move(expect)}, {"final_state", io::state_to_json(fin)}};
    });
    out.files.push_back({"trajectories.jsonl",
                         "jsonl",
                         {{"index", "trajectory index"},
                          {"seed", "per-trajectory seed; cell draws are keyed by (seed, cell)"},
                          {"outcomes", "[site, time, branch] for every cell, canonical order"},
                          {"observables", "expectation of each configured observable on the final state"},
                          {"final_state", "final state amplitudes {re, im}"}},
                         jsonl(lines)});

    std::ostringstream s;
    s << "relnet: " << lat.n_sites() << " sites (dim " << lat.site_dim() << "), " << sc.surfaces.size()
      << " surfaces, " << all.size() << " cells\n";
    s << "assignment admissible: " << (admissible ? "yes" : "no (evolution skipped)") << '\n';
    s << "spacelike cell pairs: " << n_pairs << ", max commutator norm " << num(worst_comm) << '\n';
    s << "no-signaling checks: " << n_signal << ", max deviation " << num(worst_signal) << '\n';
    if (admissible) s << "order swap max amplitude difference: " << num(worst_swap) << '\n';
    s << "trajectories: " << n_run << '\n';
    out.summary = s.str();
    return out;
  };
  return plan;
}

// ---------------------------------------------------------------- massshell

Plan prepare_massshell(const ExperimentConfig& cfg) {
  Params p(cfg.parameters);
  const double mass = p.number("mass", 1.0);
  const int dim = static_cast<int>(p.integer("spatial_dim", 1, 1, 3));
  const auto cutoffs = p.numbers("cutoffs", json::array({10.0, 100.0, 1000.0, 10000.0}));
  const auto rapidities = p.numbers("rapidities", dim == 1 ? json::array({0.5, 1.0, 2.0}) : json::array());
  const auto interval = p.numbers("boost_interval", json::array({-1.0, 1.0}));
  json resolved = p.finish();

  if (interval.size() != 2)
    throw ValidationError("parameters.boost_interval must be [k_lo, k_hi]", "parameters.boost_interval");
  const auto slice = in_parameters([&] { return massshell::make_slice(mass, dim, interval[0], interval[1]); });
  if (dim != 1 && !rapidities.empty())
    throw ValidationError("parameters.rapidities requires spatial_dim 1", "parameters.rapidities");
  if (cutoffs.empty()) throw ValidationError("parameters.cutoffs must not be empty", "parameters.cutoffs");
  for (std::size_t i = 0; i < cutoffs.size(); ++i)
    if (!(cutoffs[i] > 0.0) || (i > 0 && !(cutoffs[i] > cutoffs[i - 1])))
      throw ValidationError("parameters.cutoffs must be positive and strictly increasing", "parameters.cutoffs");

  Plan plan;
  plan.parameters = std::move(resolved);
  plan.execute = [=] {
    RunOutput out;
    const auto scan = massshell::divergence_scan(mass, dim, cutoffs);
    Csv sc({{"cutoff", "momentum cutoff K"},
            {"omega", "invariant measure of |k| < K by adaptive quadrature"},
            {"closed_form", "invariant measure from the antiderivative"},
            {"relative_error", "|omega - closed_form| / closed_form"},
            {"asymptote", dim == 1 ? "2 ln(2K/m)" : "2 pi K^2"},
            {"delta_omega", "omega minus omega at the previous cutoff (empty on the first row)"}});
    double worst = 0.0;
    for (std::size_t i = 0; i < scan.size(); ++i) {
      const auto& pt = scan[i];
      sc.row({num(pt.cutoff), num(pt.omega), num(pt.closed_form), num(pt.relative_error), num(pt.asymptote),
              i ? num(pt.omega - scan[i - 1].omega) : ""});
      worst = std::max(worst, pt.relative_error);
    }
    out.files.push_back(sc.file("scan.csv"));

    std::ostringstream s;
    s << "massshell: mass " << num(mass) << ", spatial_dim " << dim << '\n';
    s << "max quadrature relative error: " << num(worst) << '\n';
    if (scan.size() >= 2) s << "asymptotic slope: " << num(massshell::asymptotic_slope(scan, dim)) << '\n';

    if (!rapidities.empty()) {
      Csv bo({{"rapidity", "boost rapidity eta"},
              {"k_lo", "boosted lower momentum"},
              {"k_hi", "boosted upper momentum"},
              {"omega", "invariant measure of the original interval"},
              {"omega_boosted", "invariant measure of the boosted interval"},
              {"invariant_relative_error", "|omega_boosted - omega| / omega"},
              {"naive", "Lebesgue length of the original interval"},
              {"naive_boosted", "Lebesgue length of the boosted interval"},
              {"naive_relative_error", "|naive_boosted - naive| / naive"}});
      const double w0 = massshell::invariant_measure(slice);
      const double n0 = massshell::naive_measure(slice);
      for (double eta : rapidities) {
        const auto b = massshell::boost_slice(slice, massshell::BoostParameter{eta});
        const double w1 = massshell::invariant_measure(b);
        const double n1 = massshell::naive_measure(b);
        const double ei = std::abs(w1 - w0) / std::abs(w0);
        const double en = std::abs(n1 - n0) / std::abs(n0);
        bo.row({num(eta), num(b.k_lo), num(b.k_hi), num(w0), num(w1), num(ei), num(n0), num(n1), num(en)});
        s << "rapidity " << num(eta) << ": invariant error " << num(ei) << ", naive error " << num(en) << '\n';
      }
      out.files.push_back(bo.file("boosts.csv"));
    }
    out.summary = s.str();
    return out;
  };
  return plan;
}

// ---------------------------------------------------------------- nogo-sweep

Plan prepare_nogo(const ExperimentConfig& cfg) {
  Params p(cfg.parameters);
  nogo::SweepConfig sc;
  sc.n_instances = static_cast<std::size_t>(p.integer("n_instances", 1000, 1, 10000000));
  sc.ambient_dim = p.integer("ambient_dim", 4, 4, 256);
  const auto vac = p.string("vacuum", "haar", {"haar", "maximally_entangled", "product"});
  sc.vacuum = vac == "haar" ? nogo::VacuumKind::haar
              : vac == "product" ? nogo::VacuumKind::product
                                 : nogo::VacuumKind::maximally_entangled;
  sc.branches = p.integer("branches", 2, 0, 64);
  sc.seed = cfg.seed;
  json resolved = p.finish();
  in_parameters([&] { return nogo::sweep_factors(sc.ambient_dim); });

  Plan plan;
  plan.parameters = std::move(resolved);
  plan.execute = [=] {
    const auto sum = nogo::random_nogo_sweep(sc);
    RunOutput out;
    std::vector<json> lines;
    for (std::size_t i = 0; i < sum.instances.size(); ++i) {
      const auto& inst = sum.instances[i];
      json j = io::report_to_json(inst.instance_seed, inst.report);
      j["index"] = i;
      j["construction"] = inst.construction;
      j["is_cyclic"] = inst.report.is_cyclic;
      j["commutation_residual"] = inst.report.commutation_residual;
      j["max_residual"] = inst.report.max_residual;
      lines.push_back(std::move(j));
    }
    out.files.push_back({"instances.jsonl",
                         "jsonl",
                         {{"index", "instance index"},
                          {"instance_seed", "seed the instance was generated from"},
                          {"construction", "generic | proportional | diagonal_mixture"},
                          {"purity", "purity of the mean state from the vacuum"},
                          {"residuals", "||K_g - c_g K_ref||_F for every branch g"},
                          {"max_residual", "largest proportionality residual"},
                          {"commutation_residual", "largest commutator norm with the local algebra"},
                          {"is_cyclic", "whether the vacuum is cyclic for the local algebra"},
                          {"verdict", "deterministic | stochastic-violates-purity | "
                                      "stochastic-violates-commutation | counterexample"}},
                         jsonl(lines)});
    Csv cs({{"n_instances", "instances generated"},
            {"ambient_dim", "dimension of the bipartite space"},
            {"factor_dim", "dimension of the algebra factor"},
            {"vacuum", "vacuum construction"},
            {"n_cyclic", "instances with a cyclic vacuum"},
            {"n_commuting", "instances whose branches commute with the algebra"},
            {"n_pure", "instances with vacuum mean-state purity >= 1 - 1e-10"},
            {"n_deterministic", "pure instances with all residuals <= 1e-8"},
            {"n_violates_purity", "instances with purity < 1 - 1e-10"},
            {"n_counterexamples", "pure, commuting, non-proportional instances"},
            {"n_contrapositive_failures", "instances with residual > 1e-6 and purity >= 1 - 1e-6"},
            {"pure_fraction", "n_pure / n_instances"},
            {"max_pure_residual", "largest residual among pure instances"}});
    cs.row({num(sum.n_instances), num(sc.ambient_dim), num(sum.factor_dim), vac, num(sum.n_cyclic),
            num(sum.n_commuting), num(sum.n_pure), num(sum.n_deterministic), num(sum.n_violates_purity),
            num(sum.n_counterexamples), num(sum.n_contrapositive_failures), num(sum.pure_fraction),
            num(sum.max_pure_residual)});
    out.files.push_back(cs.file("summary.csv"));

    std::ostringstream s;
    s << "nogo-sweep: " << sum.n_instances << " instances, ambient dim " << sc.ambient_dim << " = " << sum.factor_dim
      << " x " << sum.commutant_dim << ", vacuum " << vac << '\n';
    s << "cyclic: " << sum.n_cyclic << ", commuting: " << sum.n_commuting << ", pure: " << sum.n_pure
      << " (fraction " << num(sum.pure_fraction) << ")\n";
    s << "deterministic: " << sum.n_deterministic << ", violates purity: " << sum.n_violates_purity
      << ", counterexamples: " << sum.n_counterexamples << '\n';
    s << "max residual among pure instances: " << num(sum.max_pure_residual) << '\n';
    s << "contrapositive failures: " << sum.n_contrapositive_failures << '\n';
    out.summary = s.str();
    std::size_t cyclic_counterexamples = 0;
    for (const auto& inst : sum.instances)
      cyclic_counterexamples += inst.report.is_cyclic && inst.report.verdict == nogo::Verdict::counterexample;
    if (cyclic_counterexamples > 0)
      out.summary += "INCONSISTENT: " + std::to_string(cyclic_counterexamples) +
                     " counterexamples with a cyclic vacuum\n";
    return out;
  };
  return plan;
}

// ---------------------------------------------------------------- vacuum-energy

Plan prepare_vacuum(const ExperimentConfig& cfg) {
  Params p(cfg.parameters);
  const Index n_sites = p.integer("n_sites", 4, 2, 10);
  const double coupling = p.number("coupling", 1.0);
  const double field = p.number("field", 1.0);
  const json family_spec = p.raw("family", "dephasing:0.1");
  const auto n_steps = static_cast<std::size_t>(p.integer("n_steps", 10, 1, 100000));
  json resolved = p.finish();

  const ComplexMatrix h = nogo::transverse_field_ising(n_sites, coupling, field);
  const auto model = std::make_shared<nogo::VacuumModel>(in_parameters([&] { return nogo::VacuumModel(h); }));
  const KrausFamily f = in_parameters([&] {
    if (family_spec == "spectral") return nogo::spectral_projector_family(model->hamiltonian());
    KrausFamily single = io::family_from_spec(family_spec, 2);
    if (single.dim() == model->hamiltonian().rows()) return single;
    if (single.dim() != 2) throw ValidationError("family dimension matches neither a site nor the chain", "family");
    return product_family(single, n_sites, 2);
  });

  Plan plan;
  plan.parameters = std::move(resolved);
  plan.execute = [=] {
    const auto trace = nogo::vacuum_energy_trace(*model, f, n_steps);
    RunOutput out;
    Csv cs({{"step", "number of ensemble steps k"},
            {"energy", "Tr(H rhobar_k) with the ground energy shifted to 0"},
            {"rate", "(energy - energy at k = 0) / k (empty at k = 0)"}});
    for (std::size_t k = 0; k < trace.size(); ++k)
      cs.row({num(k), num(trace[k]), k ? num((trace[k] - trace[0]) / double(k)) : ""});
    out.files.push_back(cs.file("energy.csv"));
    const double rate = (trace.back() - trace.front()) / double(n_steps);
    std::ostringstream s;
    s << "vacuum-energy: transverse-field Ising chain, " << n_sites << " sites, J = " << num(coupling)
      << ", h = " << num(field) << '\n';
    s << "ground energy offset: " << num(model->ground_energy_offset()) << ", gap: " << num(model->gap()) << '\n';
    s << "family: " << f.label() << " (" << f.size() << " branches)\n";
    s << "energy production rate after " << n_steps << " steps: " << num(rate) << '\n';
    out.summary = s.str();
    if (rate < -1e-10) out.summary += "INCONSISTENT: energy production rate below the vacuum floor\n";
    return out;
  };
  return plan;
}

Plan prepare(const ExperimentConfig& cfg) {
  if (cfg.experiment == "unravel") return prepare_unravel(cfg);
  if (cfg.experiment == "relnet") return prepare_relnet(cfg);
  if (cfg.experiment == "massshell") return prepare_massshell(cfg);
  if (cfg.experiment == "nogo-sweep") return prepare_nogo(cfg);
  return prepare_vacuum(cfg);
}

json config_json(const ExperimentConfig& cfg, json parameters) {
  return {{"experiment", cfg.experiment}, {"seed", cfg.seed},        {"threads", cfg.threads},
          {"output_dir", cfg.output_dir}, {"description", cfg.description}, {"parameters", std::move(parameters)}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

template <typename F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << " [field: " << e.field() << "]\n";
    return kValidationFailure;
  } catch (const json::exception& e) {
    err << "error: malformed config: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const InconsistencyError& e) {
    err << "internal inconsistency: " << e.what() << '\n';
    return kInconsistency;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInconsistency;
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  io::reject_unknown_keys(j, {"experiment", "seed", "threads", "output_dir", "description", "parameters"}, "");
  if (!j.contains("experiment")) throw ValidationError("missing required key 'experiment'", "experiment");
  ExperimentConfig cfg;
  if (!j.at("experiment").is_string()) throw ValidationError("experiment must be a string", "experiment");
  cfg.experiment = j.at("experiment").get<std::string>();
  if (std::find(kExperiments.begin(), kExperiments.end(), cfg.experiment) == kExperiments.end())
    throw ValidationError("unknown experiment '" + cfg.experiment + "'", "experiment");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ValidationError("seed must be a non-negative integer", "seed");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    const json& t = j.at("threads");
    if (!t.is_number_unsigned() || t.get<std::uint64_t>() < 1 || t.get<std::uint64_t>() > 256)
      throw ValidationError("threads must be an integer in [1, 256]", "threads");
    cfg.threads = t.get<unsigned>();
  }
  cfg.output_dir = "runs/" + cfg.experiment;
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string() || j.at("output_dir").get<std::string>().empty())
      throw ValidationError("output_dir must be a non-empty string", "output_dir");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("description")) {
    if (!j.at("description").is_string()) throw ValidationError("description must be a string", "description");
    cfg.description = j.at("description").get<std::string>();
  }
  if (j.contains("parameters")) {
    if (!j.at("parameters").is_object()) throw ValidationError("parameters must be a JSON object", "parameters");
    cfg.parameters = j.at("parameters");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config file '" + path.string() + "'", "config");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what(), "config");
  }
  return parse_config(j);
}

json resolve(const ExperimentConfig& cfg) { return config_json(cfg, prepare(cfg).parameters); }

RunOutput execute(const ExperimentConfig& cfg) { return prepare(cfg).execute(); }

std::filesystem::path output_directory(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return std::filesystem::path(root) / dir;
  return dir;
}

int verify(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config_path);
    prepare(cfg);
    out << "config OK: " << cfg.experiment << '\n';
    return int(kSuccess);
  });
}

int run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config_path);
    const Plan plan = prepare(cfg);
    const RunOutput result = plan.execute();

    const auto dir = output_directory(cfg);
    std::filesystem::create_directories(dir);
    json files = json::array();
    for (const auto& f : result.files) {
      write_file(dir / f.name, f.content);
      json cols = json::array();
      for (const auto& c : f.columns) cols.push_back({{"name", c.name}, {"doc", c.doc}});
      files.push_back({{"name", f.name}, {"format", f.format}, {"columns", std::move(cols)}});
    }
    files.push_back({{"name", "summary.txt"}, {"format", "text"}, {"columns", json::array()}});
    write_file(dir / "summary.txt", result.summary);
    const json manifest = {{"tool", "collapse-lab"},
                           {"created_utc", utc_timestamp()},
                           {"config", config_json(cfg, plan.parameters)},
                           {"files", std::move(files)}};
    write_file(dir / "manifest.json", manifest.dump(2) + '\n');
    out << result.summary;
    out << "results written to " << dir.string() << '\n';
    if (result.summary.find("INCONSISTENT") != std::string::npos) {
      err << "internal inconsistency detected; see summary.txt\n";
      return int(kInconsistency);
    }
    return int(kSuccess);
  });
}

}  // namespace collapse::cli
