#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "collapse/families.hpp"
#include "collapse/random.hpp"
#include "collapse/relnet.hpp"
#include "oracles.hpp"

using namespace collapse;
using namespace collapse::relnet;
using P = Pauli<double>;

namespace {

StateVector plus_all(Index n) { return StateVector(ComplexVector::Ones(Index(1) << n)); }

StateVector ghz(Index n) {
  ComplexVector v = ComplexVector::Zero(Index(1) << n);
  v(0) = v(v.size() - 1) = 1.0;
  return StateVector(v);
}

ComplexMatrix cnot() {
  ComplexMatrix m = ComplexMatrix::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("lattice geometry") {
  const LatticeSpacetime lat(6);
  CHECK(lat.total_dim() == 64);
  CHECK(lat.distance(0, 5) == 1);
  CHECK(lat.distance(1, 4) == 3);
  CHECK(lat.spacelike({0, 0}, {2, 1}));
  CHECK_FALSE(lat.spacelike({0, 0}, {1, 1}));
  CHECK_FALSE(lat.spacelike({0, 0}, {0, 3}));
  CHECK_THROWS_AS(LatticeSpacetime(13), ValidationError);  // 2^13 > 4096
  CHECK_THROWS_AS(LatticeSpacetime(0), ValidationError);
}

TEST_CASE("Cauchy surfaces keep the light-cone slope") {
  const LatticeSpacetime lat(4, 2, 8);
  CHECK_NOTHROW(CauchySurface(lat, {0, 1, 2, 1}));
  try {
    CauchySurface(lat, {0, 2, 2, 1});
    FAIL("slope violation accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("site 0") != std::string::npos);
    CHECK(e.field() == "times[0]");
  }
  CHECK_THROWS_AS(CauchySurface(lat, {0, 0, 0, 2}), ValidationError);  // wraps around: site 3 to site 0
  CHECK_THROWS_AS(CauchySurface(lat, {0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(CauchySurface(lat, {0, 0, 0, 9}), ValidationError);

  auto s = CauchySurface::flat(lat, 0).raised(lat, 1);
  CHECK(s.times() == std::vector<Index>{0, 1, 0, 0});
  CHECK_THROWS_AS(s.raised(lat, 1), ValidationError);  // would give slope 2

  // Every surface reached by admissible raises stays valid.
  rng::Engine eng(1);
  CauchySurface cur = CauchySurface::flat(lat, 0);
  for (int k = 0; k < 200; ++k) {
    const Index x = Index(eng() % 4);
    try {
      cur = cur.raised(lat, x);
    } catch (const ValidationError&) {
      continue;
    }
    CHECK_NOTHROW(CauchySurface(lat, cur.times()));
    if (cur[x] == lat.horizon()) break;
  }
}

TEST_CASE("surface_diff") {
  const LatticeSpacetime lat(4, 2, 4);
  const auto flat0 = CauchySurface::flat(lat, 0);
  CHECK(surface_diff(flat0, flat0).empty());
  CHECK(surface_diff(flat0, CauchySurface::flat(lat, 1)).size() == 4);
  const auto bump = surface_diff(flat0, CauchySurface(lat, {0, 1, 0, 0}));
  REQUIRE(bump.size() == 1);
  CHECK(*bump.cells.begin() == Cell{1, 0});
  CHECK_THROWS_AS(surface_diff(CauchySurface(lat, {0, 1, 0, 0}), flat0), ValidationError);
}

TEST_CASE("local advance") {
  const LatticeSpacetime lat(4);
  LocalKrausAssignment ids(lat);
  for (Index x = 0; x < 4; ++x) ids.set_site_family(x, families::identity(2));
  const auto psi = plus_all(4);
  const auto same = advance_cell(lat, psi, {2, 0}, ids, 0.4);
  CHECK(same.branch_index == 0);
  CHECK(same.probability == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(same.state == psi);

  LocalKrausAssignment deph(lat);
  for (Index x = 0; x < 4; ++x) deph.set_site_family(x, families::dephasing(0.25));
  const auto r0 = advance_cell(lat, psi, {1, 0}, deph, 0.1);
  const auto r1 = advance_cell(lat, psi, {1, 0}, deph, 0.9);
  CHECK(r0.probability == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r1.probability == doctest::Approx(0.25).epsilon(1e-14));
  // Embed-and-apply oracle on the full 16-dimensional space.
  const ComplexMatrix k1 = oracle::on_site(std::sqrt(0.25) * P::Z(), 1, 4, 2);
  const ComplexVector expect = (k1 * psi.amplitudes()).normalized();
  CHECK((r1.state.amplitudes() - expect).norm() <= 1e-14);

  // Computational basis states are fixed by diagonal families.
  LocalKrausAssignment meas(lat);
  for (Index x = 0; x < 4; ++x) meas.set_site_family(x, families::measure_basis(2));
  const auto basis = StateVector::basis(16, 5);
  const auto rb = advance_cell(lat, basis, {1, 0}, meas, 0.3);
  CHECK(rb.probability == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rb.state == basis);
}

TEST_CASE("surface evolution") {
  const LatticeSpacetime lat(4, 2, 8);
  LocalKrausAssignment ids(lat);
  for (Index x = 0; x < 4; ++x) ids.set_site_family(x, families::identity(2));
  const auto psi = ghz(4);
  const auto flat0 = CauchySurface::flat(lat, 0);
  CHECK(evolve_between(lat, psi, flat0, flat0, ids, 3).state == psi);
  CHECK((evolve_between(lat, psi, flat0, CauchySurface::flat(lat, 1), ids, 3).state.amplitudes() - psi.amplitudes())
            .norm() <= 1e-15);

  SUBCASE("disjoint bumps in either order give bit-identical states") {
    LocalKrausAssignment a(lat);
    rng::Engine eng(4);
    for (Index x = 0; x < 4; ++x) a.set_site_family(x, families::random_family(2, 3, eng));
    const CauchySurface b1(lat, {0, 1, 0, 0});
    const CauchySurface b2(lat, {0, 0, 0, 1});
    const CauchySurface both(lat, {0, 1, 0, 1});
    // Product input: outcomes at distinct sites are independent, so sampled draws agree.
    const StateVector product = plus_all(4);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SurfaceState s1(lat, flat0, product), s2(lat, flat0, product);
      evolve_to(s1, b1, a, seed);
      evolve_to(s1, both, a, seed);
      evolve_to(s2, b2, a, seed);
      evolve_to(s2, both, a, seed);
      CHECK(s1.state() == s2.state());
      CHECK(s1.surface() == s2.surface());
    }
    // Entangled input: the same realized branches in either order give the same state.
    const StateVector start(rng::haar_vector(16, eng));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SurfaceState s1(lat, flat0, start), s2(lat, flat0, start);
      const auto o1 = evolve_to(s1, b1, a, seed);
      const auto o2 = evolve_to(s1, both, a, seed);
      s2.apply_branch(o2[0].cell, a, o2[0].branch_index);
      s2.apply_branch(o1[0].cell, a, o1[0].branch_index);
      CHECK(s2.surface() == s1.surface());
      CHECK(s1.state() == s2.state());
    }
  }
  SUBCASE("canonical order matches direct application of the realized operators") {
    LocalKrausAssignment a(lat);
    for (Index x = 0; x < 4; ++x) a.set_site_family(x, families::depolarizing(0.3));
    const auto res = evolve_between(lat, psi, flat0, CauchySurface::flat(lat, 2), a, 99);
    ComplexVector v = psi.amplitudes();
    const auto cells = surface_diff(flat0, CauchySurface::flat(lat, 2)).cells;
    std::size_t k = 0;
    for (const Cell& c : cells) {
      const auto& op = a.at(c).family[res.record.steps[k++].branch_index].op;
      v = oracle::on_site(op, int(c.site), 4, 2) * v;
    }
    CHECK(std::abs(std::abs(v.normalized().dot(res.state.amplitudes())) - 1.0) <= 1e-13);
  }
}

TEST_CASE("spacelike commutation") {
  const LatticeSpacetime lat(4);
  LocalKrausAssignment a(lat);
  rng::Engine eng(5);
  for (Index x = 0; x < 4; ++x) a.set_site_family(x, families::random_family(2, 2, eng));
  CHECK(a.admissible());
  CHECK(check_spacelike_commutation(a, {{{0, 0}}}, {{{2, 0}}}) == 0.0);
  CHECK(check_spacelike_commutation(a, {{{0, 0}, {1, 0}}}, {{{3, 0}}}) == 0.0);
  CHECK_THROWS_AS(check_spacelike_commutation(a, {{{0, 0}}}, {{{1, 1}}}), ValidationError);
  CHECK_THROWS_AS(check_spacelike_commutation(a, {{{0, 0}}}, {{{0, 0}}}), ValidationError);

  LocalKrausAssignment id_vs(lat);
  id_vs.set_site_family(0, families::identity(2));
  id_vs.set_site_family(2, families::random_family(2, 3, eng));
  CHECK(check_spacelike_commutation(id_vs, {{{0, 0}}}, {{{2, 0}}}) == 0.0);

  SUBCASE("violation fixture: overlapping two-site supports") {
    LocalKrausAssignment bad(lat);
    bad.set_cell_family({0, 0}, {{0, 1}, families::unitary<double>(cnot(), "cnot")});
    bad.set_cell_family({2, 0}, {{1, 2}, families::unitary<double>(cnot(), "cnot")});
    CHECK_FALSE(bad.admissible());
    const double norm = check_spacelike_commutation(bad, {{{0, 0}}}, {{{2, 0}}});
    const ComplexMatrix c01 = oracle::kron(cnot(), ComplexMatrix::Identity(2, 2));
    const ComplexMatrix c12 = oracle::kron(ComplexMatrix::Identity(2, 2), cnot());
    CHECK(norm == doctest::Approx((c01 * c12 - c12 * c01).norm()).epsilon(1e-15));
    CHECK(norm == doctest::Approx(std::sqrt(8.0)).epsilon(1e-15));
    CHECK(norm > 0.1);
  }
}

TEST_CASE("no-signaling") {
  const LatticeSpacetime lat(4);
  LocalKrausAssignment a(lat);
  for (Index x = 0; x < 4; ++x) a.set_site_family(x, families::dephasing(0.4));
  const CellRegion region{{{0, 0}}};
  const LocalObservable z2{{2}, 0, P::Z()};
  const LocalObservable x2{{2}, 0, P::X()};

  LocalKrausAssignment ids(lat);
  for (Index x = 0; x < 4; ++x) ids.set_site_family(x, families::identity(2));
  CHECK(check_no_signaling(ids, region, x2, plus_all(4)) == 0.0);

  CHECK(check_no_signaling(a, region, z2, plus_all(4)) <= 1e-14);
  CHECK(check_no_signaling(a, region, z2, ghz(4)) <= 1e-12);
  CHECK(check_no_signaling(a, region, x2, ghz(4)) <= 1e-12);

  // Observables in the causal shadow are rejected.
  CHECK_THROWS_AS(check_no_signaling(a, region, {{1}, 1, P::Z()}, ghz(4)), ValidationError);
  CHECK_THROWS_AS(check_no_signaling(a, region, {{2}, 2, P::Z()}, ghz(4)), ValidationError);

  // Local statistics do change inside the light cone: the check discriminates.
  const LocalObservable x0{{0}, 1, P::X()};
  const auto rho = DensityOperator::pure(plus_all(4));
  const auto after = ensemble_through(a, region, rho);
  const ComplexMatrix x_full = oracle::on_site(P::X(), 0, 4, 2);
  CHECK(std::abs(expectation(rho, x_full) - expectation(after, x_full)) > 0.1);
  (void)x0;

  rng::Engine eng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const StateVector psi(rng::haar_vector(16, eng));
    const ComplexMatrix g = rng::ginibre(4, 4, eng);
    const LocalObservable two{{2, 3}, 0, (g + g.adjoint()) / 2.0};
    LocalKrausAssignment r(lat);
    r.set_site_family(0, families::random_family(2, 3, eng));
    CHECK(check_no_signaling(r, region, two, psi) <= 1e-12);
  }
}
