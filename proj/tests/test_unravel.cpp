#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "collapse/families.hpp"
#include "collapse/random.hpp"
#include "collapse/unravel.hpp"
#include "oracles.hpp"

using namespace collapse;
using namespace collapse::unravel;
using P = Pauli<double>;

namespace {

StateVector plus() { return StateVector(ComplexVector::Ones(2)); }
StateVector minus() {
  ComplexVector v(2);
  v << 1.0, -1.0;
  return StateVector(v);
}

bool same_ray(const StateVector& a, const StateVector& b, double tol = 1e-12) {
  return std::abs(std::abs(a.amplitudes().dot(b.amplitudes())) - 1.0) <= tol;
}

}  // namespace

TEST_CASE("select_branch inversion sampling") {
  const std::vector<double> p = {0.25, 0.5, 0.25};
  CHECK(select_branch(p, 0.0) == 0);
  CHECK(select_branch(p, 0.25) == 0);  // boundary goes to the lower index
  CHECK(select_branch(p, 0.2500001) == 1);
  CHECK(select_branch(p, 0.75) == 1);
  CHECK(select_branch(p, 0.99) == 2);
  // Branches below epsilon are never chosen.
  CHECK(select_branch({1e-16, 1.0 - 1e-16}, 0.0) == 1);
  CHECK(select_branch({0.5, 0.5 - 1e-12, 1e-12}, 0.9999999999999999, 1e-10) == 1);
  CHECK_THROWS_AS(select_branch({0.5, 0.4}, 0.1), InconsistencyError);
}

TEST_CASE("sample_branch") {
  const auto id = sample_branch(families::identity(2), plus(), 0.7);
  CHECK(id.branch_index == 0);
  CHECK(id.probability == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(id.post_state == plus());

  const auto f = families::dephasing(0.25);
  const auto b0 = sample_branch(f, plus(), 0.5);
  CHECK(b0.branch_index == 0);
  CHECK(b0.probability == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(same_ray(b0.post_state, plus()));
  const auto b1 = sample_branch(f, plus(), 0.9);
  CHECK(b1.branch_index == 1);
  CHECK(b1.probability == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(same_ray(b1.post_state, minus()));

  // {(1/2, I (x) I), (1/2, I (x) Z)} on the Bell state: Phi+ or Phi-.
  const KrausFamily g(4, {{0.5, tensor_product(P::I(), P::I())}, {0.5, tensor_product(P::I(), P::Z())}});
  const StateVector bell(oracle::bell());
  ComplexVector phi_minus = oracle::bell();
  phi_minus(3) = -phi_minus(3);
  const auto g0 = sample_branch(g, bell, 0.3);
  const auto g1 = sample_branch(g, bell, 0.7);
  CHECK(g0.probability == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(g1.probability == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(same_ray(g0.post_state, bell));
  CHECK(same_ray(g1.post_state, StateVector(phi_minus)));
}

TEST_CASE("run_trajectory") {
  const auto empty = run_trajectory(families::dephasing(0.3), plus(), 0, 42);
  CHECK(empty.steps.empty());
  CHECK(empty.final_state() == plus());

  const auto still = run_trajectory(families::identity(2), plus(), 10, 9);
  CHECK(still.steps.size() == 10);
  for (auto b : still.branch_indices()) CHECK(b == 0);
  CHECK((still.final_state().amplitudes() - plus().amplitudes()).norm() <= 1e-15);

  // Binomial oracle: frequency of branch 1 within 3 sigma, sigma = 0.005.
  const auto long_run = run_trajectory(families::dephasing(0.5), plus(), 10000, 2024);
  const auto idx = long_run.branch_indices();
  const double freq = double(std::accumulate(idx.begin(), idx.end(), std::size_t{0})) / 10000.0;
  CHECK(std::abs(freq - 0.5) <= 3 * 0.005);

  SUBCASE("same seed reproduces the record and is prefix-consistent") {
    const auto f = families::depolarizing(0.4);
    rng::Engine eng(3);
    const StateVector psi(rng::haar_vector(2, eng));
    const auto a = run_trajectory(f, psi, 30, 77);
    const auto b = run_trajectory(f, psi, 30, 77);
    const auto c = run_trajectory(f, psi, 50, 77);
    CHECK(a.branch_indices() == b.branch_indices());
    CHECK(a.final_state() == b.final_state());
    for (std::size_t k = 0; k < 30; ++k) {
      CHECK(a.steps[k].branch_index == c.steps[k].branch_index);
      CHECK(a.steps[k].post_state == c.steps[k].post_state);
    }
  }
}

TEST_CASE("trajectories do not depend on thread count") {
  const auto f = families::random_family(3, 3, *std::make_unique<rng::Engine>(5));
  const StateVector psi = StateVector::basis(3, 1);
  const auto one = run_trajectories(f, psi, 5, {11, 200, kZeroBranchEpsilon, 1});
  const auto four = run_trajectories(f, psi, 5, {11, 200, kZeroBranchEpsilon, 4});
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].seed == rng::stream_seed(11, i));
    CHECK(one[i].branch_indices() == four[i].branch_indices());
    CHECK(one[i].final_state() == four[i].final_state());
  }
  const auto e1 = estimate_ensemble(f, psi, 5, {11, 5000, kZeroBranchEpsilon, 1});
  const auto e3 = estimate_ensemble(f, psi, 5, {11, 5000, kZeroBranchEpsilon, 3});
  CHECK(e1.matrix() == e3.matrix());
}

TEST_CASE("estimate_ensemble") {
  rng::Engine eng(17);
  const StateVector psi(rng::haar_vector(2, eng));
  const auto id = estimate_ensemble(families::identity(2), psi, 4, {1, 123, kZeroBranchEpsilon, 1});
  CHECK((id.matrix() - psi.amplitudes() * psi.amplitudes().adjoint()).norm() <= 1e-14);

  const auto est = estimate_ensemble(families::dephasing(0.5), plus(), 1, {7, 10000, kZeroBranchEpsilon, 1});
  CHECK(trace_distance(est, DensityOperator::maximally_mixed(2)) <= 0.05);

  const ComplexMatrix u = rng::haar_unitary(2, eng);
  const KrausFamily phase(2, {{0.5, u}, {0.5, std::polar(1.0, 1.1) * u}});
  for (std::size_t n : {1, 10, 1000})
    CHECK(purity(estimate_ensemble(phase, psi, 3, {5, n, kZeroBranchEpsilon, 1})) ==
          doctest::Approx(1.0).epsilon(1e-12));

  const auto single = estimate_ensemble(families::unitary<double>(u), psi, 6, {5, 300, kZeroBranchEpsilon, 1});
  CHECK(std::abs(purity(single) - 1.0) <= 1e-14);
}

TEST_CASE("ensemble_consistency") {
  CHECK(ensemble_consistency(families::identity(2), plus(), 3, {1, 100, kZeroBranchEpsilon, 1}) <= 1e-15);
  CHECK(ensemble_consistency(families::dephasing(0.3), plus(), 1, {2, 10000, kZeroBranchEpsilon, 1}) <= 0.05);
  CHECK(ensemble_consistency(families::dephasing(0.3), plus(), 1, {2, 1000000, kZeroBranchEpsilon, 1}) <= 0.005);

  // Exact ensemble agrees with the explicit channel oracle.
  const auto f = families::amplitude_damping(0.2);
  ComplexMatrix rho = plus().amplitudes() * plus().amplitudes().adjoint();
  std::vector<oracle::Branch> ob;
  for (const auto& b : f.branches()) ob.push_back({b.weight, b.op});
  for (int k = 0; k < 4; ++k) rho = oracle::channel(ob, rho);
  CHECK((exact_ensemble(f, plus(), 4).matrix() - rho).norm() <= 1e-15);
}

TEST_CASE("probability normalization over random families and states") {
  rng::Engine eng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 2 + trial % 6;
    const KrausFamily f = families::random_family(d, 1 + trial % 5, eng);
    const StateVector psi(rng::haar_vector(d, eng));
    double total = 0.0;
    for (const auto& b : f.branches()) total += b.weight * (b.op * psi.amplitudes()).squaredNorm();
    CHECK(std::abs(total - 1.0) <= 1e-10);
    const auto out = sample_branch(f, psi, rng::uniform01(eng));
    CHECK(std::abs(out.post_state.amplitudes().norm() - 1.0) <= 1e-12);
  }
}
