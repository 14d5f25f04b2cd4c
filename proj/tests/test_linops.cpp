#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "collapse/linops.hpp"
#include "collapse/random.hpp"
#include "oracles.hpp"

using namespace collapse;
using P = Pauli<double>;

namespace {

DensityOperator random_density(Index dim, rng::Engine& eng) {
  const ComplexMatrix g = rng::ginibre(dim, dim, eng);
  ComplexMatrix m = g * g.adjoint();
  m /= m.trace().real();
  return DensityOperator(hermitian_part(m));
}

}  // namespace

TEST_CASE("state vector normalizes and rejects degenerate input") {
  ComplexVector v(3);
  v << 3.0, 4.0, 0.0;
  const StateVector psi(v);
  CHECK(std::abs(psi.amplitudes().norm() - 1.0) <= 1e-12);
  CHECK(std::abs(psi[0] - std::complex<double>(0.6)) <= 1e-15);
  CHECK_THROWS_AS(StateVector(ComplexVector::Zero(2)), ValidationError);
  ComplexVector bad(2);
  bad << std::nan(""), 1.0;
  CHECK_THROWS_AS(StateVector{bad}, ValidationError);
  CHECK_THROWS_AS(StateVector::basis(2, 2), ValidationError);
}

TEST_CASE("density operator invariants are enforced") {
  ComplexMatrix bad_trace = ComplexMatrix::Identity(2, 2);
  CHECK_THROWS_AS(DensityOperator{bad_trace}, ValidationError);
  ComplexMatrix not_herm(2, 2);
  not_herm << 0.5, 0.1, 0.0, 0.5;
  CHECK_THROWS_AS(DensityOperator{not_herm}, ValidationError);
  ComplexMatrix negative(2, 2);
  negative << 1.5, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(DensityOperator{negative}, ValidationError);
  ComplexMatrix nonfinite = ComplexMatrix::Identity(2, 2) / 2.0;
  nonfinite(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(DensityOperator{nonfinite}, ValidationError);
  CHECK_NOTHROW(DensityOperator(ComplexMatrix::Identity(4, 4) / 4.0));
}

TEST_CASE("tensor product") {
  CHECK(tensor_product(P::I(), P::I()) == ComplexMatrix::Identity(4, 4));
  ComplexMatrix zi = ComplexMatrix::Zero(4, 4);
  zi.diagonal() << 1, 1, -1, -1;
  CHECK(tensor_product(P::Z(), P::I()) == zi);
  CHECK(tensor_product(P::X(), P::Z()) == oracle::kron(P::X(), P::Z()));

  rng::Engine eng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix a = rng::ginibre(2 + trial % 3, 1 + trial % 2, eng);
    const ComplexMatrix b = rng::ginibre(1 + trial % 4, 3, eng);
    const ComplexMatrix c = rng::ginibre(2, 2, eng);
    CHECK(tensor_product(a, b) == oracle::kron(a, b));
    const ComplexMatrix left = tensor_product(tensor_product(a, b), c);
    CHECK((left - tensor_product(a, tensor_product(b, c))).norm() <= 1e-15 * left.norm());
  }
  // Exact associativity when every entry product is exact (Gaussian integers).
  auto gaussian_int = [&](Index r, Index c) {
    ComplexMatrix m(r, c);
    for (Index i = 0; i < m.size(); ++i)
      m.data()[i] = {double(int(eng() % 7) - 3), double(int(eng() % 7) - 3)};
    return m;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix a = gaussian_int(2, 3), b = gaussian_int(3, 2), c = gaussian_int(2, 2);
    CHECK(tensor_product(tensor_product(a, b), c) == tensor_product(a, tensor_product(b, c)));
  }
  CHECK_THROWS_AS(tensor_product(ComplexMatrix::Identity(64, 64), ComplexMatrix::Identity(128, 128)), ValidationError);
}

TEST_CASE("embedding matches explicit Kronecker chains") {
  rng::Engine eng(11);
  const ComplexMatrix a = rng::ginibre(2, 2, eng);
  const std::vector<Index> dims = {2, 2, 2};
  for (Index s = 0; s < 3; ++s) {
    const Index site[] = {s};
    CHECK((embed_operator(a, site, dims) - oracle::on_site(a, int(s), 3, 2)).norm() == 0.0);
  }
  // Two-site operator on non-adjacent sites (0, 2): a (x) b acting there.
  const ComplexMatrix b = rng::ginibre(2, 2, eng);
  const Index sites[] = {0, 2};
  const ComplexMatrix expected = oracle::kron_all({a, ComplexMatrix::Identity(2, 2), b});
  CHECK((embed_operator(oracle::kron(a, b), sites, dims) - expected).norm() <= 1e-14);

  const ComplexVector psi = rng::haar_vector(8, eng);
  CHECK((apply_on_sites(oracle::kron(a, b), sites, dims, psi) - expected * psi).norm() <= 1e-13);
}

TEST_CASE("partial trace") {
  rng::Engine eng(3);
  SUBCASE("product state") {
    const DensityOperator ra = random_density(2, eng);
    const DensityOperator rb = random_density(3, eng);
    const DensityOperator rho(tensor_product(ra.matrix(), rb.matrix()));
    CHECK((partial_trace(rho, {2, 3}, {1}).matrix() - ra.matrix()).norm() <= 1e-14);
    CHECK((partial_trace(rho, {2, 3}, {0}).matrix() - rb.matrix()).norm() <= 1e-14);
  }
  SUBCASE("Bell state gives the maximally mixed qubit") {
    const auto rho = DensityOperator::pure(StateVector(oracle::bell()));
    for (Index t : {0, 1})
      CHECK((partial_trace(rho, {2, 2}, {t}).matrix() - ComplexMatrix::Identity(2, 2) / 2.0).norm() <= 1e-15);
  }
  SUBCASE("random two-qubit states against the summation oracle") {
    for (int trial = 0; trial < 10; ++trial) {
      const DensityOperator rho = random_density(4, eng);
      CHECK((partial_trace(rho, {2, 2}, {1}).matrix() - oracle::trace_out_second(rho.matrix(), 2, 2)).norm() <= 1e-14);
      CHECK((partial_trace(rho, {2, 2}, {0}).matrix() - oracle::trace_out_first(rho.matrix(), 2, 2)).norm() <= 1e-14);
    }
  }
  SUBCASE("trace is preserved and the middle factor of three can be removed") {
    const DensityOperator rho = random_density(12, eng);
    const auto red = partial_trace(rho, {2, 3, 2}, {1});
    CHECK(std::abs(red.matrix().trace().real() - 1.0) <= 1e-12);
    ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c)
        for (int a2 = 0; a2 < 2; ++a2)
          for (int c2 = 0; c2 < 2; ++c2)
            for (int b = 0; b < 3; ++b) expected(a * 2 + c, a2 * 2 + c2) += rho.matrix()(a * 6 + b * 2 + c, a2 * 6 + b * 2 + c2);
    CHECK((red.matrix() - expected).norm() <= 1e-14);
  }
  SUBCASE("mismatched dimensions are rejected") {
    const DensityOperator rho = random_density(4, eng);
    CHECK_THROWS_AS(partial_trace(rho, {2, 3}, {1}), ValidationError);
    CHECK_THROWS_AS(partial_trace(rho, {2, 2}, {2}), ValidationError);
  }
}

TEST_CASE("purity") {
  rng::Engine eng(5);
  const StateVector psi(rng::haar_vector(3, eng));
  CHECK(purity(DensityOperator::pure(psi)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(purity(DensityOperator::maximally_mixed(5)) == doctest::Approx(0.2).epsilon(1e-14));
  // Equal mixture of two orthogonal pure states on C^4.
  ComplexVector w(4), w2(4);
  w << 1, 1, 0, 0;
  w2 << 0, 0, 1, -1;
  const StateVector o1(w), o2(w2);
  const ComplexMatrix mix = 0.5 * (o1.amplitudes() * o1.amplitudes().adjoint() + o2.amplitudes() * o2.amplitudes().adjoint());
  CHECK(purity(DensityOperator(mix)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(oracle::purity(mix) == doctest::Approx(0.5).epsilon(1e-14));
  for (int trial = 0; trial < 10; ++trial) {
    const DensityOperator rho = random_density(4, eng);
    CHECK(std::abs(purity(rho) - oracle::purity(rho.matrix())) <= 1e-14);
  }
}

TEST_CASE("trace distance") {
  rng::Engine eng(9);
  const DensityOperator rho = random_density(3, eng);
  CHECK(trace_distance(rho, rho) == 0.0);
  const auto p0 = DensityOperator::pure(StateVector::basis(2, 0));
  const auto p1 = DensityOperator::pure(StateVector::basis(2, 1));
  CHECK(trace_distance(p0, p1) == doctest::Approx(1.0).epsilon(1e-14));
  ComplexMatrix a = ComplexMatrix::Zero(2, 2), b = ComplexMatrix::Zero(2, 2);
  a.diagonal() << 0.7, 0.3;
  b.diagonal() << 0.5, 0.5;
  CHECK(trace_distance(DensityOperator(a), DensityOperator(b)) == doctest::Approx(0.2).epsilon(1e-14));
  for (int trial = 0; trial < 10; ++trial) {
    const DensityOperator x = random_density(4, eng), y = random_density(4, eng);
    CHECK(std::abs(trace_distance(x, y) - oracle::trace_distance(x.matrix(), y.matrix())) <= 1e-13);
  }
  CHECK_THROWS_AS(trace_distance(p0, DensityOperator::maximally_mixed(3)), ValidationError);
}

TEST_CASE("commutator norm") {
  rng::Engine eng(13);
  const ComplexMatrix a = rng::ginibre(4, 4, eng);
  CHECK(commutator_norm(a, ComplexMatrix::Identity(4, 4)) == 0.0);
  CHECK(commutator_norm(tensor_product(P::X(), P::I()), tensor_product(P::I(), P::Z())) == 0.0);
  // XZ - ZX = -2iY, whose Frobenius norm is 2 sqrt(2).
  CHECK(commutator_norm(P::X(), P::Z()) == doctest::Approx(2.0 * std::numbers::sqrt2).epsilon(1e-15));
  CHECK(((P::X() * P::Z() - P::Z() * P::X()) - std::complex<double>(0, -2) * P::Y()).norm() == 0.0);
  CHECK_THROWS_AS(commutator_norm(P::X(), ComplexMatrix::Identity(3, 3)), ValidationError);
}

TEST_CASE("expectation") {
  const auto plus = DensityOperator::pure(StateVector(ComplexVector::Ones(2)));
  CHECK(expectation(plus, P::X()) == doctest::Approx(1.0));
  CHECK(std::abs(expectation(plus, P::Z())) <= 1e-15);
}
