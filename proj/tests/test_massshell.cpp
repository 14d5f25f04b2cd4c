#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "collapse/massshell.hpp"
#include "oracles.hpp"

using namespace collapse;
using namespace collapse::massshell;

TEST_CASE("slice validation") {
  CHECK_THROWS_AS(make_slice(-1.0, 1, 0.0, 1.0), ValidationError);
  try {
    make_slice(0.0, 1, 0.0, 1.0);
    FAIL("zero mass accepted");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "mass");
  }
  CHECK_THROWS_AS(make_slice(1.0, 2, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(make_slice(1.0, 1, 2.0, 1.0), ValidationError);
  CHECK_THROWS_AS(make_slice(1.0, 3, -1.0, 1.0), ValidationError);
}

TEST_CASE("invariant measure in one dimension") {
  const auto s = make_slice(1.0, 1, -1.0, 1.0);
  CHECK(invariant_measure(s) == doctest::Approx(2.0 * std::asinh(1.0)).epsilon(1e-12));
  CHECK(invariant_measure(s) == doctest::Approx(1.762747).epsilon(1e-6));
  CHECK(invariant_measure(make_slice(1.0, 1, 0.3, 0.3)) == 0.0);

  // The exact image of [-1, 1] under a rapidity-1 boost.
  const auto b = boost_slice(s, BoostParameter{1.0});
  CHECK(b.k_lo == doctest::Approx(0.118905).epsilon(1e-5));
  CHECK(b.k_hi == doctest::Approx(3.205066).epsilon(1e-6));
  CHECK(std::abs(invariant_measure(b) - 1.762747) <= 1e-6);

  for (double m : {0.5, 1.0, 3.0})
    for (auto [a, c] : {std::pair{-2.0, 5.0}, {0.0, 0.1}, {-40.0, -1.0}}) {
      const auto sl = make_slice(m, 1, a, c);
      const double q = invariant_measure(sl);
      CHECK(std::abs(q - closed_form_measure(sl)) <= 1e-9 * std::abs(q));
      const double simpson = oracle::simpson([m](double k) { return 1.0 / std::sqrt(k * k + m * m); }, a, c);
      CHECK(std::abs(q - simpson) <= 1e-9 * std::abs(q));
    }
}

TEST_CASE("invariant measure in three dimensions") {
  for (auto [a, c] : {std::pair{0.0, 1.0}, {0.5, 7.0}, {2.0, 30.0}}) {
    const auto sl = make_slice(1.3, 3, a, c);
    const double q = invariant_measure(sl);
    CHECK(std::abs(q - closed_form_measure(sl)) <= 1e-9 * q);
    const double simpson =
        4.0 * std::numbers::pi * oracle::simpson([](double k) { return k * k / std::sqrt(k * k + 1.69); }, a, c);
    CHECK(std::abs(q - simpson) <= 1e-9 * q);
  }
  CHECK_THROWS_AS(boost_slice(make_slice(1.0, 3, 0.0, 1.0), BoostParameter{0.5}), ValidationError);
}

TEST_CASE("boosts") {
  const auto s = make_slice(1.0, 1, -0.7, 2.5);
  const auto same = boost_slice(s, BoostParameter{0.0});
  CHECK(same.k_lo == s.k_lo);
  CHECK(same.k_hi == s.k_hi);
  CHECK(boost_momentum(1.0, 1.0, 1.0) == doctest::Approx(std::cosh(1.0) + std::sqrt(2.0) * std::sinh(1.0)).epsilon(1e-15));
  for (double eta : {0.3, 1.0, 2.5}) {
    const auto back = boost_slice(boost_slice(s, BoostParameter{eta}), BoostParameter{-eta});
    CHECK(std::abs(back.k_lo - s.k_lo) <= 1e-12);
    CHECK(std::abs(back.k_hi - s.k_hi) <= 1e-12);
  }
  for (int i = 0; i <= 12; ++i) {
    const double eta = -3.0 + 0.5 * i;
    for (auto [a, c] : {std::pair{-10.0, 10.0}, {-1.0, 1.0}, {2.0, 9.5}, {-10.0, -9.0}}) {
      const auto sl = make_slice(1.0, 1, a, c);
      const double w0 = invariant_measure(sl);
      const double w1 = invariant_measure(boost_slice(sl, BoostParameter{eta}));
      CHECK(std::abs(w1 - w0) / w0 <= 1e-6);
    }
  }
  // The Lebesgue measure is not invariant.
  const auto unit = make_slice(1.0, 1, -1.0, 1.0);
  const double n0 = naive_measure(unit);
  const double n1 = naive_measure(boost_slice(unit, BoostParameter{1.0}));
  CHECK(std::abs(n1 - n0) / n0 > 0.01);
}

TEST_CASE("additivity") {
  for (auto [a, b, c] : {std::tuple{-3.0, 0.2, 4.0}, {0.0, 1.0, 100.0}}) {
    const double whole = invariant_measure(make_slice(1.0, 1, a, c));
    const double parts = invariant_measure(make_slice(1.0, 1, a, b)) + invariant_measure(make_slice(1.0, 1, b, c));
    CHECK(std::abs(whole - parts) <= 1e-10);
  }
}

TEST_CASE("divergence scan") {
  const auto scan = divergence_scan(1.0, 1, std::vector<double>{10.0, 100.0, 1000.0});
  REQUIRE(scan.size() == 3);
  const double expected[] = {5.99645, 10.59668, 15.20181};
  for (int i = 0; i < 3; ++i) {
    CHECK(scan[i].omega == doctest::Approx(expected[i]).epsilon(1e-6));
    CHECK(scan[i].omega == doctest::Approx(2.0 * std::asinh(scan[i].cutoff)).epsilon(1e-12));
    CHECK(scan[i].relative_error <= 1e-9);
  }
  for (int i = 1; i < 3; ++i) {
    const double diff = scan[i].omega - scan[i - 1].omega;
    CHECK(std::abs(diff - 2.0 * std::log(10.0)) <= 0.01 * 2.0 * std::log(10.0));
  }
  CHECK(asymptotic_slope(scan, 1) == doctest::Approx(2.0).epsilon(1e-3));

  const auto one = divergence_scan(1.0, 1, std::vector<double>{5.0});
  CHECK(one.size() == 1);
  CHECK_THROWS_AS(asymptotic_slope(one, 1), ValidationError);
  CHECK_THROWS_AS(divergence_scan(1.0, 1, std::vector<double>{10.0, 5.0}), ValidationError);

  const auto s3 = divergence_scan(1.0, 3, std::vector<double>{100.0, 200.0});
  CHECK(std::abs(s3[1].omega / s3[0].omega - 4.0) <= 0.02 * 4.0);
  CHECK(s3[0].relative_error <= 1e-9);

  // Unbounded: every fixed bound is exceeded within the scan range.
  const auto wide = divergence_scan(1.0, 1, std::vector<double>{1e1, 1e3, 1e5, 1e7});
  for (std::size_t i = 1; i < wide.size(); ++i) CHECK(wide[i].omega > wide[i - 1].omega);
  CHECK(wide.back().omega > 30.0);
}
