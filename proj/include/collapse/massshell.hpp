#pragma once

// Lorentz-invariant measure on the mass shell E = sqrt(k^2 + m^2), natural units.
//
//   1 spatial dimension : omega([a,b]) = int_a^b dk / E(k) = asinh(b/m) - asinh(a/m)
//   3 spatial dimensions: omega(shell a<|k|<b) = 4 pi int_a^b k^2 dk / E(k)
//
// Each measure is evaluated by adaptive Gauss-Kronrod quadrature and by its
// closed-form antiderivative, so every check has two independent routes.

#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <vector>

#include "collapse/error.hpp"

namespace collapse::massshell {

template <typename Real>
struct BasicMassShellSlice {
  Real mass;
  int spatial_dim;  // 1 or 3
  Real k_lo;
  Real k_hi;        // 3D: radial bounds, 0 <= k_lo
};

using MassShellSlice = BasicMassShellSlice<double>;

template <typename Real>
struct BasicBoostParameter {
  Real rapidity;
};

using BoostParameter = BasicBoostParameter<double>;

/// Validated slice. A degenerate interval (k_lo == k_hi) is allowed and has measure 0.
template <typename Real>
BasicMassShellSlice<Real> make_slice(Real mass, int spatial_dim, Real k_lo, Real k_hi) {
  if (!(mass > Real(0)) || !std::isfinite(double(mass))) throw ValidationError("mass must be positive", "mass");
  if (spatial_dim != 1 && spatial_dim != 3) throw ValidationError("spatial_dim must be 1 or 3", "spatial_dim");
  if (!std::isfinite(double(k_lo)) || !std::isfinite(double(k_hi)))
    throw ValidationError("momentum bounds must be finite", "momentum_region");
  if (k_hi < k_lo) throw ValidationError("momentum region requires k_lo <= k_hi", "momentum_region");
  if (spatial_dim == 3 && k_lo < Real(0))
    throw ValidationError("radial momentum bounds must be non-negative", "momentum_region");
  return {mass, spatial_dim, k_lo, k_hi};
}

template <typename Real>
struct QuadratureResult {
  Real value;
  Real error_estimate;
  int intervals;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <typename Real, typename F>
std::pair<Real, Real> gk15(F&& f, Real a, Real b) {
  const Real centre = (a + b) / Real(2);
  const Real half = (b - a) / Real(2);
  const Real fc = f(centre);
  Real kronrod = fc * Real(kKronrodWeights[7]);
  Real gauss = fc * Real(kGaussWeights[3]);
  for (int i = 0; i < 7; ++i) {
    const Real dx = half * Real(kKronrodNodes[static_cast<std::size_t>(i)]);
    const Real sum = f(centre - dx) + f(centre + dx);
    kronrod += Real(kKronrodWeights[static_cast<std::size_t>(i)]) * sum;
    if (i % 2 == 1) gauss += Real(kGaussWeights[static_cast<std::size_t>(i / 2)]) * sum;
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature: the interval with the largest
/// error estimate is bisected until the summed estimate drops below
/// max(abs_tol, rel_tol * |value|).
template <typename Real, typename F>
QuadratureResult<Real> integrate(F&& f, Real a, Real b, Real rel_tol = Real(1e-13), Real abs_tol = Real(0),
                                 int max_intervals = 4000) {
  if (a == b) return {Real(0), Real(0), 0};
  struct Piece {
    Real a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  std::priority_queue<Piece> heap;
  auto [v0, e0] = detail::gk15<Real>(f, a, b);
  heap.push({a, b, v0, e0});
  Real value = v0;
  Real error = e0;
  int intervals = 1;
  while (error > std::max(abs_tol, rel_tol * std::abs(value)) && intervals < max_intervals) {
    const Piece p = heap.top();
    heap.pop();
    const Real mid = (p.a + p.b) / Real(2);
    auto [vl, el] = detail::gk15<Real>(f, p.a, mid);
    auto [vr, er] = detail::gk15<Real>(f, mid, p.b);
    heap.push({p.a, mid, vl, el});
    heap.push({mid, p.b, vr, er});
    ++intervals;
    // Re-sum from the pieces so cancellation in running updates does not accumulate.
    value = Real(0);
    error = Real(0);
    auto copy = heap;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
  }
  return {value, error, intervals};
}

template <typename Real>
Real energy(Real k, Real mass) {
  return std::sqrt(k * k + mass * mass);
}

/// Invariant measure of the slice, by adaptive quadrature.
template <typename Real>
Real invariant_measure(const BasicMassShellSlice<Real>& s, Real rel_tol = Real(1e-13)) {
  if (s.spatial_dim == 1)
    return integrate<Real>([m = s.mass](Real k) { return Real(1) / energy(k, m); }, s.k_lo, s.k_hi, rel_tol).value;
  return Real(4) * std::numbers::pi_v<Real> *
         integrate<Real>([m = s.mass](Real k) { return k * k / energy(k, m); }, s.k_lo, s.k_hi, rel_tol).value;
}

/// Invariant measure from the closed-form antiderivatives
///   1D: asinh(k/m),  3D: 2 pi (k E - m^2 asinh(k/m)).
template <typename Real>
Real closed_form_measure(const BasicMassShellSlice<Real>& s) {
  const Real m = s.mass;
  if (s.spatial_dim == 1) return std::asinh(s.k_hi / m) - std::asinh(s.k_lo / m);
  auto anti = [m](Real k) { return k * energy(k, m) - m * m * std::asinh(k / m); };
  return Real(2) * std::numbers::pi_v<Real> * (anti(s.k_hi) - anti(s.k_lo));
}

/// Lebesgue measure of the same momentum set (no 1/E weight). Not boost invariant.
template <typename Real>
Real naive_measure(const BasicMassShellSlice<Real>& s) {
  if (s.spatial_dim == 1) return s.k_hi - s.k_lo;
  return Real(4) / Real(3) * std::numbers::pi_v<Real> * (s.k_hi * s.k_hi * s.k_hi - s.k_lo * s.k_lo * s.k_lo);
}

/// Image of a momentum under a boost with the given rapidity (1D).
template <typename Real>
Real boost_momentum(Real k, Real mass, Real rapidity) {
  return k * std::cosh(rapidity) + energy(k, mass) * std::sinh(rapidity);
}

/// Boosted slice; 3D slices are rejected because boosts break radial symmetry.
template <typename Real>
BasicMassShellSlice<Real> boost_slice(const BasicMassShellSlice<Real>& s, BasicBoostParameter<Real> boost) {
  if (s.spatial_dim != 1) throw ValidationError("boosts are supported for 1D slices only", "spatial_dim");
  if (!std::isfinite(double(boost.rapidity))) throw ValidationError("rapidity must be finite", "rapidity");
  return {s.mass, 1, boost_momentum(s.k_lo, s.mass, boost.rapidity), boost_momentum(s.k_hi, s.mass, boost.rapidity)};
}

template <typename Real>
struct BasicScanPoint {
  Real cutoff;
  Real omega;        // quadrature
  Real closed_form;  // antiderivative
  Real relative_error;
  Real asymptote;    // 1D: 2 ln(2K/m); 3D: 2 pi K^2
};

using ScanPoint = BasicScanPoint<double>;

/// omega of [-K, K] (1D) or of the ball |k| < K (3D) for every cutoff K.
template <typename Real>
std::vector<BasicScanPoint<Real>> divergence_scan(Real mass, int spatial_dim, const std::vector<Real>& cutoffs) {
  std::vector<BasicScanPoint<Real>> out;
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    const Real k = cutoffs[i];
    if (!(k > Real(0))) throw ValidationError("cutoffs must be positive", "cutoffs");
    if (i > 0 && !(k > cutoffs[i - 1])) throw ValidationError("cutoffs must be strictly increasing", "cutoffs");
    const auto slice = spatial_dim == 1 ? make_slice(mass, 1, -k, k) : make_slice(mass, spatial_dim, Real(0), k);
    const Real q = invariant_measure(slice);
    const Real c = closed_form_measure(slice);
    const Real asym = spatial_dim == 1 ? Real(2) * std::log(Real(2) * k / mass)
                                       : Real(2) * std::numbers::pi_v<Real> * k * k;
    out.push_back({k, q, c, std::abs(q - c) / std::abs(c), asym});
  }
  return out;
}

/// Least-squares slope of omega against ln K (1D) or K^2 (3D); 2 and 2 pi asymptotically.
template <typename Real>
Real asymptotic_slope(const std::vector<BasicScanPoint<Real>>& scan, int spatial_dim) {
  if (scan.size() < 2) throw ValidationError("slope fit needs at least two cutoffs", "cutoffs");
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  const Real n = Real(scan.size());
  for (const auto& p : scan) {
    const Real x = spatial_dim == 1 ? std::log(p.cutoff) : p.cutoff * p.cutoff;
    sx += x;
    sy += p.omega;
    sxx += x * x;
    sxy += x * p.omega;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace collapse::massshell
