#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/gibbs.hpp"
#include "bowendim/model.hpp"
#include "bowendim/potentials.hpp"
#include "bowendim/pressure.hpp"

namespace bowendim {

struct RootResult {
  double root = 0.0;
  double bracket_lo = 0.0, bracket_hi = 0.0;  // final bisection bracket
  double residual = 0.0;                      // pressure at the root, per base step
  std::uint32_t iterations = 0;
  bool clamped_upper = false;   // pressure still positive at the top of the range
  bool boundary_zero = false;   // top of the range is an exact pressure zero
  std::size_t level = 1;        // N
  FamilyKind kind = FamilyKind::UnstableNorm;
  std::vector<std::pair<double, double>> trace;  // (parameter, pressure) history
};

namespace detail {

constexpr std::uint32_t kBisectMaxIter = 200;

// Bisection on a continuous strictly decreasing pressure-in-parameter map over
// [0, top]. first_probe picks the initial subdivision point; re-solving with a
// different subdivision must land on the same root.
inline RootResult bisect_root(const std::function<double(double)>& pressure, double top,
                              double tol, double first_probe) {
  RootResult r;
  r.bracket_lo = 0.0;
  r.bracket_hi = top;
  const double p0 = pressure(0.0);
  r.trace.emplace_back(0.0, p0);
  if (p0 < -tol)
    throw std::invalid_argument(
        "bowen root: pressure negative at parameter 0; the system carries no entropy");
  const double ptop = pressure(top);
  r.trace.emplace_back(top, ptop);
  if (ptop > tol) {
    // no zero inside the range: report the clamp as a first-class outcome
    r.root = top;
    r.residual = ptop;
    r.clamped_upper = true;
    return r;
  }
  if (std::abs(ptop) <= tol) {
    r.root = top;
    r.residual = ptop;
    r.boundary_zero = true;
    return r;
  }
  double lo = 0.0, hi = top;
  double plo = p0;
  for (std::uint32_t it = 0; it < kBisectMaxIter && hi - lo > tol; ++it) {
    const double frac = it == 0 ? first_probe : 0.5;
    const double mid = lo + frac * (hi - lo);
    const double pm = pressure(mid);
    r.trace.emplace_back(mid, pm);
    ++r.iterations;
    if (pm >= 0.0) {
      lo = mid;
      plo = pm;
    } else {
      hi = mid;
    }
  }
  (void)plo;
  r.bracket_lo = lo;
  r.bracket_hi = hi;
  r.root = 0.5 * (lo + hi);
  r.residual = pressure(r.root);
  r.trace.emplace_back(r.root, r.residual);
  return r;
}

}  // namespace detail

// Root of (1/N) P(f^N, -psi^s(.,f^N)) = 0 (norm kind) or the conorm analogue,
// bisected over s in [0, u]. The map is continuous and strictly decreasing, so
// the root is unique; when the pressure is still positive at s = u the result
// is clamped there and flagged.
inline RootResult bowen_root_unstable(const HorseshoeModel& model, std::size_t level,
                                      FamilyKind kind, double tol = 1e-10,
                                      const Caps& caps = {}, double first_probe = 0.5) {
  if (kind == FamilyKind::Stable)
    throw std::invalid_argument("bowen_root_unstable: use bowen_root_stable for phi");
  LevelPressure lp(model, level, caps);
  auto pressure = [&](double s) {
    return lp.value(FamilySpec{kind, s, true});
  };
  RootResult r = detail::bisect_root(pressure, static_cast<double>(model.unstable_dim()),
                                     tol, first_probe);
  r.level = level;
  r.kind = kind;
  return r;
}

// Root of (1/N) P(f^N, phi^{t'}(.,f^N)) = 0 over t' in [0,1]; the stable logs
// are negative so the map decreases. The family is additive, making the root
// independent of the level.
inline RootResult bowen_root_stable(const HorseshoeModel& model, std::size_t level,
                                    double tol = 1e-10, const Caps& caps = {},
                                    double first_probe = 0.5) {
  LevelPressure lp(model, level, caps);
  auto pressure = [&](double t) {
    return lp.value(FamilySpec{FamilyKind::Stable, t, false});
  };
  RootResult r = detail::bisect_root(pressure, 1.0, tol, first_probe);
  r.level = level;
  r.kind = FamilyKind::Stable;
  return r;
}

// Roots along the doubling levels N = 2^0 .. 2^K. For the norm kind the
// sequence is nondecreasing and its last entry estimates the root of the
// variationally defined pressure of the super-additive family; diagonal
// models give a constant sequence.
inline std::vector<RootResult> root_sequence(const HorseshoeModel& model, FamilyKind kind,
                                             std::size_t max_level_k, double tol = 1e-10,
                                             const Caps& caps = {}) {
  std::vector<RootResult> out;
  for (std::size_t k = 0; k <= max_level_k; ++k) {
    const std::size_t level = static_cast<std::size_t>(1) << k;
    if (kind == FamilyKind::Stable)
      out.push_back(bowen_root_stable(model, level, tol, caps));
    else
      out.push_back(bowen_root_unstable(model, level, kind, tol, caps));
  }
  return out;
}

// At the stable root t', the equilibrium state nu of phi^{t'} attains the
// variational principle, so t' = h_nu / (-stable exponent of nu). Returns the
// residual of that identity.
inline double stable_root_identity_residual(const HorseshoeModel& model, std::size_t level,
                                            double tol = 1e-10, const Caps& caps = {}) {
  const RootResult root = bowen_root_stable(model, level, tol, caps);
  const auto pot = as_locally_constant(
      model, FamilySpec{FamilyKind::Stable, root.root, false}, 1, caps);
  const MarkovMeasure nu = equilibrium_measure(model.shift(), pot, caps);
  const auto lyap = lyapunov_exponents(model, nu, 1, caps);
  const double h = entropy(nu);
  if (h == 0.0 && root.root == 0.0) return 0.0;
  return std::abs(root.root - h / (-lyap.stable_exponent));
}

}  // namespace bowendim
