#pragma once

// Manufactured solutions shared by the unit and acceptance tests.

#include <cmath>
#include <numbers>

#include "hieki/forward.hpp"

namespace manufactured {

using hieki::BoundaryCondition;
using hieki::DarcyProblem;

constexpr double kPi = std::numbers::pi;

// Interior kappa is copied to the boundary rows by the solver. kappa - 1
// vanishes to fourth order at every side, so that copy costs O(h^4) and the
// observed order is not polluted by a boundary-layer h^3 term.
inline double s6(double x) { return std::sin(kPi * x / 6); }
inline double c6(double x) { return std::cos(kPi * x / 6); }
inline double kappa(double x, double y) { return 1.0 + 2.0 * std::pow(s6(x) * s6(y), 4); }
inline double kappa_x(double x, double y) {
  return 8.0 * kPi / 6 * std::pow(s6(x), 3) * c6(x) * std::pow(s6(y), 4);
}
inline double kappa_y(double x, double y) { return kappa_x(y, x); }

inline double pressure(double x, double y) {
  return 100.0 + std::cos(kPi * x / 6) * std::sin(kPi * y / 12) + x * y / 6;
}
inline double p_x(double x, double y) { return -kPi / 6 * std::sin(kPi * x / 6) * std::sin(kPi * y / 12) + y / 6; }
inline double p_y(double x, double y) { return kPi / 12 * std::cos(kPi * x / 6) * std::cos(kPi * y / 12) + x / 6; }
inline double laplacian_p(double x, double y) {
  return -(kPi * kPi / 36 + kPi * kPi / 144) * std::cos(kPi * x / 6) * std::sin(kPi * y / 12);
}

inline double source(double x, double y) {
  return -(kappa_x(x, y) * p_x(x, y) + kappa_y(x, y) * p_y(x, y) + kappa(x, y) * laplacian_p(x, y));
}

/// Dirichlet data on top and bottom; with `flux_sides` the left and right
/// sides carry the exact inward flux kappa dp/dn instead.
inline DarcyProblem darcy_problem(int n, bool flux_sides) {
  DarcyProblem pr;
  pr.domain = hieki::build_domain(6.0, 6.0, n, n);
  pr.source = source;
  auto exact = [](double x, double y) { return pressure(x, y); };
  for (auto& bc : pr.bc) bc = BoundaryCondition::dirichlet(exact);
  if (flux_sides) {
    pr.bc[DarcyProblem::left] = {BoundaryCondition::Kind::flux,
                                 [](double x, double y) { return -kappa(x, y) * p_x(x, y); }};
    pr.bc[DarcyProblem::right] = {BoundaryCondition::Kind::flux,
                                  [](double x, double y) { return kappa(x, y) * p_x(x, y); }};
  }
  return pr;
}

/// Max-norm nodal error of the Darcy solver on an n x n grid.
inline double darcy_error(int n, bool flux_sides) {
  const DarcyProblem pr = darcy_problem(n, flux_sides);
  const auto k = hieki::Field<double>::from_function(pr.domain, [](double x, double y) { return kappa(x, y); });
  const hieki::DarcySolution sol = hieki::DarcySolver(pr).solve(k);
  const double h = pr.domain.spacing(0);
  double worst = 0.0;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      worst = std::max(worst, std::abs(sol.nodes(i, j) - pressure(i * h, j * h)));
  return worst;
}

// p'' + p = u on [0, 10] with p = x (10 - x) sin(pi x / 5) / 25.
inline double p1d(double x) { return x * (10 - x) * std::sin(kPi * x / 5) / 25; }
inline double u1d(double x) {
  const double s = std::sin(kPi * x / 5), c = std::cos(kPi * x / 5), w = kPi / 5;
  const double g = x * (10 - x), gp = 10 - 2 * x, gpp = -2;
  return (gpp * s + 2 * gp * w * c - g * w * w * s) / 25 + p1d(x);
}

inline double source1d_error(int n) {
  const hieki::Domain d = hieki::build_domain(10.0, n);
  const auto u = hieki::Field<double>::from_function(d, u1d);
  const hieki::Field<double> p = hieki::solve_source_1d(u);
  double worst = 0.0;
  for (int i = 0; i < d.size(); ++i) worst = std::max(worst, std::abs(p.values[i] - p1d(d.coordinate(0, i))));
  return worst;
}

}  // namespace manufactured
