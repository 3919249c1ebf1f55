#include <doctest.h>

#include <cmath>

#include "hieki/forward.hpp"
#include "hieki/priors.hpp"
#include "manufactured.hpp"

using namespace hieki;

TEST_CASE("Darcy manufactured solution converges at second order") {
  for (bool flux : {false, true}) {
    const double e1 = manufactured::darcy_error(20, flux);
    const double e2 = manufactured::darcy_error(40, flux);
    CAPTURE(flux);
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("1D source solver converges at second order") {
  const double e1 = manufactured::source1d_error(100);
  const double e2 = manufactured::source1d_error(200);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("Darcy solver is exactly linear-preserving for constant kappa") {
  // p = 100 + 3 y solves -div(grad p) = 0 with the standard bottom value and
  // inflow 3 kappa at the top, no flow on the sides.
  DarcyProblem pr;
  pr.domain = build_domain(6.0, 6.0, 12, 12);
  pr.source = [](double, double) { return 0.0; };
  pr.bc[DarcyProblem::left] = BoundaryCondition::flux(0.0);
  pr.bc[DarcyProblem::right] = BoundaryCondition::flux(0.0);
  pr.bc[DarcyProblem::bottom] = BoundaryCondition::dirichlet(100.0);
  pr.bc[DarcyProblem::top] = BoundaryCondition::flux(3.0 * 2.5);
  const auto sol = DarcySolver(pr).solve(Field<double>::constant(pr.domain, 2.5));
  for (int j = 0; j <= 12; ++j)
    for (int i = 0; i <= 12; ++i) CHECK(sol.nodes(i, j) == doctest::Approx(100.0 + 3.0 * j * 0.5));
}

TEST_CASE("standard Darcy problem conserves mass for rough permeability") {
  const DarcyProblem pr = DarcyProblem::standard(30);
  const auto basis = dirichlet_spectrum<double>(pr.domain.normalized());
  Rng rng = make_stream(8, {});
  for (int k = 0; k < 3; ++k) {
    const Field<double> logk = sample_matern(MaternSpec<double>{1.6, 10.0, 1.0, 0.0}, basis, rng);
    const Field<double> kappa(pr.domain, logk.values.array().exp().matrix());
    const DarcySolution sol = DarcySolver(pr).solve(kappa);
    const double in = sol.source_total + sol.imposed_inflow;
    CHECK(sol.dirichlet_outflow == doctest::Approx(in).epsilon(1e-8));
    CHECK(sol.imposed_inflow == doctest::Approx(500.0 * 6.0));
    CHECK(sol.source_total == doctest::Approx(137.0 * 6.0 + 274.0 * 6.0));
  }
}

TEST_CASE("pressure drop scales with 1/c under kappa -> c kappa") {
  const DarcyProblem pr = DarcyProblem::standard(20);
  const auto basis = dirichlet_spectrum<double>(pr.domain.normalized());
  Rng rng = make_stream(12, {});
  const Field<double> logk = sample_matern(MaternSpec<double>{2.0, 8.0, 1.0, 0.0}, basis, rng);
  const Field<double> kappa(pr.domain, logk.values.array().exp().matrix());
  const DarcySolver solver(pr);
  const Vector<double> base = solver.solve(kappa).interior.values.array() - 100.0;
  for (double c : {0.5, 7.0}) {
    const Field<double> scaled(pr.domain, c * kappa.values);
    const Vector<double> p = solver.solve(scaled).interior.values.array() - 100.0;
    CHECK((p - base / c).norm() <= 1e-8 * base.norm());
  }
}

TEST_CASE("Darcy solver rejects non-positive permeability and all-flux data") {
  const DarcyProblem pr = DarcyProblem::standard(8);
  Field<double> k = Field<double>::constant(pr.domain, 1.0);
  k.values[5] = 0.0;
  CHECK_THROWS(DarcySolver(pr).solve(k));
  DarcyProblem all_flux = pr;
  all_flux.bc[DarcyProblem::bottom] = BoundaryCondition::flux(0.0);
  CHECK_THROWS(DarcySolver(all_flux));
}

TEST_CASE("observations are linear in the state") {
  const Domain d = build_domain(10.0, 200);
  ObservationModel m;
  m.functionals = point_functionals(d, equally_spaced_points(d, 50));
  Rng rng = make_stream(2, {});
  const auto basis = dirichlet_spectrum<double>(d);
  const Field<double> a(d, white_noise(basis, rng)), b(d, white_noise(basis, rng));
  const Field<double> comb(d, 2.0 * a.values - 3.0 * b.values);
  CHECK((observe(comb, m) - (2.0 * observe(a, m) - 3.0 * observe(b, m))).norm() < 1e-12);
}

TEST_CASE("point functionals interpolate linearly and are exact at nodes") {
  const Domain d = build_domain(10.0, 100);
  const auto f = Field<double>::from_function(d, [](double x) { return 3 * x - 1; });
  const SparseMatrix<double> o = point_functionals(d, {0.5, 2.25, 9.95});
  const Vector<double> v = o * f.values;
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(5.75));
  CHECK(v[2] == doctest::Approx(0.5 * (3 * 9.9 - 1)));  // boundary neighbour is 0
  CHECK_THROWS(point_functionals(d, {10.0}));
}

TEST_CASE("mollified functionals have unit mass and reproduce constants") {
  const Domain d = build_domain(6.0, 6.0, 40, 40);
  const SparseMatrix<double> o = mollified_functionals(d, lattice_centers(d, 8), 0.36);
  CHECK(o.rows() == 64);
  const Vector<double> ones = Vector<double>::Ones(d.size());
  CHECK(((o * ones).array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("source response matrix matches solve-then-observe") {
  const Domain d = build_domain(10.0, 300);
  const SourceSolver1D solver(d);
  const SparseMatrix<double> o = point_functionals(d, equally_spaced_points(d, 20));
  const Matrix<double> r = solver.response_matrix(o);
  const auto u = Field<double>::from_function(d, [](double x) { return std::cos(x) * x; });
  CHECK((r * u.values - o * solver.solve(u).values).norm() < 1e-10);
}
