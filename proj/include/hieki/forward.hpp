#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hieki/grid.hpp"

namespace hieki {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Darcy flow: -div(kappa grad p) = f on a rectangle, mixed boundary data.
// ---------------------------------------------------------------------------

struct BoundaryCondition {
  enum class Kind { dirichlet, flux };
  Kind kind = Kind::flux;
  /// Dirichlet: prescribed p. Flux: prescribed inward flux kappa dp/dn
  /// (n the outward normal). Evaluated at boundary points (x1, x2).
  std::function<double(double, double)> value = [](double, double) { return 0.0; };

  static BoundaryCondition dirichlet(std::function<double(double, double)> g) {
    return {Kind::dirichlet, std::move(g)};
  }
  static BoundaryCondition dirichlet(double c) {
    return {Kind::dirichlet, [c](double, double) { return c; }};
  }
  static BoundaryCondition flux(double q) {
    return {Kind::flux, [q](double, double) { return q; }};
  }
};

struct DarcyProblem {
  enum Side { left = 0, right = 1, bottom = 2, top = 3 };

  Domain domain;
  std::function<double(double, double)> source;
  std::array<BoundaryCondition, 4> bc;

  /// The groundwater configuration on [0,6]^2: p = 100 at the bottom, no
  /// flow through right and top, inward flux 500 through the left side, and
  /// a source 0 / 137 / 274 in horizontal bands split at x2 = 4 and x2 = 5.
  static DarcyProblem standard(int n_cells) {
    DarcyProblem p;
    p.domain = build_domain(6.0, 6.0, n_cells, n_cells);
    p.source = [](double, double x2) {
      if (x2 <= 4.0) return 0.0;
      if (x2 <= 5.0) return 137.0;
      return 274.0;
    };
    p.bc[left] = BoundaryCondition::flux(500.0);
    p.bc[right] = BoundaryCondition::flux(0.0);
    p.bc[bottom] = BoundaryCondition::dirichlet(100.0);
    p.bc[top] = BoundaryCondition::flux(0.0);
    return p;
  }
};

/// Pressure on all (n1+1) x (n2+1) nodes plus the balance terms needed for
/// conservation checks.
struct DarcySolution {
  Matrix<double> nodes;        // nodes(i, j) at (i h1, j h2)
  Field<double> interior;      // interior-node restriction
  double source_total = 0.0;   // integral of f over the domain
  double imposed_inflow = 0.0; // integral of prescribed inward flux
  double dirichlet_outflow = 0.0;
};

/// Conservative node-centred finite volume scheme (5-point stencil, harmonic
/// face averages of kappa). Boundary nodes own half/quarter control volumes,
/// which is the ghost-node treatment of flux conditions. Interior-node kappa
/// is extended to the boundary rows by copying the nearest interior value.
class DarcySolver {
 public:
  explicit DarcySolver(DarcyProblem problem) : problem_(std::move(problem)) {
    const Domain& d = problem_.domain;
    if (d.dim != 2) throw std::invalid_argument("Darcy solver needs a 2D domain");
    n1_ = d.n_cells[0];
    n2_ = d.n_cells[1];
    h1_ = d.spacing(0);
    h2_ = d.spacing(1);
    unknown_.assign(static_cast<std::size_t>((n1_ + 1) * (n2_ + 1)), -1);
    int count = 0;
    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i)
        if (!is_dirichlet(i, j)) unknown_[node(i, j)] = count++;
    n_unknowns_ = count;
    if (n_unknowns_ == static_cast<int>(unknown_.size()))
      throw std::invalid_argument("Darcy problem needs at least one Dirichlet side");
    source_.resize(n1_ + 1, n2_ + 1);
    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i) source_(i, j) = cv_source(i, j);
  }

  const DarcyProblem& problem() const { return problem_; }

  DarcySolution solve(const Field<double>& kappa) const {
    const Domain& d = problem_.domain;
    if (!kappa.domain.same_grid(d))
      throw std::invalid_argument("permeability grid does not match Darcy grid");
    if (!(kappa.values.array() > 0).all())
      throw std::invalid_argument("permeability must be strictly positive");

    Matrix<double> k(n1_ + 1, n2_ + 1);
    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i) {
        const int ii = std::clamp(i - 1, 0, d.interior(0) - 1);
        const int jj = std::clamp(j - 1, 0, d.interior(1) - 1);
        k(i, j) = kappa.values[d.index(ii, jj)];
      }

    Matrix<double> p(n1_ + 1, n2_ + 1);
    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i)
        p(i, j) = is_dirichlet(i, j) ? dirichlet_value(i, j) : 0.0;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n_unknowns_) * 5);
    Vector<double> rhs = Vector<double>::Zero(n_unknowns_);
    double imposed = 0.0;
    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i) {
        const double inflow = boundary_inflow(i, j);
        imposed += inflow;
        const int r = unknown_[node(i, j)];
        if (r < 0) continue;
        rhs[r] += source_(i, j) + inflow;
        double diag = 0.0;
        for_each_neighbor(i, j, k, [&](int ni, int nj, double t) {
          diag += t;
          const int c = unknown_[node(ni, nj)];
          if (c >= 0)
            trips.emplace_back(r, c, -t);
          else
            rhs[r] += t * p(ni, nj);
        });
        trips.emplace_back(r, r, diag);
      }
    SparseMatrix<double> a(n_unknowns_, n_unknowns_);
    a.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<SparseMatrix<double>> ldlt;
    ldlt.compute(a);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0).any())
      throw SolverError("Darcy system is not symmetric positive definite");
    const Vector<double> x = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !x.allFinite())
      throw SolverError("Darcy linear solve failed");

    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i)
        if (const int r = unknown_[node(i, j)]; r >= 0) p(i, j) = x[r];

    DarcySolution sol;
    sol.nodes = p;
    Vector<double> inner(d.size());
    for (int j = 0; j < d.interior(1); ++j)
      for (int i = 0; i < d.interior(0); ++i) inner[d.index(i, j)] = p(i + 1, j + 1);
    sol.interior = Field<double>(d, std::move(inner));
    sol.source_total = source_.sum();
    sol.imposed_inflow = imposed;
    // Flux leaving through Dirichlet control volumes: sources in the volume
    // minus the net flux it sends to its neighbours.
    double out = 0.0;
    for (int j = 0; j <= n2_; ++j)
      for (int i = 0; i <= n1_; ++i) {
        if (unknown_[node(i, j)] >= 0) continue;
        double net = 0.0;
        for_each_neighbor(i, j, k, [&](int ni, int nj, double t) {
          net += t * (p(i, j) - p(ni, nj));
        });
        out += source_(i, j) + boundary_inflow(i, j) - net;
      }
    sol.dirichlet_outflow = out;
    return sol;
  }

 private:
  int node(int i, int j) const { return i + j * (n1_ + 1); }

  bool is_dirichlet(int i, int j) const {
    using K = BoundaryCondition::Kind;
    const auto& bc = problem_.bc;
    return (i == 0 && bc[DarcyProblem::left].kind == K::dirichlet) ||
           (i == n1_ && bc[DarcyProblem::right].kind == K::dirichlet) ||
           (j == 0 && bc[DarcyProblem::bottom].kind == K::dirichlet) ||
           (j == n2_ && bc[DarcyProblem::top].kind == K::dirichlet);
  }

  double dirichlet_value(int i, int j) const {
    using K = BoundaryCondition::Kind;
    const auto& bc = problem_.bc;
    const double x1 = i * h1_, x2 = j * h2_;
    if (j == 0 && bc[DarcyProblem::bottom].kind == K::dirichlet)
      return bc[DarcyProblem::bottom].value(x1, x2);
    if (j == n2_ && bc[DarcyProblem::top].kind == K::dirichlet)
      return bc[DarcyProblem::top].value(x1, x2);
    if (i == 0 && bc[DarcyProblem::left].kind == K::dirichlet)
      return bc[DarcyProblem::left].value(x1, x2);
    return bc[DarcyProblem::right].value(x1, x2);
  }

  double cv_width(int i) const { return (i == 0 || i == n1_) ? h1_ / 2 : h1_; }
  double cv_height(int j) const { return (j == 0 || j == n2_) ? h2_ / 2 : h2_; }

  /// 2x2 Gauss quadrature of f over the node's control volume.
  double cv_source(int i, int j) const {
    if (!problem_.source) return 0.0;
    const double xa = std::max(0.0, (i - 0.5) * h1_), xb = std::min(n1_ * h1_, (i + 0.5) * h1_);
    const double ya = std::max(0.0, (j - 0.5) * h2_), yb = std::min(n2_ * h2_, (j + 0.5) * h2_);
    const double g = 0.5 / std::sqrt(3.0);
    double s = 0.0;
    for (double gx : {-g, g})
      for (double gy : {-g, g})
        s += problem_.source(0.5 * (xa + xb) + gx * (xb - xa), 0.5 * (ya + yb) + gy * (yb - ya));
    return 0.25 * s * (xb - xa) * (yb - ya);
  }

  /// Integral of prescribed inward flux over the boundary part of the
  /// node's control volume (midpoint rule per side).
  double boundary_inflow(int i, int j) const {
    using K = BoundaryCondition::Kind;
    const auto& bc = problem_.bc;
    const double x1 = i * h1_, x2 = j * h2_;
    double q = 0.0;
    if (i == 0 && bc[DarcyProblem::left].kind == K::flux)
      q += bc[DarcyProblem::left].value(x1, x2) * cv_height(j);
    if (i == n1_ && bc[DarcyProblem::right].kind == K::flux)
      q += bc[DarcyProblem::right].value(x1, x2) * cv_height(j);
    if (j == 0 && bc[DarcyProblem::bottom].kind == K::flux)
      q += bc[DarcyProblem::bottom].value(x1, x2) * cv_width(i);
    if (j == n2_ && bc[DarcyProblem::top].kind == K::flux)
      q += bc[DarcyProblem::top].value(x1, x2) * cv_width(i);
    return q;
  }

  template <typename F>
  void for_each_neighbor(int i, int j, const Matrix<double>& k, F&& f) const {
    auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };
    if (i > 0) f(i - 1, j, harmonic(k(i, j), k(i - 1, j)) * cv_height(j) / h1_);
    if (i < n1_) f(i + 1, j, harmonic(k(i, j), k(i + 1, j)) * cv_height(j) / h1_);
    if (j > 0) f(i, j - 1, harmonic(k(i, j), k(i, j - 1)) * cv_width(i) / h2_);
    if (j < n2_) f(i, j + 1, harmonic(k(i, j), k(i, j + 1)) * cv_width(i) / h2_);
  }

  DarcyProblem problem_;
  int n1_ = 0, n2_ = 0;
  double h1_ = 0, h2_ = 0;
  int n_unknowns_ = 0;
  std::vector<int> unknown_;
  Matrix<double> source_;
};

inline Field<double> solve_darcy(const Field<double>& kappa, const DarcyProblem& problem) {
  return DarcySolver(problem).solve(kappa).interior;
}

// ---------------------------------------------------------------------------
// 1D source problem: p'' + p = u on [0, L], p(0) = p(L) = 0.
// ---------------------------------------------------------------------------

/// Lumped-mass piecewise-linear elements on a uniform mesh, i.e. the
/// three-point scheme (p[i-1] - 2p[i] + p[i+1]) / h^2 + p[i] = u[i].
class SourceSolver1D {
 public:
  explicit SourceSolver1D(const Domain& domain) : domain_(domain) {
    if (domain.dim != 1) throw std::invalid_argument("source problem needs a 1D domain");
    // Continuum resonance would need L / pi to be an integer.
    SparseMatrix<double> a = -negative_laplacian<double>(domain);
    for (int i = 0; i < domain.size(); ++i) a.coeffRef(i, i) += 1.0;
    a.makeCompressed();
    system_ = a;
    lu_.compute(system_);
    if (lu_.info() != Eigen::Success) throw SolverError("source operator is singular");
  }

  static SourceSolver1D standard(int n_cells) { return SourceSolver1D(build_domain(10.0, n_cells)); }

  const Domain& domain() const { return domain_; }
  const SparseMatrix<double>& system() const { return system_; }

  Field<double> solve(const Field<double>& u) const {
    if (!u.domain.same_grid(domain_))
      throw std::invalid_argument("source grid does not match solver grid");
    Vector<double> p = lu_.solve(u.values);
    if (lu_.info() != Eigen::Success || !p.allFinite())
      throw SolverError("source problem solve failed");
    return Field<double>(domain_, std::move(p));
  }

  /// Dense matrix of u -> O p for a given linear observation operator O.
  Matrix<double> response_matrix(const SparseMatrix<double>& observation) const {
    const SparseMatrix<double> at = system_.transpose();
    Eigen::SparseLU<SparseMatrix<double>> lut(at);
    if (lut.info() != Eigen::Success) throw SolverError("source operator is singular");
    Matrix<double> ot = Matrix<double>(observation.transpose());
    Matrix<double> z = lut.solve(ot);
    return z.transpose();
  }

 private:
  Domain domain_;
  SparseMatrix<double> system_;
  Eigen::SparseLU<SparseMatrix<double>> lu_;
};

inline Field<double> solve_source_1d(const Field<double>& u) {
  return SourceSolver1D(u.domain).solve(u);
}

// ---------------------------------------------------------------------------
// Observations.
// ---------------------------------------------------------------------------

/// Linear functionals as rows of a sparse matrix over interior nodes, plus
/// data, noise covariance and the noise level used by the stopping rule.
struct ObservationModel {
  SparseMatrix<double> functionals;
  std::vector<std::array<double, 2>> centers;
  Vector<double> y;
  Matrix<double> gamma;
  double noise_level = 0.0;

  int size() const { return static_cast<int>(functionals.rows()); }

  void validate() const {
    if (gamma.rows() != size() || gamma.cols() != size())
      throw std::invalid_argument("noise covariance has wrong shape");
    if (!gamma.isApprox(gamma.transpose()))
      throw std::invalid_argument("noise covariance must be symmetric");
    Eigen::LLT<Matrix<double>> llt(gamma);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("noise covariance must be positive definite");
  }
};

inline Vector<double> observe(const Field<double>& p, const ObservationModel& model) {
  if (p.values.size() != model.functionals.cols())
    throw std::invalid_argument("field does not match observation functionals");
  return model.functionals * p.values;
}

/// Gaussian-weighted averages centred at `centers`, truncated at 6 sigma and
/// renormalized to unit discrete mass over interior nodes.
inline SparseMatrix<double> mollified_functionals(const Domain& d,
                                                  const std::vector<std::array<double, 2>>& centers,
                                                  double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("mollifier width must be positive");
  std::vector<Eigen::Triplet<double>> trips;
  const double cut = 6.0 * sigma;
  for (std::size_t t = 0; t < centers.size(); ++t) {
    const auto& c = centers[t];
    for (int a = 0; a < d.dim; ++a)
      if (!(c[a] > 0.0 && c[a] < d.extents[a]))
        throw std::invalid_argument("observation center outside the domain");
    std::vector<Eigen::Triplet<double>> row;
    double mass = 0.0;
    for (int j = 0; j < d.interior(1); ++j)
      for (int i = 0; i < d.interior(0); ++i) {
        double r2 = std::pow(d.coordinate(0, i) - c[0], 2);
        if (d.dim == 2) r2 += std::pow(d.coordinate(1, j) - c[1], 2);
        if (r2 > cut * cut) continue;
        const double w = std::exp(-r2 / (2.0 * sigma * sigma));
        row.emplace_back(static_cast<int>(t), d.index(i, j), w);
        mass += w;
      }
    if (mass <= 0.0) throw std::invalid_argument("mollifier has no support on the grid");
    for (auto& e : row) trips.emplace_back(e.row(), e.col(), e.value() / mass);
  }
  SparseMatrix<double> o(static_cast<int>(centers.size()), d.size());
  o.setFromTriplets(trips.begin(), trips.end());
  return o;
}

/// Point evaluations by linear interpolation between nodes (exact at
/// nodes); the Dirichlet boundary value 0 is used next to the boundary.
inline SparseMatrix<double> point_functionals(const Domain& d, const std::vector<double>& points) {
  if (d.dim != 1) throw std::invalid_argument("point functionals are implemented in 1D");
  std::vector<Eigen::Triplet<double>> trips;
  const double h = d.spacing(0);
  for (std::size_t t = 0; t < points.size(); ++t) {
    const double x = points[t];
    if (!(x > 0.0 && x < d.extents[0]))
      throw std::invalid_argument("observation point outside the domain");
    const double s = x / h;
    int left = static_cast<int>(std::floor(s));
    double w = s - left;
    if (w < 1e-12) w = 0.0;
    if (w > 1.0 - 1e-12) {
      w = 0.0;
      ++left;
    }
    // Node `left` (0..n) -> interior index left - 1.
    if (left >= 1 && left <= d.interior(0))
      trips.emplace_back(static_cast<int>(t), left - 1, 1.0 - w);
    if (w > 0.0 && left + 1 >= 1 && left + 1 <= d.interior(0))
      trips.emplace_back(static_cast<int>(t), left, w);
  }
  SparseMatrix<double> o(static_cast<int>(points.size()), d.size());
  o.setFromTriplets(trips.begin(), trips.end());
  return o;
}

/// per_axis^2 centers at the midpoints of a uniform partition of the domain.
inline std::vector<std::array<double, 2>> lattice_centers(const Domain& d, int per_axis) {
  std::vector<std::array<double, 2>> c;
  for (int j = 0; j < per_axis; ++j)
    for (int i = 0; i < per_axis; ++i)
      c.push_back({d.extents[0] * (i + 0.5) / per_axis, d.extents[1] * (j + 0.5) / per_axis});
  return c;
}

/// `count` equally spaced interior points x_k = k L / (count + 1).
inline std::vector<double> equally_spaced_points(const Domain& d, int count) {
  std::vector<double> x;
  for (int k = 1; k <= count; ++k) x.push_back(d.extents[0] * k / (count + 1));
  return x;
}

}  // namespace hieki
