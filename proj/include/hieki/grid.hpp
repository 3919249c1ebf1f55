#pragma once

#include <type_traits>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hieki/random.hpp"

namespace hieki {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar>;

/// Rectangular (or interval) domain [0,L1] x [0,L2] with a uniform node grid.
/// Node i along an axis sits at i * L / n_cells; only the n_cells - 1 interior
/// nodes carry field values.
struct Domain {
  int dim = 1;
  std::array<double, 2> extents{1.0, 1.0};
  std::array<int, 2> n_cells{2, 1};

  int interior(int axis) const { return axis < dim ? n_cells[axis] - 1 : 1; }
  int size() const { return interior(0) * interior(1); }
  double spacing(int axis) const { return extents[axis] / n_cells[axis]; }
  double cell_volume() const {
    return dim == 1 ? spacing(0) : spacing(0) * spacing(1);
  }
  /// Physical coordinate of interior node `i` (0-based) along `axis`.
  double coordinate(int axis, int i) const { return (i + 1) * spacing(axis); }
  /// Flat index of interior node (i, j); x1 varies fastest.
  int index(int i, int j = 0) const { return i + j * interior(0); }

  /// Same node layout rescaled to unit extents.
  Domain normalized() const {
    Domain d = *this;
    d.extents = {1.0, 1.0};
    return d;
  }

  bool same_grid(const Domain& other) const {
    return dim == other.dim && n_cells == other.n_cells &&
           extents == other.extents;
  }
};

inline Domain build_domain(int dim, std::span<const double> extents,
                           std::span<const int> n_cells) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("domain dimension must be 1 or 2");
  if (static_cast<int>(extents.size()) != dim ||
      static_cast<int>(n_cells.size()) != dim)
    throw std::invalid_argument("domain needs one extent and one resolution per axis");
  Domain d;
  d.dim = dim;
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0.0) || !std::isfinite(extents[a]))
      throw std::invalid_argument("domain extent must be positive");
    if (n_cells[a] < 2)
      throw std::invalid_argument("domain resolution must be at least 2 cells per axis");
    d.extents[a] = extents[a];
    d.n_cells[a] = n_cells[a];
  }
  if (dim == 1) {
    d.extents[1] = 1.0;
    d.n_cells[1] = 2;
  }
  return d;
}

inline Domain build_domain(double length, int n_cells) {
  const std::array<double, 1> e{length};
  const std::array<int, 1> n{n_cells};
  return build_domain(1, e, n);
}

inline Domain build_domain(double l1, double l2, int n1, int n2) {
  const std::array<double, 2> e{l1, l2};
  const std::array<int, 2> n{n1, n2};
  return build_domain(2, e, n);
}

/// Real-valued grid function on the interior nodes of a domain.
template <typename Scalar = double>
struct Field {
  Domain domain;
  Vector<Scalar> values;

  Field() = default;
  Field(Domain d, Vector<Scalar> v) : domain(d), values(std::move(v)) {
    if (values.size() != domain.size())
      throw std::invalid_argument("field length does not match domain");
    if (!values.allFinite())
      throw std::invalid_argument("field contains non-finite values");
  }

  static Field constant(const Domain& d, Scalar c) {
    return Field(d, Vector<Scalar>::Constant(d.size(), c));
  }

  template <typename F>
  static Field from_function(const Domain& d, F&& f) {
    Vector<Scalar> v(d.size());
    for (int j = 0; j < d.interior(1); ++j)
      for (int i = 0; i < d.interior(0); ++i) {
        if constexpr (std::is_invocable_v<F, double>) {
          if (d.dim != 1) throw std::invalid_argument("one-argument function on a 2D grid");
          v[d.index(i)] = static_cast<Scalar>(f(d.coordinate(0, i)));
        } else {
          if (d.dim != 2) throw std::invalid_argument("two-argument function on a 1D grid");
          v[d.index(i, j)] =
              static_cast<Scalar>(f(d.coordinate(0, i), d.coordinate(1, j)));
        }
      }
    return Field(d, std::move(v));
  }

  Eigen::Index size() const { return values.size(); }
};

/// Grid L2 norm: sqrt(cell volume * sum of squares).
template <typename Scalar>
Scalar l2_norm(const Field<Scalar>& f) {
  return std::sqrt(static_cast<Scalar>(f.domain.cell_volume())) * f.values.norm();
}

template <typename Scalar>
Scalar l2_inner(const Field<Scalar>& a, const Field<Scalar>& b) {
  return static_cast<Scalar>(a.domain.cell_volume()) * a.values.dot(b.values);
}

struct Mode {
  std::array<int, 2> index{1, 0};
  /// Continuum Dirichlet eigenvalue of -Laplacian, sum of (k pi / L)^2.
  double eigenvalue = 0.0;
  /// Eigenvalue of the 5-point (3-point in 1D) discrete -Laplacian for the
  /// same sine vector.
  double discrete_eigenvalue = 0.0;
};

/// Dirichlet sine eigenbasis of -Laplacian on a Domain, sorted by eigenvalue.
/// Eigenfunctions sqrt(2/L) sin(k pi x / L) are orthonormal under the grid
/// inner product. Synthesis and analysis are separable dense transforms.
template <typename Scalar = double>
class SpectralBasis {
 public:
  SpectralBasis(const Domain& domain, int max_modes_per_axis = 0) : domain_(domain) {
    for (int a = 0; a < domain.dim; ++a) {
      const int n = domain.interior(a);
      const int k_max =
          max_modes_per_axis > 0 ? std::min(n, max_modes_per_axis) : n;
      const double L = domain.extents[a];
      Matrix<Scalar>& s = sines_[a];
      s.resize(n, k_max);
      const double norm = std::sqrt(2.0 / L);
      for (int k = 1; k <= k_max; ++k)
        for (int i = 0; i < n; ++i)
          s(i, k - 1) = static_cast<Scalar>(
              norm * std::sin(k * std::numbers::pi * (i + 1) / domain.n_cells[a]));
    }
    const int k0 = static_cast<int>(sines_[0].cols());
    const int k1 = domain.dim == 2 ? static_cast<int>(sines_[1].cols()) : 1;
    modes_.reserve(static_cast<std::size_t>(k0) * k1);
    for (int k2 = 1; k2 <= k1; ++k2)
      for (int k = 1; k <= k0; ++k) {
        Mode m;
        m.index = {k, domain.dim == 2 ? k2 : 0};
        m.eigenvalue = axis_eigenvalue(0, k);
        m.discrete_eigenvalue = axis_discrete_eigenvalue(0, k);
        if (domain.dim == 2) {
          m.eigenvalue += axis_eigenvalue(1, k2);
          m.discrete_eigenvalue += axis_discrete_eigenvalue(1, k2);
        }
        modes_.push_back(m);
      }
    std::stable_sort(modes_.begin(), modes_.end(), [](const Mode& a, const Mode& b) {
      return a.eigenvalue < b.eigenvalue;
    });
  }

  const Domain& domain() const { return domain_; }
  const std::vector<Mode>& modes() const { return modes_; }
  int size() const { return static_cast<int>(modes_.size()); }

  Vector<Scalar> eigenvalues() const {
    Vector<Scalar> v(size());
    for (int m = 0; m < size(); ++m) v[m] = static_cast<Scalar>(modes_[m].eigenvalue);
    return v;
  }

  /// Grid values of sum_m coeffs[m] * phi_m.
  Vector<Scalar> synthesize(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& coeffs) const {
    check_length(coeffs.size());
    if (domain_.dim == 1) {
      Vector<Scalar> c(sines_[0].cols());
      for (int m = 0; m < size(); ++m) c[modes_[m].index[0] - 1] = coeffs[m];
      return sines_[0] * c;
    }
    Matrix<Scalar> c = Matrix<Scalar>::Zero(sines_[0].cols(), sines_[1].cols());
    for (int m = 0; m < size(); ++m)
      c(modes_[m].index[0] - 1, modes_[m].index[1] - 1) = coeffs[m];
    Matrix<Scalar> grid = sines_[0] * c * sines_[1].transpose();
    return Eigen::Map<const Vector<Scalar>>(grid.data(), grid.size());
  }

  /// Column-wise synthesize for a (size x count) coefficient matrix.
  Matrix<Scalar> synthesize_columns(const Matrix<Scalar>& coeffs) const {
    check_length(coeffs.rows());
    if (domain_.dim == 1) {
      Matrix<Scalar> c(sines_[0].cols(), coeffs.cols());
      for (int m = 0; m < size(); ++m) c.row(modes_[m].index[0] - 1) = coeffs.row(m);
      return sines_[0] * c;
    }
    Matrix<Scalar> out(domain_.size(), coeffs.cols());
    for (Eigen::Index j = 0; j < coeffs.cols(); ++j) out.col(j) = synthesize(coeffs.col(j));
    return out;
  }

  /// Grid-inner-product projection of grid values onto the represented modes.
  Vector<Scalar> analyze(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& values) const {
    if (values.size() != domain_.size())
      throw std::invalid_argument("grid vector length does not match domain");
    const auto w = static_cast<Scalar>(domain_.cell_volume());
    Vector<Scalar> out(size());
    if (domain_.dim == 1) {
      Vector<Scalar> c = w * (sines_[0].transpose() * values);
      for (int m = 0; m < size(); ++m) out[m] = c[modes_[m].index[0] - 1];
      return out;
    }
    Eigen::Map<const Matrix<Scalar>> grid(values.data(), domain_.interior(0),
                                          domain_.interior(1));
    Matrix<Scalar> c = w * (sines_[0].transpose() * grid * sines_[1]);
    for (int m = 0; m < size(); ++m)
      out[m] = c(modes_[m].index[0] - 1, modes_[m].index[1] - 1);
    return out;
  }

  Vector<Scalar> eigenfunction(int m) const {
    Vector<Scalar> e = Vector<Scalar>::Zero(size());
    e[m] = Scalar(1);
    return synthesize(e);
  }

 private:
  double axis_eigenvalue(int axis, int k) const {
    const double w = k * std::numbers::pi / domain_.extents[axis];
    return w * w;
  }
  double axis_discrete_eigenvalue(int axis, int k) const {
    const double h = domain_.spacing(axis);
    const double s = std::sin(k * std::numbers::pi / (2.0 * domain_.n_cells[axis]));
    return 4.0 * s * s / (h * h);
  }
  void check_length(Eigen::Index n) const {
    if (n != size())
      throw std::invalid_argument("coefficient vector length does not match basis");
  }

  Domain domain_;
  std::vector<Mode> modes_;
  std::array<Matrix<Scalar>, 2> sines_;
};

template <typename Scalar = double>
SpectralBasis<Scalar> dirichlet_spectrum(const Domain& domain, int max_modes_per_axis = 0) {
  return SpectralBasis<Scalar>(domain, max_modes_per_axis);
}

/// i.i.d. N(0,1) coefficients, one per represented sine mode.
template <typename Scalar, typename URBG>
Vector<Scalar> white_noise(const SpectralBasis<Scalar>& basis, URBG& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector<Scalar> xi(basis.size());
  for (int m = 0; m < basis.size(); ++m) xi[m] = static_cast<Scalar>(dist(rng));
  return xi;
}

/// Discrete -Laplacian (3-/5-point stencil) on interior nodes with
/// homogeneous Dirichlet boundary values. Symmetric positive definite.
template <typename Scalar = double>
SparseMatrix<Scalar> negative_laplacian(const Domain& d) {
  std::vector<Eigen::Triplet<Scalar>> t;
  const int n0 = d.interior(0), n1 = d.interior(1);
  t.reserve(static_cast<std::size_t>(d.size()) * (d.dim == 2 ? 5 : 3));
  const double ih0 = 1.0 / (d.spacing(0) * d.spacing(0));
  const double ih1 = d.dim == 2 ? 1.0 / (d.spacing(1) * d.spacing(1)) : 0.0;
  for (int j = 0; j < n1; ++j)
    for (int i = 0; i < n0; ++i) {
      const int r = d.index(i, j);
      t.emplace_back(r, r, static_cast<Scalar>(2.0 * ih0 + 2.0 * ih1));
      if (i > 0) t.emplace_back(r, d.index(i - 1, j), static_cast<Scalar>(-ih0));
      if (i + 1 < n0) t.emplace_back(r, d.index(i + 1, j), static_cast<Scalar>(-ih0));
      if (d.dim == 2) {
        if (j > 0) t.emplace_back(r, d.index(i, j - 1), static_cast<Scalar>(-ih1));
        if (j + 1 < n1) t.emplace_back(r, d.index(i, j + 1), static_cast<Scalar>(-ih1));
      }
    }
  SparseMatrix<Scalar> a(d.size(), d.size());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace hieki
