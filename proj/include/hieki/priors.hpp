#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "hieki/grid.hpp"

namespace hieki {

/// Whittle-Matern prior with covariance sigma2 * (tau^2 I - Laplacian)^(-alpha),
/// Dirichlet Laplacian, constant mean.
template <typename Scalar = double>
struct MaternSpec {
  Scalar alpha = Scalar(2);
  Scalar tau = Scalar(10);
  Scalar sigma2 = Scalar(1);
  Scalar mean = Scalar(0);

  void validate(int dim) const {
    if (!(alpha > Scalar(dim) / 2))
      throw std::invalid_argument("Matern alpha must exceed d/2 (alpha=" +
                                  std::to_string(double(alpha)) + ")");
    if (!(tau > 0))
      throw std::invalid_argument("Matern tau must be positive (tau=" +
                                  std::to_string(double(tau)) + ")");
    if (!(sigma2 > 0)) throw std::invalid_argument("Matern sigma2 must be positive");
    if (!std::isfinite(double(mean))) throw std::invalid_argument("Matern mean must be finite");
  }
};

/// Per-mode standard deviations sqrt(sigma2) (tau^2 + lambda_k)^(-alpha/2).
template <typename Scalar>
Vector<Scalar> matern_mode_scales(const MaternSpec<Scalar>& spec,
                                  const SpectralBasis<Scalar>& basis) {
  spec.validate(basis.domain().dim);
  const Scalar tau2 = spec.tau * spec.tau;
  const Scalar amp = std::sqrt(spec.sigma2);
  Vector<Scalar> s(basis.size());
  for (int m = 0; m < basis.size(); ++m)
    s[m] = amp * std::pow(tau2 + static_cast<Scalar>(basis.modes()[m].eigenvalue),
                          -spec.alpha / 2);
  return s;
}

/// u = mean + C^{1/2} xi with xi given as sine-basis coefficients.
template <typename Scalar>
Field<Scalar> apply_sqrt_cov(const MaternSpec<Scalar>& spec,
                             const SpectralBasis<Scalar>& basis,
                             const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& xi) {
  if (xi.size() != basis.size())
    throw std::invalid_argument("white noise length does not match basis");
  Vector<Scalar> coeffs = matern_mode_scales(spec, basis).cwiseProduct(xi);
  Vector<Scalar> v = basis.synthesize(coeffs);
  v.array() += spec.mean;
  return Field<Scalar>(basis.domain(), std::move(v));
}

template <typename Scalar, typename URBG>
Field<Scalar> sample_matern(const MaternSpec<Scalar>& spec,
                            const SpectralBasis<Scalar>& basis, URBG& rng) {
  spec.validate(basis.domain().dim);
  return apply_sqrt_cov(spec, basis, white_noise(basis, rng));
}

/// Pointwise Whittle-Matern covariance on R^d (unit variance at distance 0).
/// Only used as a reference in tests.
inline double matern_covariance(double r, double alpha, double ell, int dim,
                                double sigma2 = 1.0) {
  const double nu = alpha - dim / 2.0;
  if (r == 0.0) return sigma2;
  const double x = r / ell;
  return sigma2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(x, nu) *
         std::cyl_bessel_k(nu, x);
}

/// Positive monotone map from the hyperparameter v to a length scale.
/// exp: g(s) = exp(s). rational: g(s) = a / (b + c|s|) + d.
/// Outputs are clamped to [floor, ceiling].
template <typename Scalar = double>
struct GMap {
  enum class Kind { exp, rational };
  Kind kind = Kind::exp;
  Scalar a = 4, b = 0, c = 1, d = 0;
  Scalar floor = Scalar(1e-6);
  Scalar ceiling = std::numeric_limits<Scalar>::infinity();

  void validate() const {
    if (kind == Kind::rational && (!(a > 0) || !(c > 0) || b < 0 || d < 0))
      throw std::invalid_argument("rational g-map needs a,c > 0 and b,d >= 0");
    if (!(floor > 0) || !(ceiling > floor))
      throw std::invalid_argument("g-map clamp range must satisfy 0 < floor < ceiling");
  }

  Scalar operator()(Scalar s) const {
    Scalar g;
    if (kind == Kind::exp) {
      g = std::exp(s);
    } else {
      const Scalar den = b + c * std::abs(s);
      g = den > 0 ? a / den + d : std::numeric_limits<Scalar>::infinity();
    }
    return std::clamp(g, floor, ceiling);
  }
};

template <typename Scalar>
Field<Scalar> g_map(const GMap<Scalar>& g, const Field<Scalar>& v) {
  g.validate();
  Vector<Scalar> out = v.values.unaryExpr([&g](Scalar s) { return g(s); });
  if (!(out.array() > 0).all())
    throw std::domain_error("g-map produced a non-positive length scale");
  return Field<Scalar>(v.domain, std::move(out));
}

template <typename Scalar>
Field<Scalar> solve_nonstationary_grid(int alpha, const Field<Scalar>& ell,
                                       const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& noise);

/// Solves (I - diag(ell^2) Lap_h)^(alpha/2) u = diag(ell^(d/2)) W(xi), where
/// W(xi) is the grid realization of the white noise coefficients.
/// alpha/2 must be a positive integer. Homogeneous Dirichlet conditions.
template <typename Scalar>
Field<Scalar> solve_nonstationary(int alpha, const Field<Scalar>& ell,
                                  const SpectralBasis<Scalar>& basis,
                                  const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& xi) {
  if (alpha <= 0 || alpha % 2 != 0)
    throw std::invalid_argument("nonstationary sampler needs an even positive alpha");
  const Domain& d = basis.domain();
  if (ell.values.size() != d.size())
    throw std::invalid_argument("length-scale field does not match basis grid");
  if (!(ell.values.array() > 0).all())
    throw std::invalid_argument("length-scale field must be positive");
  if (xi.size() != basis.size())
    throw std::invalid_argument("white noise length does not match basis");
  return solve_nonstationary_grid<Scalar>(alpha, Field<Scalar>(d, ell.values), basis.synthesize(xi));
}

/// Same as solve_nonstationary with the white noise already synthesized on
/// the grid (W(xi) as node values).
template <typename Scalar>
Field<Scalar> solve_nonstationary_grid(int alpha, const Field<Scalar>& ell,
                                       const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& noise) {
  if (alpha <= 0 || alpha % 2 != 0)
    throw std::invalid_argument("nonstationary sampler needs an even positive alpha");
  const Domain& d = ell.domain;
  if (noise.size() != d.size())
    throw std::invalid_argument("white noise grid does not match length-scale field");
  if (!(ell.values.array() > 0).all())
    throw std::invalid_argument("length-scale field must be positive");

  Vector<Scalar> rhs = noise;
  rhs.array() *= ell.values.array().pow(Scalar(d.dim) / 2);

  // I - diag(ell^2) Lap = diag(ell^2) (diag(ell^-2) + (-Lap)); the bracket
  // is symmetric positive definite, so each power is one LDL^T solve.
  const Vector<Scalar> inv_ell2 = ell.values.array().square().inverse();
  SparseMatrix<Scalar> m = negative_laplacian<Scalar>(d);
  for (int i = 0; i < d.size(); ++i) m.coeffRef(i, i) += inv_ell2[i];
  m.makeCompressed();

  Eigen::SimplicialLDLT<SparseMatrix<Scalar>> ldlt;
  ldlt.compute(m);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("nonstationary operator factorization failed");
  Vector<Scalar> u = rhs;
  for (int p = 0; p < alpha / 2; ++p) {
    const Vector<Scalar> scaled = inv_ell2.cwiseProduct(u);
    u = ldlt.solve(scaled);
    if (ldlt.info() != Eigen::Success || !u.allFinite())
      throw std::runtime_error("nonstationary operator solve failed");
  }
  return Field<Scalar>(d, std::move(u));
}

template <typename Scalar, typename URBG>
Field<Scalar> sample_nonstationary(int alpha, const Field<Scalar>& ell,
                                   const SpectralBasis<Scalar>& basis, URBG& rng) {
  return solve_nonstationary(alpha, ell, basis, white_noise(basis, rng));
}

/// Piecewise-constant Cauchy process on a 1D grid: v(0) = 0, knots every
/// `delta` along the axis, each knot adding one Cauchy(0, delta) increment.
/// Nodes between knots hold the value of the last knot at or before them.
template <typename Scalar = double>
struct CauchyProcess {
  Domain domain;
  Scalar delta = Scalar(0.1);
  bool interpolate = false;

  CauchyProcess(const Domain& d, Scalar dlt, bool linear = false)
      : domain(d), delta(dlt), interpolate(linear) {
    if (d.dim != 1) throw std::invalid_argument("Cauchy process requires a 1D domain");
    if (!(delta > 0)) throw std::invalid_argument("Cauchy increment scale must be positive");
    if (delta > d.extents[0])
      throw std::invalid_argument("Cauchy increment spacing exceeds the domain");
  }

  /// Number of increments (knots after the origin) covering the domain.
  int n_increments() const {
    return static_cast<int>(std::ceil(domain.extents[0] / double(delta) - 1e-12));
  }

  Field<Scalar> path(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& increments) const {
    if (increments.size() != n_increments())
      throw std::invalid_argument("increment count does not match Cauchy process");
    Vector<Scalar> knots(n_increments() + 1);
    knots[0] = 0;
    for (int k = 0; k < n_increments(); ++k) knots[k + 1] = knots[k] + increments[k];
    Vector<Scalar> v(domain.size());
    for (int i = 0; i < domain.size(); ++i) {
      const double s = domain.coordinate(0, i) / double(delta);
      const int k = std::min(static_cast<int>(std::floor(s + 1e-12)), n_increments());
      if (interpolate && k < n_increments()) {
        const Scalar w = static_cast<Scalar>(s - k);
        v[i] = (1 - w) * knots[k] + w * knots[k + 1];
      } else {
        v[i] = knots[k];
      }
    }
    return Field<Scalar>(domain, std::move(v));
  }

  /// Standard normal latents -> Cauchy(0, delta) increments through the
  /// quantile transform delta * tan(pi (Phi(z) - 1/2)).
  Vector<Scalar> increments_from_latent(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& z) const {
    Vector<Scalar> inc(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double zk = double(z[k]);
      const double tail = std::erfc(std::abs(zk) / std::numbers::sqrt2);  // 2(1 - Phi(|z|))
      const double mag = tail > 0 ? 1.0 / std::tan(std::numbers::pi / 2 * tail)
                                  : std::numeric_limits<double>::max();
      inc[k] = static_cast<Scalar>(std::copysign(double(delta) * mag, zk));
    }
    return inc;
  }
};

template <typename Scalar, typename URBG>
Field<Scalar> sample_cauchy_process(const CauchyProcess<Scalar>& process, URBG& rng) {
  std::cauchy_distribution<double> dist(0.0, double(process.delta));
  Vector<Scalar> inc(process.n_increments());
  for (int k = 0; k < inc.size(); ++k) inc[k] = static_cast<Scalar>(dist(rng));
  return process.path(inc);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile needs p in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Normal-quantile bijection R -> (lower, upper): theta = a + (b - a) Phi(raw).
/// Standard normal raws map to exactly uniform thetas.
template <typename Scalar = double>
struct UniformBijection {
  Scalar lower = 0;
  Scalar upper = 1;

  UniformBijection() = default;
  UniformBijection(Scalar a, Scalar b) : lower(a), upper(b) {
    if (!(a < b)) throw std::invalid_argument("uniform prior needs lower < upper");
  }

  Scalar to_hyper(Scalar raw) const {
    if (!std::isfinite(double(raw))) throw std::domain_error("raw hyperparameter is not finite");
    // Evaluate from the nearer end so both tails keep full relative precision.
    if (raw <= 0) return lower + (upper - lower) * static_cast<Scalar>(normal_cdf(double(raw)));
    return upper - (upper - lower) * static_cast<Scalar>(normal_cdf(-double(raw)));
  }

  Scalar to_unconstrained(Scalar theta) const {
    if (!(theta > lower && theta < upper))
      throw std::domain_error("hyperparameter " + std::to_string(double(theta)) +
                              " outside prior support (" + std::to_string(double(lower)) +
                              ", " + std::to_string(double(upper)) + ")");
    const double width = double(upper - lower);
    const double p = double(theta - lower) / width;
    if (p <= 0.5) return static_cast<Scalar>(normal_quantile(p));
    return static_cast<Scalar>(-normal_quantile(double(upper - theta) / width));
  }

  Scalar midpoint() const { return (lower + upper) / 2; }
};

template <typename Scalar>
Scalar hyper_to_unconstrained(Scalar theta, const UniformBijection<Scalar>& b) {
  return b.to_unconstrained(theta);
}

template <typename Scalar>
Scalar unconstrained_to_hyper(Scalar raw, const UniformBijection<Scalar>& b) {
  return b.to_hyper(raw);
}

}  // namespace hieki
