#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <variant>

#include "hieki/grid.hpp"
#include "hieki/priors.hpp"

namespace hieki {

template <typename Scalar = double>
struct LevelSetSpec {
  Scalar kappa_minus = 1;
  Scalar kappa_plus = 10;
  Scalar threshold = 0;

  void validate() const {
    if (!(kappa_minus > 0) || !(kappa_plus > 0))
      throw std::invalid_argument("level set conductivities must be positive");
    if (kappa_minus == kappa_plus)
      throw std::invalid_argument("level set conductivities must differ");
  }
};

/// kappa = kappa_plus where u > threshold, kappa_minus where u <= threshold.
template <typename Scalar>
Field<Scalar> level_set_map(const Field<Scalar>& u, const LevelSetSpec<Scalar>& spec) {
  spec.validate();
  Vector<Scalar> k = (u.values.array() > spec.threshold)
                         .select(Vector<Scalar>::Constant(u.size(), spec.kappa_plus),
                                 Vector<Scalar>::Constant(u.size(), spec.kappa_minus));
  return Field<Scalar>(u.domain, std::move(k));
}

template <typename Scalar>
Field<Scalar> exp_map(const Field<Scalar>& u) {
  if (u.values.size() > 0 && u.values.cwiseAbs().maxCoeff() > Scalar(700))
    throw std::overflow_error("exp map argument exceeds 700 in magnitude");
  return Field<Scalar>(u.domain, u.values.array().exp().matrix());
}

/// Five geometric channel parameters, in unit-square coordinates (s, t).
/// Centerline t = d4 + s tan(d3) + d1 sin(d2 s); the channel is the band of
/// half-width d5 around it.
template <typename Scalar = double>
struct ChannelGeometry {
  Scalar amplitude = 0;    // d1
  Scalar frequency = 1;    // d2
  Scalar angle = 0;        // d3
  Scalar offset = Scalar(0.5);  // d4
  Scalar width = Scalar(0.1);   // d5

  void validate() const {
    if (!(width > 0)) throw std::invalid_argument("channel width must be positive");
    if (!(frequency > 0)) throw std::invalid_argument("channel frequency must be positive");
  }

  Scalar centerline(Scalar s) const {
    return offset + s * std::tan(angle) + amplitude * std::sin(frequency * s);
  }
  bool inside(Scalar s, Scalar t) const { return std::abs(t - centerline(s)) < width; }
};

/// 1 on nodes inside the channel, 0 elsewhere.
template <typename Scalar>
Vector<Scalar> channel_indicator(const ChannelGeometry<Scalar>& g, const Domain& d) {
  if (d.dim != 2) throw std::invalid_argument("channel geometry needs a 2D domain");
  g.validate();
  Vector<Scalar> chi(d.size());
  for (int j = 0; j < d.interior(1); ++j)
    for (int i = 0; i < d.interior(0); ++i) {
      const auto s = static_cast<Scalar>(d.coordinate(0, i) / d.extents[0]);
      const auto t = static_cast<Scalar>(d.coordinate(1, j) / d.extents[1]);
      chi[d.index(i, j)] = g.inside(s, t) ? Scalar(1) : Scalar(0);
    }
  return chi;
}

template <typename Scalar = double>
struct ChannelSpec {
  ChannelGeometry<Scalar> geometry;
  Field<Scalar> log_kappa_inside;   // log kappa_2
  Field<Scalar> log_kappa_outside;  // log kappa_1
};

/// Log-permeability: log kappa_2 inside the channel, log kappa_1 outside.
template <typename Scalar>
Field<Scalar> channel_map(const ChannelSpec<Scalar>& spec, const Domain& domain) {
  if (!spec.log_kappa_inside.domain.same_grid(domain) ||
      !spec.log_kappa_outside.domain.same_grid(domain))
    throw std::invalid_argument("channel fields must live on the target grid");
  const Vector<Scalar> chi = channel_indicator(spec.geometry, domain);
  Vector<Scalar> out = chi.cwiseProduct(spec.log_kappa_inside.values) +
                       (Vector<Scalar>::Ones(chi.size()) - chi)
                           .cwiseProduct(spec.log_kappa_outside.values);
  return Field<Scalar>(domain, std::move(out));
}

/// Uniform priors on (alpha, tau) pushed through normal-quantile bijections.
template <typename Scalar = double>
struct ScalarHyperPrior {
  UniformBijection<Scalar> alpha{Scalar(1.3), Scalar(4)};
  UniformBijection<Scalar> tau{Scalar(5), Scalar(30)};
  Scalar sigma2 = 1;
  Scalar mean = 0;

  MaternSpec<Scalar> decode(Scalar alpha_raw, Scalar tau_raw) const {
    return {alpha.to_hyper(alpha_raw), tau.to_hyper(tau_raw), sigma2, mean};
  }
};

/// T(xi, theta) for scalar hyperparameters: mean + C_{alpha,tau}^{1/2} xi.
template <typename Scalar>
Field<Scalar> noncentered_transform(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& xi,
                                    Scalar alpha_raw, Scalar tau_raw,
                                    const ScalarHyperPrior<Scalar>& prior,
                                    const SpectralBasis<Scalar>& basis) {
  return apply_sqrt_cov(prior.decode(alpha_raw, tau_raw), basis, xi);
}

/// Prior on a function-valued hyperparameter v with ell = g(v):
/// either a Gaussian (Matern) field or a Cauchy process, each generated
/// deterministically from its own standard normal latent vector.
template <typename Scalar = double>
struct FieldHyperPrior {
  enum class Kind { gauss, cauchy };
  Kind kind = Kind::gauss;
  int alpha = 2;  // exponent of the nonstationary operator; even
  MaternSpec<Scalar> v_spec{Scalar(2), Scalar(1), Scalar(1), Scalar(0)};
  Scalar cauchy_delta = Scalar(0.1);
  bool cauchy_interpolate = false;
  GMap<Scalar> g;

  /// Number of latent coordinates used to generate v.
  int latent_size(const SpectralBasis<Scalar>& v_basis) const {
    if (kind == Kind::gauss) return v_basis.size();
    return CauchyProcess<Scalar>(v_basis.domain(), cauchy_delta).n_increments();
  }

  Field<Scalar> decode_v(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& latent,
                         const SpectralBasis<Scalar>& v_basis) const {
    if (kind == Kind::gauss) return apply_sqrt_cov(v_spec, v_basis, latent);
    CauchyProcess<Scalar> p(v_basis.domain(), cauchy_delta, cauchy_interpolate);
    return p.path(p.increments_from_latent(latent));
  }
};

/// T(xi, v-latent) for a function-valued length scale: decode v, form
/// ell = g(v), then solve the nonstationary operator equation driven by xi.
/// Both bases live on the same grid; `v_basis` may use physical or normalized
/// coordinates independently of `u_basis`.
template <typename Scalar>
Field<Scalar> noncentered_field_transform(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& xi,
                                          const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& v_latent,
                                          const FieldHyperPrior<Scalar>& prior,
                                          const SpectralBasis<Scalar>& u_basis,
                                          const SpectralBasis<Scalar>& v_basis,
                                          Field<Scalar>* v_out = nullptr,
                                          Field<Scalar>* ell_out = nullptr) {
  Field<Scalar> v = prior.decode_v(v_latent, v_basis);
  Field<Scalar> ell = g_map(prior.g, Field<Scalar>(u_basis.domain(), v.values));
  Field<Scalar> u = solve_nonstationary(prior.alpha, ell, u_basis, xi);
  if (v_out) *v_out = std::move(v);
  if (ell_out) *ell_out = std::move(ell);
  return u;
}

}  // namespace hieki
