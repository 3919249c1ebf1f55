#include <doctest.h>

#include <cmath>
#include <set>

#include "hieki/param_maps.hpp"

using namespace hieki;

TEST_CASE("level set map takes two values and ignores positive rescaling") {
  const Domain d = build_domain(6.0, 6.0, 20, 20);
  const auto basis = dirichlet_spectrum<double>(d);
  Rng rng = make_stream(1, {});
  const LevelSetSpec<double> ls{1.0, 10.0, 0.0};
  for (int k = 0; k < 10; ++k) {
    const Field<double> u = sample_matern(MaternSpec<double>{2.0, 5.0, 1.0, 0.0}, basis, rng);
    const Field<double> kappa = level_set_map(u, ls);
    std::set<double> vals(kappa.values.data(), kappa.values.data() + kappa.size());
    CHECK(vals.size() <= 2);
    for (double v : vals) CHECK((v == 1.0 || v == 10.0));
    for (double c : {0.01, 3.0, 1e4}) {
      const Field<double> scaled(d, c * u.values);
      CHECK(level_set_map(scaled, ls).values == kappa.values);
    }
    // kappa_plus exactly where u > 0.
    for (int i = 0; i < d.size(); ++i) CHECK((kappa.values[i] == 10.0) == (u.values[i] > 0.0));
  }
}

TEST_CASE("level set map is idempotent once values straddle the threshold") {
  const Domain d = build_domain(1.0, 50);
  const LevelSetSpec<double> ls{1.0, 5.0, 3.0};
  const Field<double> u = Field<double>::from_function(d, [](double x) { return std::sin(9 * x); });
  const Field<double> once = level_set_map(u, LevelSetSpec<double>{1.0, 5.0, 0.0});
  CHECK(level_set_map(once, ls).values == once.values);
  CHECK_THROWS(level_set_map(u, LevelSetSpec<double>{2.0, 2.0, 0.0}));
  CHECK_THROWS(level_set_map(u, LevelSetSpec<double>{0.0, 2.0, 0.0}));
}

TEST_CASE("exp map guards against overflow") {
  const Domain d = build_domain(1.0, 4);
  CHECK(exp_map(Field<double>::constant(d, 0.0)).values.isOnes());
  CHECK_THROWS(exp_map(Field<double>::constant(d, 800.0)));
}

TEST_CASE("straight horizontal channel is a band around the offset") {
  const Domain d = build_domain(6.0, 6.0, 30, 30);
  ChannelGeometry<double> g;
  g.amplitude = 0.0;
  g.frequency = 5.0;
  g.angle = 0.0;
  g.offset = 0.5;
  g.width = 0.1;
  const Vector<double> chi = channel_indicator(g, d);
  for (int j = 0; j < d.interior(1); ++j)
    for (int i = 0; i < d.interior(0); ++i) {
      const double t = d.coordinate(1, j) / 6.0;
      CHECK(chi[d.index(i, j)] == (std::abs(t - 0.5) < 0.1 ? 1.0 : 0.0));
    }
}

TEST_CASE("channel centerline formula") {
  ChannelGeometry<double> g{0.2, 6.0, 0.5, 0.3, 0.15};
  for (double s : {0.0, 0.25, 0.9})
    CHECK(g.centerline(s) == doctest::Approx(0.3 + s * std::tan(0.5) + 0.2 * std::sin(6.0 * s)));
  CHECK(g.inside(0.0, 0.3));
  CHECK_FALSE(g.inside(0.0, 0.46));
}

TEST_CASE("channel map selects inside and outside fields") {
  const Domain d = build_domain(6.0, 6.0, 24, 24);
  ChannelSpec<double> spec{ChannelGeometry<double>{0.2, 6.0, 0.5, 0.3, 0.15},
                           Field<double>::constant(d, 4.0), Field<double>::constant(d, 1.0)};
  const Field<double> logk = channel_map(spec, d);
  const Vector<double> chi = channel_indicator(spec.geometry, d);
  CHECK(chi.sum() > 0);
  CHECK(chi.sum() < d.size());
  for (int i = 0; i < d.size(); ++i) CHECK(logk.values[i] == (chi[i] > 0 ? 4.0 : 1.0));
  CHECK_THROWS(channel_map(spec, build_domain(6.0, 6.0, 12, 12)));
}

TEST_CASE("non-centered transform equals the Matern square root at the decoded hypers") {
  const Domain d = build_domain(1.0, 1.0, 16, 16);
  const auto basis = dirichlet_spectrum<double>(d);
  const ScalarHyperPrior<double> prior;
  Rng rng = make_stream(21, {});
  const Vector<double> xi = white_noise(basis, rng);
  for (auto [a, t] : {std::pair{-1.0, 0.5}, std::pair{0.3, -2.0}}) {
    const Field<double> u = noncentered_transform(xi, a, t, prior, basis);
    const MaternSpec<double> s = prior.decode(a, t);
    CHECK(s.alpha > 1.3);
    CHECK(s.alpha < 4.0);
    CHECK((u.values - apply_sqrt_cov(s, basis, xi).values).norm() == 0.0);
  }
  // Different hypers move u off the fixed-hyper draw.
  CHECK((noncentered_transform(xi, 0.0, 0.0, prior, basis).values -
         noncentered_transform(xi, 1.0, 0.0, prior, basis).values).norm() > 0.0);
}

TEST_CASE("field-valued transform exposes v and ell") {
  const Domain d = build_domain(10.0, 100);
  const auto basis = dirichlet_spectrum<double>(d);
  FieldHyperPrior<double> prior;
  prior.v_spec = {2.0, 2.0, 0.5, -0.7};
  Rng rng = make_stream(4, {});
  const Vector<double> xi = white_noise(basis, rng);
  const Vector<double> zv = white_noise(basis, rng);
  Field<double> v, ell;
  const Field<double> u = noncentered_field_transform(xi, zv, prior, basis, basis, &v, &ell);
  CHECK(u.size() == d.size());
  for (int i = 0; i < d.size(); ++i) CHECK(ell.values[i] == doctest::Approx(std::exp(v.values[i])));

  prior.kind = FieldHyperPrior<double>::Kind::cauchy;
  prior.g.kind = GMap<double>::Kind::rational;
  prior.g.ceiling = 10.0;
  const Vector<double> zc = Vector<double>::Constant(prior.latent_size(basis), 0.3);
  noncentered_field_transform(xi, zc, prior, basis, basis, &v, &ell);
  // v starts from 0 at x = 0, so the first node sits within one increment of it.
  CHECK(std::abs(v.values[0]) <= std::abs(v.values[9]));
  CHECK(ell.values[0] == 10.0);
  CHECK(v.values[d.size() - 1] > v.values[10]);
}
