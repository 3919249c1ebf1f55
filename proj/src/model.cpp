#include "hieki/model.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace hieki {

Decoded finish_decode(Field<double> u, CoefficientKind kind, const LevelSetSpec<double>& ls) {
  Decoded d;
  switch (kind) {
    case CoefficientKind::identity:
      d.coefficient = u;
      d.unknown = u;
      break;
    case CoefficientKind::exp:
      d.coefficient = exp_map(u);
      d.unknown = u;
      break;
    case CoefficientKind::level_set:
      d.coefficient = level_set_map(u, ls);
      d.unknown = d.coefficient;
      break;
  }
  d.field = std::move(u);
  return d;
}

namespace {

Field<double> on_domain(const Domain& d, Field<double> f) {
  return Field<double>(d, std::move(f.values));
}

Vector<double> standard_normals(int n, Rng& rng) {
  Vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = standard_normal<double>(rng);
  return z;
}

}  // namespace

std::vector<Decoded> Parameterization::decode_ensemble(const Matrix<double>& members) const {
  std::vector<Decoded> out;
  out.reserve(static_cast<std::size_t>(members.cols()));
  for (Eigen::Index j = 0; j < members.cols(); ++j) out.push_back(decode(members.col(j)));
  return out;
}

// ---------------------------------------------------------------------------

ScalarFieldParameterization::ScalarFieldParameterization(Domain physical,
                                                         SpectralBasis<double> basis, Hierarchy h,
                                                         ScalarHyperPrior<double> hyper,
                                                         FixedFieldPrior fixed,
                                                         CoefficientKind coefficient,
                                                         LevelSetSpec<double> level_set)
    : physical_(physical),
      basis_(std::move(basis)),
      hierarchy_(h),
      hyper_(hyper),
      fixed_(fixed),
      coefficient_(coefficient),
      level_set_(level_set) {
  if (basis_.domain().n_cells != physical_.n_cells || basis_.domain().dim != physical_.dim)
    throw std::invalid_argument("prior basis and physical grid differ in resolution");
  switch (hierarchy_) {
    case Hierarchy::none:
      layout_.add("u", physical_.size());
      break;
    case Hierarchy::centered:
      layout_.add("u", physical_.size()).add("alpha", 1).add("tau", 1);
      break;
    case Hierarchy::noncentered:
      layout_.add("xi", basis_.size()).add("alpha", 1).add("tau", 1);
      break;
  }
  if (coefficient_ == CoefficientKind::level_set) level_set_.validate();
  if (hierarchy_ == Hierarchy::none && fixed_.kind == FixedFieldPrior::Kind::matern)
    fixed_.matern.validate(physical_.dim);
}

Field<double> ScalarFieldParameterization::sample_fixed(Rng& rng) const {
  if (fixed_.kind == FixedFieldPrior::Kind::matern)
    return on_domain(physical_, sample_matern(fixed_.matern, basis_, rng));
  const Field<double> ell = Field<double>::constant(basis_.domain(), fixed_.length_scale);
  Field<double> u = sample_nonstationary(fixed_.alpha, ell, basis_, rng);
  u.values.array() += fixed_.matern.mean;
  return on_domain(physical_, std::move(u));
}

Vector<double> ScalarFieldParameterization::sample_prior(Rng& rng) const {
  Vector<double> x(layout_.total());
  switch (hierarchy_) {
    case Hierarchy::none:
      x = sample_fixed(rng).values;
      break;
    case Hierarchy::centered: {
      const double a = standard_normal<double>(rng);
      const double t = standard_normal<double>(rng);
      x.head(physical_.size()) = sample_matern(hyper_.decode(a, t), basis_, rng).values;
      x[layout_.find("alpha").offset] = a;
      x[layout_.find("tau").offset] = t;
      break;
    }
    case Hierarchy::noncentered: {
      const double a = standard_normal<double>(rng);
      const double t = standard_normal<double>(rng);
      x.head(basis_.size()) = white_noise(basis_, rng);
      x[layout_.find("alpha").offset] = a;
      x[layout_.find("tau").offset] = t;
      break;
    }
  }
  return x;
}

Decoded ScalarFieldParameterization::decode(const Eigen::Ref<const Vector<double>>& latent) const {
  if (latent.size() != layout_.total())
    throw std::invalid_argument("latent vector does not match layout");
  Field<double> u;
  std::vector<std::pair<std::string, double>> hypers;
  if (hierarchy_ == Hierarchy::none) {
    u = Field<double>(physical_, latent);
  } else {
    const double a = latent[layout_.find("alpha").offset];
    const double t = latent[layout_.find("tau").offset];
    const MaternSpec<double> spec = hyper_.decode(a, t);
    hypers = {{"alpha", spec.alpha}, {"tau", spec.tau}};
    if (hierarchy_ == Hierarchy::centered)
      u = Field<double>(physical_, latent.head(physical_.size()));
    else
      u = on_domain(physical_, apply_sqrt_cov(spec, basis_, latent.head(basis_.size())));
  }
  Decoded d = finish_decode(std::move(u), coefficient_, level_set_);
  d.hypers = std::move(hypers);
  return d;
}

std::vector<Decoded> ScalarFieldParameterization::decode_ensemble(
    const Matrix<double>& members) const {
  if (hierarchy_ != Hierarchy::noncentered) return Parameterization::decode_ensemble(members);
  if (members.rows() != layout_.total())
    throw std::invalid_argument("latent vectors do not match layout");
  const int j = static_cast<int>(members.cols());
  const int ia = layout_.find("alpha").offset;
  const int it = layout_.find("tau").offset;
  Matrix<double> coeffs(basis_.size(), j);
  std::vector<MaternSpec<double>> specs;
  for (int m = 0; m < j; ++m) {
    specs.push_back(hyper_.decode(members(ia, m), members(it, m)));
    coeffs.col(m) =
        matern_mode_scales(specs.back(), basis_).cwiseProduct(members.col(m).head(basis_.size()));
  }
  Matrix<double> grid = basis_.synthesize_columns(coeffs);
  std::vector<Decoded> out;
  out.reserve(static_cast<std::size_t>(j));
  for (int m = 0; m < j; ++m) {
    Vector<double> v = grid.col(m);
    v.array() += specs[m].mean;
    Decoded d = finish_decode(Field<double>(physical_, std::move(v)), coefficient_, level_set_);
    d.hypers = {{"alpha", specs[m].alpha}, {"tau", specs[m].tau}};
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::string> ScalarFieldParameterization::hyper_names() const {
  if (hierarchy_ == Hierarchy::none) return {};
  return {"alpha", "tau"};
}

// ---------------------------------------------------------------------------

FieldHyperParameterization::FieldHyperParameterization(Domain physical,
                                                       SpectralBasis<double> u_basis,
                                                       SpectralBasis<double> v_basis,
                                                       FieldHyperPrior<double> prior,
                                                       CoefficientKind coefficient,
                                                       LevelSetSpec<double> level_set)
    : physical_(physical),
      u_basis_(std::move(u_basis)),
      v_basis_(std::move(v_basis)),
      prior_(prior),
      coefficient_(coefficient),
      level_set_(level_set) {
  if (u_basis_.domain().n_cells != physical_.n_cells ||
      v_basis_.domain().n_cells != physical_.n_cells)
    throw std::invalid_argument("hyperprior bases must share the physical grid");
  if (prior_.alpha <= 0 || prior_.alpha % 2 != 0)
    throw std::invalid_argument("nonstationary exponent alpha must be even and positive");
  prior_.g.validate();
  if (prior_.kind == FieldHyperPrior<double>::Kind::gauss)
    prior_.v_spec.validate(physical_.dim);
  layout_.add("xi", u_basis_.size()).add("v", prior_.latent_size(v_basis_));
}

Vector<double> FieldHyperParameterization::sample_prior(Rng& rng) const {
  Vector<double> x(layout_.total());
  x.head(u_basis_.size()) = white_noise(u_basis_, rng);
  const auto& vb = layout_.find("v");
  x.segment(vb.offset, vb.size) = standard_normals(vb.size, rng);
  return x;
}

std::pair<Field<double>, Field<double>> FieldHyperParameterization::length_scale(
    const Eigen::Ref<const Vector<double>>& latent) const {
  const auto& vb = layout_.find("v");
  Field<double> v = prior_.decode_v(latent.segment(vb.offset, vb.size), v_basis_);
  Field<double> ell = g_map(prior_.g, Field<double>(u_basis_.domain(), v.values));
  return {on_domain(physical_, std::move(v)), on_domain(physical_, std::move(ell))};
}

Decoded FieldHyperParameterization::decode(const Eigen::Ref<const Vector<double>>& latent) const {
  if (latent.size() != layout_.total())
    throw std::invalid_argument("latent vector does not match layout");
  const auto& vb = layout_.find("v");
  Field<double> ell;
  Field<double> u = noncentered_field_transform<double>(
      latent.head(u_basis_.size()), latent.segment(vb.offset, vb.size), prior_, u_basis_,
      v_basis_, nullptr, &ell);
  Decoded d = finish_decode(on_domain(physical_, std::move(u)), coefficient_, level_set_);
  d.length_scale = on_domain(physical_, std::move(ell));
  return d;
}

std::vector<Decoded> FieldHyperParameterization::decode_ensemble(
    const Matrix<double>& members) const {
  if (members.rows() != layout_.total())
    throw std::invalid_argument("latent vectors do not match layout");
  const int j = static_cast<int>(members.cols());
  const auto& vb = layout_.find("v");
  const Matrix<double> noise = u_basis_.synthesize_columns(members.topRows(u_basis_.size()));
  Matrix<double> vs;
  if (prior_.kind == FieldHyperPrior<double>::Kind::gauss) {
    const Vector<double> scales = matern_mode_scales(prior_.v_spec, v_basis_);
    vs = v_basis_.synthesize_columns(scales.asDiagonal() * members.middleRows(vb.offset, vb.size));
    vs.array() += prior_.v_spec.mean;
  } else {
    vs.resize(physical_.size(), j);
    for (int m = 0; m < j; ++m)
      vs.col(m) = prior_.decode_v(members.col(m).segment(vb.offset, vb.size), v_basis_).values;
  }
  std::vector<Decoded> out;
  out.reserve(static_cast<std::size_t>(j));
  for (int m = 0; m < j; ++m) {
    Field<double> ell = g_map(prior_.g, Field<double>(u_basis_.domain(), vs.col(m)));
    Field<double> u = solve_nonstationary_grid<double>(prior_.alpha, ell, noise.col(m));
    Decoded d = finish_decode(on_domain(physical_, std::move(u)), coefficient_, level_set_);
    d.length_scale = on_domain(physical_, std::move(ell));
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
const char* kGeometryNames[5] = {"d1", "d2", "d3", "d4", "d5"};
}

ChannelParameterization::ChannelParameterization(Domain physical, SpectralBasis<double> basis,
                                                 Hierarchy h, ChannelPrior prior)
    : physical_(physical), basis_(std::move(basis)), hierarchy_(h), prior_(prior) {
  if (physical_.dim != 2) throw std::invalid_argument("channel parameterization needs 2D");
  for (const char* n : kGeometryNames) layout_.add(n, 1);
  const int field_size = hierarchy_ == Hierarchy::noncentered ? basis_.size() : physical_.size();
  layout_.add("field1", field_size).add("field2", field_size);
  if (hierarchy_ != Hierarchy::none)
    layout_.add("alpha1", 1).add("tau1", 1).add("alpha2", 1).add("tau2", 1);
}

ChannelGeometry<double> ChannelParameterization::geometry(
    const Eigen::Ref<const Vector<double>>& latent) const {
  std::array<double, 5> d{};
  for (int k = 0; k < 5; ++k)
    d[k] = prior_.geometry[k].to_hyper(latent[layout_.find(kGeometryNames[k]).offset]);
  return {d[0], d[1], d[2], d[3], d[4]};
}

Vector<double> ChannelParameterization::sample_prior(Rng& rng) const {
  Vector<double> x(layout_.total());
  for (const char* n : kGeometryNames) x[layout_.find(n).offset] = standard_normal<double>(rng);
  for (int f = 0; f < 2; ++f) {
    const auto& prior = prior_.fields[f];
    const std::string sfx = std::to_string(f + 1);
    const auto& fb = layout_.find("field" + sfx);
    if (hierarchy_ == Hierarchy::none) {
      const MaternSpec<double> spec{prior.alpha.midpoint(), prior.tau.midpoint(), prior.sigma2,
                                    prior.mean};
      x.segment(fb.offset, fb.size) = sample_matern(spec, basis_, rng).values;
      continue;
    }
    const double a = standard_normal<double>(rng);
    const double t = standard_normal<double>(rng);
    x[layout_.find("alpha" + sfx).offset] = a;
    x[layout_.find("tau" + sfx).offset] = t;
    if (hierarchy_ == Hierarchy::centered)
      x.segment(fb.offset, fb.size) = sample_matern(prior.decode(a, t), basis_, rng).values;
    else
      x.segment(fb.offset, fb.size) = white_noise(basis_, rng);
  }
  return x;
}

Decoded ChannelParameterization::decode(const Eigen::Ref<const Vector<double>>& latent) const {
  if (latent.size() != layout_.total())
    throw std::invalid_argument("latent vector does not match layout");
  std::array<Field<double>, 2> logk;
  std::vector<std::pair<std::string, double>> hypers;
  for (int f = 0; f < 2; ++f) {
    const std::string sfx = std::to_string(f + 1);
    const auto& fb = layout_.find("field" + sfx);
    const auto seg = latent.segment(fb.offset, fb.size);
    if (hierarchy_ == Hierarchy::none) {
      logk[f] = Field<double>(physical_, seg);
      continue;
    }
    const MaternSpec<double> spec =
        prior_.fields[f].decode(latent[layout_.find("alpha" + sfx).offset],
                                latent[layout_.find("tau" + sfx).offset]);
    hypers.emplace_back("alpha" + sfx, spec.alpha);
    hypers.emplace_back("tau" + sfx, spec.tau);
    if (hierarchy_ == Hierarchy::centered)
      logk[f] = Field<double>(physical_, seg);
    else
      logk[f] = on_domain(physical_, apply_sqrt_cov(spec, basis_, seg));
  }
  ChannelSpec<double> spec{geometry(latent), logk[1], logk[0]};
  Field<double> u = channel_map(spec, physical_);
  Decoded d = finish_decode(std::move(u), CoefficientKind::exp, LevelSetSpec<double>{});
  const auto g = spec.geometry;
  hypers.insert(hypers.begin(), {{"d1", g.amplitude}, {"d2", g.frequency}, {"d3", g.angle},
                                 {"d4", g.offset}, {"d5", g.width}});
  d.hypers = std::move(hypers);
  return d;
}

std::vector<std::string> ChannelParameterization::hyper_names() const {
  std::vector<std::string> n{"d1", "d2", "d3", "d4", "d5"};
  if (hierarchy_ != Hierarchy::none)
    n.insert(n.end(), {"alpha1", "tau1", "alpha2", "tau2"});
  return n;
}

// ---------------------------------------------------------------------------

PdeObserver PdeObserver::darcy(DarcyProblem problem, SparseMatrix<double> functionals) {
  PdeObserver o;
  o.darcy_ = std::make_shared<const DarcySolver>(std::move(problem));
  if (functionals.cols() != o.darcy_->problem().domain.size())
    throw std::invalid_argument("functionals do not match Darcy grid");
  o.functionals_ = std::move(functionals);
  return o;
}

PdeObserver PdeObserver::source1d(const Domain& domain, SparseMatrix<double> functionals) {
  PdeObserver o;
  o.source_ = std::make_shared<const SourceSolver1D>(domain);
  if (functionals.cols() != domain.size())
    throw std::invalid_argument("functionals do not match source grid");
  o.functionals_ = std::move(functionals);
  o.response_ = o.source_->response_matrix(o.functionals_);
  return o;
}

Field<double> PdeObserver::state(const Field<double>& coefficient) const {
  if (darcy_) return darcy_->solve(coefficient).interior;
  return source_->solve(coefficient);
}

Vector<double> PdeObserver::operator()(const Field<double>& coefficient) const {
  if (response_) {
    if (coefficient.values.size() != response_->cols())
      throw std::invalid_argument("source field does not match response matrix");
    return *response_ * coefficient.values;
  }
  return functionals_ * state(coefficient).values;
}

// ---------------------------------------------------------------------------

Matrix<double> ForwardModel::evaluate_ensemble(const Matrix<double>& states) const {
  return evaluate_decoded(param_->decode_ensemble(states));
}

Matrix<double> ForwardModel::evaluate_decoded(const std::vector<Decoded>& decoded) const {
  const int j = static_cast<int>(decoded.size());
  Matrix<double> out(n_obs(), j);
  const int workers = std::min(threads_, j);
  if (workers <= 1) {
    for (int m = 0; m < j; ++m) out.col(m) = pde_(decoded[m].coefficient);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (int m = next++; m < j; m = next++) {
        try {
          out.col(m) = pde_(decoded[m].coefficient);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

ObservationModel synthesize_data(const PdeObserver& pde, const Field<double>& truth_coefficient,
                                 const Matrix<double>& gamma, std::uint64_t noise_seed,
                                 bool noise_free, bool expected_noise_level) {
  ObservationModel m;
  m.functionals = pde.functionals();
  m.gamma = gamma;
  m.validate();
  const Vector<double> clean = pde(truth_coefficient);
  m.y = clean;
  if (!noise_free) {
    Rng rng = make_stream(noise_seed, {0x6E6F697365ULL});
    Vector<double> z(clean.size());
    for (int k = 0; k < z.size(); ++k) z[k] = standard_normal<double>(rng);
    const Eigen::LLT<Matrix<double>> llt(gamma);
    m.y += llt.matrixL() * z;
    m.noise_level = expected_noise_level ? std::sqrt(double(clean.size())) : z.norm();
  } else {
    m.noise_level = expected_noise_level ? std::sqrt(double(clean.size())) : 0.0;
  }
  return m;
}

}  // namespace hieki
