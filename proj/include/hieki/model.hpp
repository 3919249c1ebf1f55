#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hieki/eki.hpp"
#include "hieki/forward.hpp"
#include "hieki/param_maps.hpp"
#include "hieki/priors.hpp"

namespace hieki {

enum class Hierarchy { none, centered, noncentered };
enum class CoefficientKind { identity, exp, level_set };

/// A latent vector decoded into the fields the rest of the pipeline needs.
struct Decoded {
  Field<double> field;        // u (Gaussian field, level set function, source)
  Field<double> coefficient;  // what the PDE consumes (kappa, or u itself)
  Field<double> unknown;      // the quantity compared against the truth
  std::vector<std::pair<std::string, double>> hypers;
  std::optional<Field<double>> length_scale;  // function-valued hyperparameter only
};

/// Latent layout, prior sampler and decoder for one parameterization.
class Parameterization {
 public:
  virtual ~Parameterization() = default;
  virtual const Layout& layout() const = 0;
  virtual Vector<double> sample_prior(Rng& rng) const = 0;
  virtual Decoded decode(const Eigen::Ref<const Vector<double>>& latent) const = 0;
  /// Decodes every column; overridden where batching the synthesis pays off.
  virtual std::vector<Decoded> decode_ensemble(const Matrix<double>& members) const;
  virtual std::vector<std::string> hyper_names() const { return {}; }
  /// Grid on which decoded fields live.
  virtual const Domain& domain() const = 0;
};

/// Applies the coefficient map to u. `unknown` is u for identity/exp maps
/// and the piecewise-constant kappa for the level set map.
Decoded finish_decode(Field<double> u, CoefficientKind kind, const LevelSetSpec<double>& ls);

/// How the non-hierarchical prior draws u.
struct FixedFieldPrior {
  enum class Kind { matern, nonstationary };
  Kind kind = Kind::matern;
  MaternSpec<double> matern{2.65, 17.5, 1.0, 0.0};
  int alpha = 2;              // nonstationary exponent
  double length_scale = 1.0;  // constant ell for the nonstationary form
};

/// Gaussian field unknown with scalar Matern hyperparameters (alpha, tau):
/// none -> latent u with fixed prior; centered -> (u, alpha, tau);
/// noncentered -> (xi, alpha, tau) with u = mean + C^{1/2} xi.
class ScalarFieldParameterization final : public Parameterization {
 public:
  ScalarFieldParameterization(Domain physical, SpectralBasis<double> basis, Hierarchy h,
                              ScalarHyperPrior<double> hyper, FixedFieldPrior fixed,
                              CoefficientKind coefficient, LevelSetSpec<double> level_set);

  const Layout& layout() const override { return layout_; }
  Vector<double> sample_prior(Rng& rng) const override;
  Decoded decode(const Eigen::Ref<const Vector<double>>& latent) const override;
  std::vector<Decoded> decode_ensemble(const Matrix<double>& members) const override;
  std::vector<std::string> hyper_names() const override;
  const Domain& domain() const override { return physical_; }

  Hierarchy hierarchy() const { return hierarchy_; }
  const SpectralBasis<double>& basis() const { return basis_; }
  const ScalarHyperPrior<double>& hyper_prior() const { return hyper_; }

 private:
  Field<double> sample_fixed(Rng& rng) const;

  Domain physical_;
  SpectralBasis<double> basis_;
  Hierarchy hierarchy_;
  ScalarHyperPrior<double> hyper_;
  FixedFieldPrior fixed_;
  CoefficientKind coefficient_;
  LevelSetSpec<double> level_set_;
  Layout layout_;
};

/// Non-centered function-valued hyperparameter: latent (xi, v-latent),
/// u solves the nonstationary operator equation with ell = g(v).
class FieldHyperParameterization final : public Parameterization {
 public:
  FieldHyperParameterization(Domain physical, SpectralBasis<double> u_basis,
                             SpectralBasis<double> v_basis, FieldHyperPrior<double> prior,
                             CoefficientKind coefficient, LevelSetSpec<double> level_set);

  const Layout& layout() const override { return layout_; }
  Vector<double> sample_prior(Rng& rng) const override;
  Decoded decode(const Eigen::Ref<const Vector<double>>& latent) const override;
  std::vector<Decoded> decode_ensemble(const Matrix<double>& members) const override;
  const Domain& domain() const override { return physical_; }

  /// v and ell = g(v) for a latent vector.
  std::pair<Field<double>, Field<double>> length_scale(
      const Eigen::Ref<const Vector<double>>& latent) const;

  const FieldHyperPrior<double>& prior() const { return prior_; }

 private:
  Domain physical_;
  SpectralBasis<double> u_basis_;
  SpectralBasis<double> v_basis_;
  FieldHyperPrior<double> prior_;
  CoefficientKind coefficient_;
  LevelSetSpec<double> level_set_;
  Layout layout_;
};

struct ChannelPrior {
  std::array<UniformBijection<double>, 5> geometry{
      UniformBijection<double>{0.0, 1.0}, UniformBijection<double>{2.0, 13.0},
      UniformBijection<double>{0.4, 1.0}, UniformBijection<double>{0.0, 1.0},
      UniformBijection<double>{0.1, 0.3}};
  /// Outside (kappa_1) and inside (kappa_2) log-permeability priors.
  std::array<ScalarHyperPrior<double>, 2> fields{
      ScalarHyperPrior<double>{{1.3, 3.0}, {8.0, 30.0}, 1.0, 1.0},
      ScalarHyperPrior<double>{{1.3, 3.0}, {8.0, 30.0}, 1.0, 4.0}};
};

/// Channelised log-permeability: five geometric scalars plus two Gaussian
/// fields, each with its own (alpha, tau) at the chosen hierarchy level.
class ChannelParameterization final : public Parameterization {
 public:
  ChannelParameterization(Domain physical, SpectralBasis<double> basis, Hierarchy h,
                          ChannelPrior prior);

  const Layout& layout() const override { return layout_; }
  Vector<double> sample_prior(Rng& rng) const override;
  Decoded decode(const Eigen::Ref<const Vector<double>>& latent) const override;
  std::vector<std::string> hyper_names() const override;
  const Domain& domain() const override { return physical_; }

  ChannelGeometry<double> geometry(const Eigen::Ref<const Vector<double>>& latent) const;

 private:
  Domain physical_;
  SpectralBasis<double> basis_;
  Hierarchy hierarchy_;
  ChannelPrior prior_;
  Layout layout_;
};

/// PDE + observation functionals: coefficient field -> predicted data.
class PdeObserver {
 public:
  static PdeObserver darcy(DarcyProblem problem, SparseMatrix<double> functionals);
  static PdeObserver source1d(const Domain& domain, SparseMatrix<double> functionals);

  Vector<double> operator()(const Field<double>& coefficient) const;
  /// Full PDE state for a coefficient (pressure on interior nodes).
  Field<double> state(const Field<double>& coefficient) const;
  const SparseMatrix<double>& functionals() const { return functionals_; }
  bool is_linear() const { return response_.has_value(); }
  const Matrix<double>& response() const { return *response_; }

 private:
  PdeObserver() = default;
  std::shared_ptr<const DarcySolver> darcy_;
  std::shared_ptr<const SourceSolver1D> source_;
  SparseMatrix<double> functionals_;
  std::optional<Matrix<double>> response_;
};

/// The composite forward map latent -> data (parameterization, PDE solve,
/// observation), evaluated member-wise, optionally on several threads.
class ForwardModel {
 public:
  ForwardModel(std::shared_ptr<const Parameterization> param, PdeObserver pde, int threads = 1)
      : param_(std::move(param)), pde_(std::move(pde)), threads_(std::max(1, threads)) {}

  const Parameterization& parameterization() const { return *param_; }
  const PdeObserver& pde() const { return pde_; }
  int n_obs() const { return static_cast<int>(pde_.functionals().rows()); }

  Vector<double> evaluate(const Eigen::Ref<const Vector<double>>& latent) const {
    return pde_(param_->decode(latent).coefficient);
  }
  Matrix<double> evaluate_ensemble(const Matrix<double>& states) const;
  /// PDE solves and observation for already decoded members.
  Matrix<double> evaluate_decoded(const std::vector<Decoded>& decoded) const;

  ForwardMap<double> as_map() const {
    return [this](const Matrix<double>& s) { return evaluate_ensemble(s); };
  }

 private:
  std::shared_ptr<const Parameterization> param_;
  PdeObserver pde_;
  int threads_;
};

/// y = G(truth) + eta, eta ~ N(0, Gamma) from `noise_seed`. The realized
/// whitened noise norm is stored as the noise level (or sqrt(dim y) when
/// `expected_noise_level` is set). `noise_free` skips the draw.
ObservationModel synthesize_data(const PdeObserver& pde, const Field<double>& truth_coefficient,
                                 const Matrix<double>& gamma, std::uint64_t noise_seed,
                                 bool noise_free = false, bool expected_noise_level = false);

}  // namespace hieki
