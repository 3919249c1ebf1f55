#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hieki/grid.hpp"
#include "hieki/random.hpp"

namespace hieki {

/// Named contiguous slices of a packed state vector.
class Layout {
 public:
  struct Block {
    std::string name;
    int offset = 0;
    int size = 0;
  };

  Layout() = default;
  Layout& add(std::string name, int size) {
    if (size <= 0) throw std::invalid_argument("layout block '" + name + "' must be non-empty");
    if (contains(name)) throw std::invalid_argument("duplicate layout block '" + name + "'");
    blocks_.push_back({std::move(name), total_, size});
    total_ += size;
    return *this;
  }

  int total() const { return total_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  bool contains(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return true;
    return false;
  }
  const Block& find(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw std::out_of_range("no layout block named '" + name + "'");
  }

 private:
  std::vector<Block> blocks_;
  int total_ = 0;
};

/// J particles stored column-wise, all sharing one layout.
template <typename Scalar = double>
struct Ensemble {
  Matrix<Scalar> members;
  Layout layout;

  Ensemble() = default;
  Ensemble(Matrix<Scalar> m, Layout l) : members(std::move(m)), layout(std::move(l)) {
    if (members.cols() < 2) throw std::invalid_argument("ensemble needs at least two members");
    if (members.rows() != layout.total())
      throw std::invalid_argument("ensemble rows do not match layout");
    if (!members.allFinite()) throw std::invalid_argument("ensemble contains non-finite entries");
  }

  int size() const { return static_cast<int>(members.cols()); }
  Vector<Scalar> mean() const { return members.rowwise().mean(); }
  auto block(const std::string& name) const {
    const auto& b = layout.find(name);
    return members.middleRows(b.offset, b.size);
  }
};

enum class UpsilonMode { shared, per_member };

struct EkiControls {
  double rho = 0.8;
  double zeta = 0.0;  // <= 0 selects 1.1 / rho
  double upsilon0 = 1.0;
  int max_iterations = 30;
  int max_doublings = 60;
  bool perturb_observations = true;
  UpsilonMode upsilon_mode = UpsilonMode::shared;

  double resolved_zeta() const { return zeta > 0.0 ? zeta : 1.1 / rho; }

  void validate() const {
    if (!(rho > 0.0 && rho < 1.0))
      throw std::invalid_argument("rho must lie in (0,1), got " + std::to_string(rho));
    if (!(resolved_zeta() * rho > 1.0))
      throw std::invalid_argument("zeta must exceed 1/rho");
    if (!(upsilon0 > 0.0)) throw std::invalid_argument("upsilon0 must be positive");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
    if (max_doublings < 0) throw std::invalid_argument("max_doublings must be non-negative");
  }
};

/// Data, noise covariance and its Cholesky factor Gamma = L L^T.
template <typename Scalar = double>
class Observations {
 public:
  Observations(Vector<Scalar> y, Matrix<Scalar> gamma, Scalar noise_level)
      : y_(std::move(y)), gamma_(std::move(gamma)), noise_level_(noise_level), chol_(gamma_) {
    if (gamma_.rows() != y_.size() || gamma_.cols() != y_.size())
      throw std::invalid_argument("noise covariance shape does not match data");
    if (chol_.info() != Eigen::Success)
      throw std::invalid_argument("noise covariance must be positive definite");
  }

  const Vector<Scalar>& y() const { return y_; }
  const Matrix<Scalar>& gamma() const { return gamma_; }
  Scalar noise_level() const { return noise_level_; }
  int size() const { return static_cast<int>(y_.size()); }

  /// ||Gamma^{-1/2} r||.
  Scalar whitened_norm(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& r) const {
    return chol_.matrixL().solve(r).norm();
  }
  /// ||Gamma^{1/2} x||.
  Scalar colored_norm(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& x) const {
    return (chol_.matrixU() * x).norm();
  }
  /// Gamma^{1/2} z with Gamma^{1/2} the Cholesky factor.
  Vector<Scalar> color(const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& z) const {
    return chol_.matrixL() * z;
  }
  Matrix<Scalar> gamma_inverse_times(const Eigen::Ref<const Matrix<Scalar>>& m) const {
    return chol_.solve(m);
  }

 private:
  Vector<Scalar> y_;
  Matrix<Scalar> gamma_;
  Scalar noise_level_;
  Eigen::LLT<Matrix<Scalar>> chol_;
};

template <typename Scalar = double>
struct Covariances {
  Matrix<Scalar> cuw;
  Matrix<Scalar> cww;
};

template <typename Scalar>
Matrix<Scalar> anomalies(const std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>& m) {
  return m.colwise() - m.rowwise().mean();
}

/// Sample cross covariance of states and outputs and output covariance,
/// both normalized by 1/(J-1).
template <typename Scalar>
Covariances<Scalar> empirical_covariances(const std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>& states,
                                          const std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>& outputs) {
  const auto j = states.cols();
  if (j < 2 || outputs.cols() != j)
    throw std::invalid_argument("covariances need matching ensembles of size >= 2");
  const Matrix<Scalar> au = anomalies<Scalar>(states);
  const Matrix<Scalar> aw = anomalies<Scalar>(outputs);
  const Scalar n = static_cast<Scalar>(j - 1);
  return {au * aw.transpose() / n, aw * aw.transpose() / n};
}

class UpsilonSelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UpsilonChoice {
  double value = 0.0;
  int doublings = 0;
};

/// Factorization of Cww + upsilon Gamma with a trace-scaled jitter fallback.
template <typename Scalar>
Eigen::LDLT<Matrix<Scalar>> regularized_factor(const Matrix<Scalar>& cww,
                                               const Matrix<Scalar>& gamma, Scalar upsilon) {
  Matrix<Scalar> m = cww + upsilon * gamma;
  Eigen::LDLT<Matrix<Scalar>> ldlt(m);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      (ldlt.vectorD().array() > 0).all())
    return ldlt;
  const Scalar jitter = Scalar(1e-12) * m.trace() / static_cast<Scalar>(m.rows());
  m.diagonal().array() += jitter;
  ldlt.compute(m);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0).all())
    throw std::runtime_error("factorization of Cww + upsilon Gamma failed");
  return ldlt;
}

/// First upsilon in upsilon0 * 2^i (i = 0, 1, ...) with
/// rho ||Gamma^{-1/2} r|| <= upsilon ||Gamma^{1/2} (Cww + upsilon Gamma)^{-1} r||.
template <typename Scalar>
UpsilonChoice select_upsilon(const Matrix<Scalar>& cww, const Observations<Scalar>& obs,
                             const std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>& residual,
                             const EkiControls& controls) {
  const Scalar lhs = static_cast<Scalar>(controls.rho) * obs.whitened_norm(residual);
  Scalar upsilon = static_cast<Scalar>(controls.upsilon0);
  for (int i = 0; i <= controls.max_doublings; ++i) {
    const auto ldlt = regularized_factor<Scalar>(cww, obs.gamma(), upsilon);
    const Vector<Scalar> x = ldlt.solve(residual);
    if (lhs <= upsilon * obs.colored_norm(x)) return {static_cast<double>(upsilon), i};
    upsilon *= 2;
  }
  throw UpsilonSelectionError("upsilon selection exceeded " +
                              std::to_string(controls.max_doublings) + " doublings");
}

/// targets(:, j) = y + eta_j, eta_j ~ N(0, Gamma) from the (seed, iteration, j)
/// stream; or y for every member when perturbations are off.
template <typename Scalar>
Matrix<Scalar> perturbed_targets(const Observations<Scalar>& obs, int n_members, bool perturb,
                                 std::uint64_t seed, int iteration) {
  Matrix<Scalar> t = obs.y().replicate(1, n_members);
  if (!perturb) return t;
  for (int j = 0; j < n_members; ++j) {
    Rng rng = make_stream(seed, {0x70657274ULL, static_cast<std::uint64_t>(iteration),
                                 static_cast<std::uint64_t>(j)});
    Vector<Scalar> z(obs.size());
    for (int k = 0; k < obs.size(); ++k) z[k] = standard_normal<Scalar>(rng);
    t.col(j) += obs.color(z);
  }
  return t;
}

/// u_j <- u_j + Cuw (Cww + upsilon_j Gamma)^{-1} (target_j - w_j).
/// Cuw (.) is applied as A_u (A_w^T (.)) / (J-1) one layout block at a
/// time, so each block's result depends only on that block and the outputs.
template <typename Scalar>
Ensemble<Scalar> analysis_update(const Ensemble<Scalar>& ensemble,
                                 const std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>& outputs,
                                 const std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>& targets,
                                 const Matrix<Scalar>& gamma,
                                 const std::vector<double>& upsilons) {
  const int j = ensemble.size();
  if (outputs.cols() != j || targets.cols() != j || outputs.rows() != targets.rows())
    throw std::invalid_argument("outputs/targets do not match ensemble");
  if (upsilons.size() != 1 && static_cast<int>(upsilons.size()) != j)
    throw std::invalid_argument("need one shared upsilon or one per member");
  const Matrix<Scalar> aw = anomalies<Scalar>(outputs);
  const Scalar n = static_cast<Scalar>(j - 1);
  const Matrix<Scalar> cww = aw * aw.transpose() / n;
  const Matrix<Scalar> innovations = targets - outputs;

  Matrix<Scalar> x(innovations.rows(), j);
  if (upsilons.size() == 1) {
    x = regularized_factor<Scalar>(cww, gamma, static_cast<Scalar>(upsilons[0])).solve(innovations);
  } else {
    for (int m = 0; m < j; ++m)
      x.col(m) = regularized_factor<Scalar>(cww, gamma, static_cast<Scalar>(upsilons[m]))
                     .solve(innovations.col(m));
  }
  const Matrix<Scalar> weights = aw.transpose() * x / n;  // J x J

  Ensemble<Scalar> out = ensemble;
  for (const auto& b : ensemble.layout.blocks()) {
    const Matrix<Scalar> block = ensemble.members.middleRows(b.offset, b.size);
    const Matrix<Scalar> ab = anomalies<Scalar>(block);
    const Matrix<Scalar> updated = block + ab * weights;
    out.members.middleRows(b.offset, b.size) = updated;
  }
  return out;
}

template <typename Scalar>
using ForwardMap = std::function<Matrix<Scalar>(const Matrix<Scalar>&)>;

struct StepInfo {
  double upsilon = 0.0;  // shared value, or the mean over members
  int doublings = 0;
};

/// One regularized analysis step given the current forward outputs.
template <typename Scalar>
Ensemble<Scalar> eki_step(const Ensemble<Scalar>& ensemble,
                          const std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>& outputs,
                          const Observations<Scalar>& obs, const EkiControls& controls,
                          std::uint64_t seed, int iteration, StepInfo* info = nullptr) {
  const int j = ensemble.size();
  const Matrix<Scalar> targets =
      perturbed_targets(obs, j, controls.perturb_observations, seed, iteration);
  const Vector<Scalar> wbar = outputs.rowwise().mean();
  const Matrix<Scalar> aw = anomalies<Scalar>(outputs);
  const Matrix<Scalar> cww = aw * aw.transpose() / static_cast<Scalar>(j - 1);
  std::vector<double> upsilons;
  StepInfo si;
  if (controls.upsilon_mode == UpsilonMode::shared) {
    const auto c = select_upsilon<Scalar>(cww, obs, obs.y() - wbar, controls);
    upsilons.push_back(c.value);
    si = {c.value, c.doublings};
  } else {
    double sum = 0.0;
    for (int m = 0; m < j; ++m) {
      const Vector<Scalar> r = targets.col(m) - wbar;
      const auto c = select_upsilon<Scalar>(cww, obs, r, controls);
      upsilons.push_back(c.value);
      sum += c.value;
      si.doublings = std::max(si.doublings, c.doublings);
    }
    si.upsilon = sum / j;
  }
  if (info) *info = si;
  return analysis_update<Scalar>(ensemble, outputs, targets, obs.gamma(), upsilons);
}

/// Convenience overload that evaluates the forward map first.
template <typename Scalar>
Ensemble<Scalar> eki_step_forward(const Ensemble<Scalar>& ensemble, const ForwardMap<Scalar>& forward,
                          const Observations<Scalar>& obs, const EkiControls& controls,
                          std::uint64_t seed, int iteration, StepInfo* info = nullptr) {
  const Matrix<Scalar> w = forward(ensemble.members);
  return eki_step<Scalar>(ensemble, w, obs, controls, seed, iteration, info);
}

struct IterationRecord {
  int iteration = 0;
  double misfit = 0.0;
  std::optional<double> rel_error;
  std::optional<double> upsilon;
  int doublings = 0;
  std::vector<std::pair<std::string, double>> hyper_means;
  double wall_ms = 0.0;
};

enum class StopReason { discrepancy, max_iterations, aborted };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::discrepancy: return "discrepancy";
    case StopReason::max_iterations: return "max-iterations";
    case StopReason::aborted: return "aborted";
  }
  return "unknown";
}

template <typename Scalar = double>
struct InversionResult {
  Ensemble<Scalar> ensemble;
  Matrix<Scalar> outputs;
  std::vector<IterationRecord> records;
  StopReason stop_reason = StopReason::max_iterations;
  std::string diagnostic;
};

/// Hook to fill per-iteration diagnostics (relative error, hyper means).
template <typename Scalar>
using RecordAnnotator =
    std::function<void(IterationRecord&, const Ensemble<Scalar>&, const Matrix<Scalar>&)>;

/// Iterates analysis steps until ||Gamma^{-1/2}(y - wbar)|| <= zeta * noise
/// level or the iteration budget is spent.
template <typename Scalar>
InversionResult<Scalar> run_inversion(const Ensemble<Scalar>& initial,
                                      const ForwardMap<Scalar>& forward,
                                      const Observations<Scalar>& obs, const EkiControls& controls,
                                      std::uint64_t seed,
                                      const RecordAnnotator<Scalar>& annotate = {}) {
  controls.validate();
  using clock = std::chrono::steady_clock;
  const double threshold = controls.resolved_zeta() * static_cast<double>(obs.noise_level());
  InversionResult<Scalar> res;
  res.ensemble = initial;
  auto t0 = clock::now();
  for (int n = 0;; ++n) {
    Matrix<Scalar> w;
    try {
      w = forward(res.ensemble.members);
    } catch (const std::exception& e) {
      res.stop_reason = StopReason::aborted;
      res.diagnostic = std::string("forward map failed at iteration ") + std::to_string(n) +
                       ": " + e.what();
      return res;
    }
    if (!w.allFinite()) {
      res.stop_reason = StopReason::aborted;
      res.diagnostic = "non-finite forward output at iteration " + std::to_string(n);
      return res;
    }
    res.outputs = w;
    IterationRecord rec;
    rec.iteration = n;
    rec.misfit = static_cast<double>(
        obs.whitened_norm(obs.y() - Vector<Scalar>(w.rowwise().mean())));
    if (annotate) annotate(rec, res.ensemble, w);

    const bool done = rec.misfit <= threshold;
    if (done || n >= controls.max_iterations) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      res.records.push_back(std::move(rec));
      res.stop_reason = done ? StopReason::discrepancy : StopReason::max_iterations;
      return res;
    }
    StepInfo info;
    try {
      res.ensemble = eki_step<Scalar>(res.ensemble, w, obs, controls, seed, n, &info);
    } catch (const std::exception& e) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      res.records.push_back(std::move(rec));
      res.stop_reason = StopReason::aborted;
      res.diagnostic = std::string("analysis step failed at iteration ") + std::to_string(n) +
                       ": " + e.what();
      return res;
    }
    rec.upsilon = info.upsilon;
    rec.doublings = info.doublings;
    rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    res.records.push_back(std::move(rec));
    if (!res.ensemble.members.allFinite()) {
      res.stop_reason = StopReason::aborted;
      res.diagnostic = "non-finite ensemble after iteration " + std::to_string(n);
      return res;
    }
  }
}

/// Right-hand side of the continuous-time limit:
/// du_j/dt = -sum_m <Gamma^{-1}(G(u_j) - y), G(u_m) - Gbar> u_m.
template <typename Scalar>
Matrix<Scalar> limit_ode_rhs(const Matrix<Scalar>& states, const ForwardMap<Scalar>& forward,
                             const Observations<Scalar>& obs) {
  const Matrix<Scalar> w = forward(states);
  const Matrix<Scalar> resid = w.colwise() - obs.y();
  const Matrix<Scalar> d = obs.gamma_inverse_times(resid).transpose() * anomalies<Scalar>(w);
  return -states * d.transpose();
}

/// Classical RK4 for the coupled particle system; returns the states at
/// t = 0, h, 2h, ..., T (T rounded to a whole number of steps).
template <typename Scalar>
std::vector<Matrix<Scalar>> integrate_limit_ode(const Ensemble<Scalar>& initial,
                                                const ForwardMap<Scalar>& forward,
                                                const Observations<Scalar>& obs, double h,
                                                double horizon) {
  if (!(h > 0.0)) throw std::invalid_argument("ODE step must be positive");
  const int steps = static_cast<int>(std::llround(horizon / h));
  std::vector<Matrix<Scalar>> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  Matrix<Scalar> u = initial.members;
  traj.push_back(u);
  const auto hs = static_cast<Scalar>(h);
  for (int s = 0; s < steps; ++s) {
    const Matrix<Scalar> k1 = limit_ode_rhs<Scalar>(u, forward, obs);
    const Matrix<Scalar> k2 = limit_ode_rhs<Scalar>(u + hs / 2 * k1, forward, obs);
    const Matrix<Scalar> k3 = limit_ode_rhs<Scalar>(u + hs / 2 * k2, forward, obs);
    const Matrix<Scalar> k4 = limit_ode_rhs<Scalar>(u + hs * k3, forward, obs);
    u += hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > Scalar(1e12))
      throw std::runtime_error("limit ODE blew up at step " + std::to_string(s + 1));
    traj.push_back(u);
  }
  return traj;
}

/// Relative residual of projecting each column of `m` onto span(basis columns).
template <typename Scalar>
Scalar max_span_residual(const Matrix<Scalar>& basis, const Matrix<Scalar>& m) {
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(basis);
  Scalar worst = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const Vector<Scalar> v = m.col(c);
    const Vector<Scalar> coef = qr.solve(v);
    const Scalar nv = v.norm();
    const Scalar r = (basis * coef - v).norm();
    worst = std::max(worst, nv > 0 ? r / nv : r);
  }
  return worst;
}

}  // namespace hieki
