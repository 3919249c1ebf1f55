#include "hieki/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hieki/io.hpp"

namespace hieki {

namespace fs = std::filesystem;

double step_truth(double x) {
  if (x > 0.0 && x < 5.0) return std::exp(4.0 - 25.0 / (x * (5.0 - x)));
  if (x >= 7.0 && x <= 8.0) return 1.0;
  if (x > 8.0 && x <= 9.0) return -1.0;
  return 0.0;
}

Field<double> step_truth_field(const Domain& d) {
  if (d.dim != 1) throw std::invalid_argument("step truth is one-dimensional");
  return Field<double>::from_function(d, [](double x) { return step_truth(x); });
}

Domain physical_domain(const ExperimentConfig& c) {
  const int n = c.get_int("grid.n_cells");
  if (c.model_problem == ModelProblem::darcy) return build_domain(6.0, 6.0, n, n);
  return build_domain(10.0, n);
}

SpectralBasis<double> prior_basis(const ExperimentConfig& c) {
  const Domain d = physical_domain(c);
  const bool normalized = c.get_string("grid.coordinate_scaling") == "normalized";
  return dirichlet_spectrum<double>(normalized ? d.normalized() : d, c.get_int("grid.max_modes"));
}

namespace {

CoefficientKind coefficient_kind(const ExperimentConfig& c) {
  const auto& s = c.get_string("prior.coefficient");
  if (s == "exp") return CoefficientKind::exp;
  if (s == "level-set") return CoefficientKind::level_set;
  return CoefficientKind::identity;
}

LevelSetSpec<double> level_set_spec(const ExperimentConfig& c) {
  return {c.get_double("prior.kappa_minus"), c.get_double("prior.kappa_plus"), 0.0};
}

Hierarchy hierarchy_from(const std::string& s) {
  if (s == "centered") return Hierarchy::centered;
  if (s == "noncentered") return Hierarchy::noncentered;
  return Hierarchy::none;
}

GMap<double> g_map_from(const ExperimentConfig& c) {
  GMap<double> g;
  g.kind = c.get_string("field_prior.g_kind") == "exp" ? GMap<double>::Kind::exp
                                                       : GMap<double>::Kind::rational;
  g.a = c.get_double("field_prior.g_a");
  g.b = c.get_double("field_prior.g_b");
  g.c = c.get_double("field_prior.g_c");
  g.d = c.get_double("field_prior.g_d");
  g.floor = c.get_double("field_prior.g_floor");
  g.ceiling = c.get_double("field_prior.g_ceiling");
  return g;
}

FieldHyperPrior<double> field_prior_from(const ExperimentConfig& c, bool cauchy) {
  FieldHyperPrior<double> p;
  p.kind = cauchy ? FieldHyperPrior<double>::Kind::cauchy : FieldHyperPrior<double>::Kind::gauss;
  p.alpha = c.get_int("field_prior.alpha");
  p.v_spec = {c.get_double("field_prior.v_alpha"), c.get_double("field_prior.v_tau"),
              c.get_double("field_prior.v_sigma2"), c.get_double("field_prior.v_mean")};
  p.cauchy_delta = c.get_double("field_prior.cauchy_delta");
  p.cauchy_interpolate = c.get_bool("field_prior.cauchy_interpolate");
  p.g = g_map_from(c);
  return p;
}

ChannelPrior channel_prior_from(const ExperimentConfig& c) {
  ChannelPrior p;
  for (int k = 0; k < 5; ++k) {
    const std::string d = "channel.d" + std::to_string(k + 1);
    p.geometry[k] = UniformBijection<double>(c.get_double(d + "_min"), c.get_double(d + "_max"));
  }
  for (int f = 0; f < 2; ++f) {
    const std::string s = std::to_string(f + 1);
    p.fields[f].alpha = UniformBijection<double>(c.get_double("channel.alpha" + s + "_min"),
                                                 c.get_double("channel.alpha" + s + "_max"));
    p.fields[f].tau = UniformBijection<double>(c.get_double("channel.tau" + s + "_min"),
                                               c.get_double("channel.tau" + s + "_max"));
    p.fields[f].sigma2 = 1.0;
    p.fields[f].mean = c.get_double("channel.mean" + s);
  }
  return p;
}

Rng truth_stream(const ExperimentConfig& c) {
  return make_stream(static_cast<std::uint64_t>(c.get_int("truth.seed")), {0x7472757468ULL});
}

}  // namespace

std::shared_ptr<const Parameterization> make_parameterization(const ExperimentConfig& c) {
  const Domain physical = physical_domain(c);
  SpectralBasis<double> basis = prior_basis(c);
  const auto kind = coefficient_kind(c);
  const auto ls = level_set_spec(c);
  using P = ParameterizationKind;
  switch (c.parameterization) {
    case P::channel:
      return std::make_shared<ChannelParameterization>(
          physical, std::move(basis), hierarchy_from(c.get_string("channel.hierarchy")),
          channel_prior_from(c));
    case P::noncentered_field_gauss:
    case P::noncentered_field_cauchy: {
      SpectralBasis<double> v_basis = basis;
      return std::make_shared<FieldHyperParameterization>(
          physical, std::move(basis), std::move(v_basis),
          field_prior_from(c, c.parameterization == P::noncentered_field_cauchy), kind, ls);
    }
    default:
      break;
  }
  ScalarHyperPrior<double> hyper{
      {c.get_double("prior.alpha_min"), c.get_double("prior.alpha_max")},
      {c.get_double("prior.tau_min"), c.get_double("prior.tau_max")},
      c.get_double("prior.sigma2"),
      c.get_double("prior.mean")};
  FixedFieldPrior fixed;
  fixed.matern = {c.get_double("prior.fixed_alpha"), c.get_double("prior.fixed_tau"),
                  c.get_double("prior.sigma2"), c.get_double("prior.mean")};
  if (c.model_problem == ModelProblem::source1d) {
    fixed.kind = FixedFieldPrior::Kind::nonstationary;
    fixed.alpha = c.get_int("field_prior.alpha");
    fixed.length_scale = c.get_double("prior.fixed_length_scale");
  }
  Hierarchy h = Hierarchy::none;
  if (c.parameterization == P::centered_hier) h = Hierarchy::centered;
  if (c.parameterization == P::noncentered_hier) h = Hierarchy::noncentered;
  return std::make_shared<ScalarFieldParameterization>(physical, std::move(basis), h, hyper,
                                                       fixed, kind, ls);
}

PdeObserver make_observer(const ExperimentConfig& c) {
  const int n = c.get_int("grid.n_cells");
  const int count = c.get_int("observations.count");
  if (c.model_problem == ModelProblem::darcy) {
    DarcyProblem problem = DarcyProblem::standard(n);
    const int per_axis = static_cast<int>(std::lround(std::sqrt(double(count))));
    const double sigma = c.get_double("observations.mollifier_width") * problem.domain.extents[0];
    auto o = mollified_functionals(problem.domain, lattice_centers(problem.domain, per_axis), sigma);
    return PdeObserver::darcy(std::move(problem), std::move(o));
  }
  const Domain d = physical_domain(c);
  return PdeObserver::source1d(d, point_functionals(d, equally_spaced_points(d, count)));
}

Truth make_truth(const ExperimentConfig& c) {
  const Domain physical = physical_domain(c);
  Truth t;
  if (c.model_problem == ModelProblem::source1d) {
    t.unknown = step_truth_field(physical);
    t.coefficient = t.unknown;
    return t;
  }
  const SpectralBasis<double> basis = prior_basis(c);
  Rng rng = truth_stream(c);
  if (c.parameterization == ParameterizationKind::channel) {
    const ChannelPrior prior = channel_prior_from(c);
    std::array<Field<double>, 2> logk;
    for (int f = 0; f < 2; ++f) {
      const std::string s = std::to_string(f + 1);
      const MaternSpec<double> spec{c.get_double("truth.alpha" + s), c.get_double("truth.tau" + s),
                                    1.0, prior.fields[f].mean};
      logk[f] = Field<double>(physical, sample_matern(spec, basis, rng).values);
      t.hypers.emplace_back("alpha" + s, spec.alpha);
      t.hypers.emplace_back("tau" + s, spec.tau);
    }
    const ChannelGeometry<double> g{c.get_double("truth.d1"), c.get_double("truth.d2"),
                                    c.get_double("truth.d3"), c.get_double("truth.d4"),
                                    c.get_double("truth.d5")};
    t.unknown = channel_map(ChannelSpec<double>{g, logk[1], logk[0]}, physical);
    t.coefficient = exp_map(t.unknown);
    for (int k = 0; k < 5; ++k)
      t.hypers.insert(t.hypers.begin() + k,
                      {"d" + std::to_string(k + 1), c.get_double("truth.d" + std::to_string(k + 1))});
    return t;
  }
  const MaternSpec<double> spec{c.get_double("truth.alpha"), c.get_double("truth.tau"),
                                c.get_double("prior.sigma2"), c.get_double("prior.mean")};
  Field<double> u(physical, sample_matern(spec, basis, rng).values);
  Decoded d = finish_decode(std::move(u), coefficient_kind(c), level_set_spec(c));
  t.unknown = std::move(d.unknown);
  t.coefficient = std::move(d.coefficient);
  t.hypers = {{"alpha", spec.alpha}, {"tau", spec.tau}};
  return t;
}

Setup build_setup(const ExperimentConfig& c) {
  Setup s;
  s.config = c;
  s.physical = physical_domain(c);
  s.param = make_parameterization(c);
  s.pde = std::make_shared<const PdeObserver>(make_observer(c));
  s.truth = make_truth(c);
  const int m = s.pde->functionals().rows();
  const Matrix<double> gamma =
      c.get_double("observations.gamma") * Matrix<double>::Identity(m, m);
  s.data = synthesize_data(*s.pde, s.truth.coefficient, gamma,
                           static_cast<std::uint64_t>(c.get_int("truth.noise_seed")),
                           c.get_bool("observations.noise_free"),
                           c.get_string("eki.noise_level") == "expected");
  return s;
}

double relative_error(const Field<double>& estimate, const Field<double>& truth) {
  if (!estimate.domain.same_grid(truth.domain))
    throw std::invalid_argument("estimate and truth live on different grids");
  const double denom = l2_norm(truth);
  if (!(denom > 0)) throw std::invalid_argument("relative error against a zero truth");
  return l2_norm(Field<double>(truth.domain, estimate.values - truth.values)) / denom;
}

Metrics compute_metrics(const Field<double>& mean_field, const Field<double>& truth,
                        const Observations<double>& obs, const Matrix<double>& outputs) {
  const Vector<double> wbar = outputs.rowwise().mean();
  return {relative_error(mean_field, truth), obs.whitened_norm(obs.y() - wbar)};
}

EnsembleSummary summarize_decoded(const Domain& domain, const std::vector<Decoded>& decoded) {
  if (decoded.empty()) throw std::invalid_argument("cannot summarize an empty ensemble");
  const double j = static_cast<double>(decoded.size());
  Vector<double> sum_u = Vector<double>::Zero(domain.size());
  Vector<double> sum_ell;
  std::vector<std::pair<std::string, double>> hyper_sum = decoded.front().hypers;
  for (auto& h : hyper_sum) h.second = 0.0;
  for (const auto& d : decoded) {
    sum_u += d.unknown.values;
    for (std::size_t k = 0; k < hyper_sum.size(); ++k) hyper_sum[k].second += d.hypers[k].second;
    if (d.length_scale) {
      if (sum_ell.size() == 0) sum_ell = Vector<double>::Zero(domain.size());
      sum_ell += d.length_scale->values;
    }
  }
  EnsembleSummary s;
  s.mean_unknown = Field<double>(domain, sum_u / j);
  for (auto& h : hyper_sum) h.second /= j;
  s.hyper_means = std::move(hyper_sum);
  if (sum_ell.size() > 0) {
    s.mean_length_scale = Field<double>(domain, sum_ell / j);
    const auto& v = s.mean_length_scale->values;
    s.hyper_means.insert(s.hyper_means.end(),
                         {{"ell_min", v.minCoeff()}, {"ell_mean", v.mean()}, {"ell_max", v.maxCoeff()}});
  }
  return s;
}

EnsembleSummary summarize_ensemble(const Parameterization& param, const Matrix<double>& members) {
  return summarize_decoded(param.domain(), param.decode_ensemble(members));
}

std::uint64_t initialization_seed(std::uint64_t master, int index) {
  return stream_seed(master, {0x696E6974ULL, static_cast<std::uint64_t>(index)});
}

Ensemble<double> initial_ensemble(const Parameterization& param, int n_members,
                                  std::uint64_t init_seed) {
  Matrix<double> members(param.layout().total(), n_members);
  for (int j = 0; j < n_members; ++j) {
    Rng rng = make_stream(init_seed, {static_cast<std::uint64_t>(j)});
    members.col(j) = param.sample_prior(rng);
  }
  return Ensemble<double>(std::move(members), param.layout());
}

InitializationOutcome run_initialization(const Setup& s, int index, int threads) {
  InitializationOutcome out;
  out.index = index;
  out.seed = initialization_seed(s.config.master_seed, index);
  try {
    const Ensemble<double> initial = initial_ensemble(*s.param, s.config.n_ensemble, out.seed);
    const Observations<double> obs(s.data.y, s.data.gamma, s.data.noise_level);
    const ForwardModel forward(s.param, *s.pde, threads);
    // Each iteration decodes the ensemble once; the annotator reuses the
    // summary computed alongside the forward outputs.
    std::optional<EnsembleSummary> pending;
    std::optional<Field<double>> last_ell;
    const ForwardMap<double> map = [&](const Matrix<double>& members) {
      const std::vector<Decoded> decoded = s.param->decode_ensemble(members);
      pending = summarize_decoded(s.param->domain(), decoded);
      return forward.evaluate_decoded(decoded);
    };
    RecordAnnotator<double> annotate = [&](IterationRecord& rec, const Ensemble<double>&,
                                           const Matrix<double>&) {
      EnsembleSummary sum = std::move(*pending);
      pending.reset();
      rec.rel_error = relative_error(sum.mean_unknown, s.truth.unknown);
      rec.hyper_means = sum.hyper_means;
      out.mean_history.push_back(std::move(sum.mean_unknown));
      last_ell = std::move(sum.mean_length_scale);
    };
    auto res = run_inversion<double>(initial, map, obs, s.config.controls,
                                     stream_seed(out.seed, {0x656B69ULL}), annotate);
    out.stop_reason = res.stop_reason;
    out.diagnostic = res.diagnostic;
    out.records = std::move(res.records);
    out.final_length_scale = std::move(last_ell);
  } catch (const std::exception& e) {
    out.stop_reason = StopReason::aborted;
    out.diagnostic = e.what();
  }
  if (!out.records.empty())
    for (const auto& [name, v] : out.records.front().hyper_means) out.hyper_columns.push_back(name);
  if (!out.mean_history.empty()) {
    // The annotator may have run once more than the records when a step failed.
    out.mean_history.resize(std::min(out.mean_history.size(), out.records.size()));
    if (!out.mean_history.empty()) out.final_mean = out.mean_history.back();
  }
  return out;
}

std::vector<int> snapshot_iterations(int last_iteration, int count) {
  std::vector<int> it;
  if (last_iteration + 1 <= count) {
    for (int n = 0; n <= last_iteration; ++n) it.push_back(n);
    return it;
  }
  for (int k = 0; k < count; ++k) {
    const int n = static_cast<int>(std::lround(double(k) * last_iteration / (count - 1)));
    if (it.empty() || it.back() != n) it.push_back(n);
  }
  return it;
}

namespace {

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::optional<double> hyper_value(const IterationRecord& r, const std::string& name) {
  for (const auto& [n, v] : r.hyper_means)
    if (n == name) return v;
  return std::nullopt;
}

std::string init_dir_name(int index) {
  std::ostringstream s;
  s << "init_" << std::setw(2) << std::setfill('0') << index;
  return s.str();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c) {
  const Setup s = build_setup(c);
  RunResult result;
  result.directory = c.output_dir;
  fs::create_directories(result.directory);

  const int n_init = c.n_initializations;
  const int workers = std::max(1, std::min(c.parallel, n_init));
  const int member_threads = std::max(1, c.parallel / workers);
  result.initializations.resize(n_init);
  {
    std::atomic<int> next{0};
    auto work = [&] {
      for (int i = next++; i < n_init; i = next++)
        result.initializations[i] = run_initialization(s, i, member_threads);
    };
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  const bool wall = c.get_bool("output.record_wall_time");
  auto add_file = [&](const fs::path& rel) { result.files.push_back(rel.generic_string()); };

  write_text(result.directory / "resolved_config.ini", c.to_ini());
  add_file("resolved_config.ini");
  write_field(result.directory / "truth.bin", s.truth.unknown);
  add_file("truth.bin");
  write_field(result.directory / "truth_coefficient.bin", s.truth.coefficient);
  add_file("truth_coefficient.bin");
  {
    std::ostringstream d;
    d << "index,y\n";
    for (int k = 0; k < s.data.y.size(); ++k) d << k << ',' << format_double(s.data.y[k]) << '\n';
    write_text(result.directory / "data.csv", d.str());
    add_file("data.csv");
  }

  nlohmann::ordered_json inits = nlohmann::ordered_json::array();
  std::ostringstream summary;
  summary << "init,seed,stop_reason,iterations,final_misfit,final_rel_error,diagnostic\n";
  for (const auto& o : result.initializations) {
    const std::string name = init_dir_name(o.index);
    const fs::path dir = result.directory / name;
    fs::create_directories(dir);

    std::ostringstream it;
    it << "iter,misfit,rel_error,upsilon,alpha_mean,tau_mean,wall_ms\n";
    for (const auto& r : o.records) {
      it << r.iteration << ',' << format_double(r.misfit) << ',' << format_optional(r.rel_error)
         << ',' << format_optional(r.upsilon) << ',' << format_optional(hyper_value(r, "alpha"))
         << ',' << format_optional(hyper_value(r, "tau")) << ','
         << (wall ? format_double(r.wall_ms) : std::string()) << '\n';
    }
    write_text(dir / "iterations.csv", it.str());
    add_file(fs::path(name) / "iterations.csv");

    if (!o.hyper_columns.empty()) {
      std::ostringstream h;
      h << "iter";
      for (const auto& n : o.hyper_columns) h << ',' << n;
      h << '\n';
      for (const auto& r : o.records) {
        h << r.iteration;
        for (const auto& n : o.hyper_columns) h << ',' << format_optional(hyper_value(r, n));
        h << '\n';
      }
      write_text(dir / "hyperparameters.csv", h.str());
      add_file(fs::path(name) / "hyperparameters.csv");
    }

    std::vector<int> snaps;
    if (!o.mean_history.empty()) {
      write_field(dir / "mean_field.bin", o.final_mean);
      add_file(fs::path(name) / "mean_field.bin");
      snaps = snapshot_iterations(static_cast<int>(o.mean_history.size()) - 1,
                                  c.get_int("experiment.snapshots"));
      std::vector<Field<double>> frames;
      for (int n : snaps) frames.push_back(o.mean_history[n]);
      write_fields(dir / "snapshots.bin", frames);
      add_file(fs::path(name) / "snapshots.bin");
    }
    if (o.final_length_scale) {
      write_field(dir / "length_scale.bin", *o.final_length_scale);
      add_file(fs::path(name) / "length_scale.bin");
    }

    const int iterations = o.records.empty() ? 0 : o.records.back().iteration;
    summary << o.index << ',' << o.seed << ',' << to_string(o.stop_reason) << ',' << iterations
            << ',' << (o.records.empty() ? std::string() : format_double(o.final_misfit())) << ','
            << format_optional(o.final_rel_error()) << ',' << csv_safe(o.diagnostic) << '\n';

    nlohmann::ordered_json ij;
    ij["index"] = o.index;
    ij["seed"] = o.seed;
    ij["directory"] = name;
    ij["stop_reason"] = to_string(o.stop_reason);
    ij["iterations"] = iterations;
    ij["snapshot_iterations"] = snaps;
    if (!o.diagnostic.empty()) ij["diagnostic"] = o.diagnostic;
    inits.push_back(std::move(ij));
  }
  write_text(result.directory / "summary.csv", summary.str());
  add_file("summary.csv");

  nlohmann::ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["model_problem"] = to_string(c.model_problem);
  manifest["parameterization"] = to_string(c.parameterization);
  manifest["master_seed"] = c.master_seed;
  manifest["zeta"] = c.controls.resolved_zeta();
  manifest["noise_level"] = s.data.noise_level;
  manifest["discrepancy_threshold"] = c.controls.resolved_zeta() * s.data.noise_level;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& k : config_keys()) cfg[k] = c.values.at(k);
  manifest["config"] = std::move(cfg);
  nlohmann::ordered_json truth = nlohmann::ordered_json::object();
  for (const auto& [n, v] : s.truth.hypers) truth[n] = v;
  manifest["truth_hyperparameters"] = std::move(truth);
  manifest["initializations"] = std::move(inits);
  add_file("manifest.json");
  manifest["files"] = result.files;
  write_text(result.directory / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string Report::to_text() const {
  std::ostringstream out;
  out << "initializations: " << initializations << "\n";
  out << "stopped by discrepancy: " << discrepancy_stops << "\n";
  out << std::left << std::setw(18) << "quantity" << std::right << std::setw(14) << "min"
      << std::setw(14) << "median" << std::setw(14) << "max" << "\n";
  for (const auto& r : rows)
    out << std::left << std::setw(18) << r.quantity << std::right << std::setprecision(6)
        << std::setw(14) << r.min << std::setw(14) << r.median << std::setw(14) << r.max << "\n";
  return out.str();
}

Report report_run(const fs::path& run_dir) {
  const CsvTable t = read_csv(run_dir / "summary.csv");
  Report rep;
  rep.initializations = static_cast<int>(t.rows.size());
  if (t.rows.empty()) throw std::runtime_error("run has no initializations");
  const int stop = t.column("stop_reason");
  for (const auto& r : t.rows)
    if (r[stop] == "discrepancy") ++rep.discrepancy_stops;
  for (const char* q : {"final_rel_error", "final_misfit", "iterations"}) {
    const int col = t.column(q);
    std::vector<double> v;
    for (const auto& r : t.rows)
      if (!r[col].empty()) v.push_back(std::stod(r[col]));
    if (v.empty()) continue;
    rep.rows.push_back({q, *std::min_element(v.begin(), v.end()), median(v),
                        *std::max_element(v.begin(), v.end())});
  }
  return rep;
}

namespace {

void write_grid_csv(const fs::path& path, const Field<double>& f) {
  std::ostringstream out;
  const Domain& d = f.domain;
  for (int j = 0; j < d.interior(1); ++j) {
    for (int i = 0; i < d.interior(0); ++i) {
      if (i) out << ',';
      out << format_double(f.values[d.index(i, j)]);
    }
    out << '\n';
  }
  write_text(path, out.str());
}

std::string tag(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::vector<fs::path> sample_prior_fields(const ExperimentConfig& c) {
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  const int n = c.get_int("sample_prior.n_cells");
  const int count = c.get_int("sample_prior.count");
  const auto seed = static_cast<std::uint64_t>(c.get_int("sample_prior.seed"));
  const std::string kind = c.get_string("sample_prior.kind");
  std::vector<fs::path> written;

  if (kind == "matern") {
    const Domain d = build_domain(1.0, 1.0, n, n);
    const SpectralBasis<double> basis = dirichlet_spectrum<double>(d);
    std::uint64_t setting = 0;
    for (double a : c.get_list("sample_prior.alphas"))
      for (double t : c.get_list("sample_prior.taus")) {
        for (int k = 0; k < count; ++k) {
          Rng rng = make_stream(seed, {setting, static_cast<std::uint64_t>(k)});
          const Field<double> u = sample_matern(MaternSpec<double>{a, t, 1.0, 0.0}, basis, rng);
          std::string name = "matern_alpha" + tag(a) + "_tau" + tag(t);
          if (count > 1) name += "_" + std::to_string(k);
          written.push_back(dir / (name + ".csv"));
          write_grid_csv(written.back(), u);
        }
        ++setting;
      }
    return written;
  }

  ExperimentConfig sized = c;
  sized.values["grid.n_cells"] = std::to_string(n);
  const bool cauchy = kind == "field-cauchy";
  const Domain d = physical_domain(sized);
  if (cauchy && d.dim != 1) throw ConfigError("sample_prior.kind: Cauchy samples are one-dimensional");
  const SpectralBasis<double> basis = prior_basis(sized);
  const FieldHyperParameterization param(d, basis, basis, field_prior_from(sized, cauchy),
                                         CoefficientKind::identity, LevelSetSpec<double>{});
  for (int k = 0; k < count; ++k) {
    Rng rng = make_stream(seed, {static_cast<std::uint64_t>(k)});
    const Vector<double> latent = param.sample_prior(rng);
    const auto [v, ell] = param.length_scale(latent);
    const Field<double> u = param.decode(latent).field;
    const fs::path base = dir / (kind + "_" + std::to_string(k));
    if (d.dim == 1) {
      std::ostringstream out;
      out << "x,v,ell,u\n";
      for (int i = 0; i < d.size(); ++i)
        out << format_double(d.coordinate(0, i)) << ',' << format_double(v.values[i]) << ','
            << format_double(ell.values[i]) << ',' << format_double(u.values[i]) << '\n';
      written.push_back(base.string() + ".csv");
      write_text(written.back(), out.str());
    } else {
      for (const auto& [suffix, f] : {std::pair{"_v", &v}, {"_ell", &ell}, {"_u", &u}}) {
        written.push_back(base.string() + suffix + ".csv");
        write_grid_csv(written.back(), *f);
      }
    }
  }
  return written;
}

}  // namespace hieki
