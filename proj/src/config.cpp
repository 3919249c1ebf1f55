#include "hieki/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace hieki {

const char* to_string(ModelProblem m) {
  return m == ModelProblem::darcy ? "darcy" : "source1d";
}

const char* to_string(ParameterizationKind p) {
  switch (p) {
    case ParameterizationKind::plain: return "plain";
    case ParameterizationKind::level_set: return "level-set";
    case ParameterizationKind::channel: return "channel";
    case ParameterizationKind::centered_hier: return "centered-hier";
    case ParameterizationKind::noncentered_hier: return "noncentered-hier";
    case ParameterizationKind::noncentered_field_gauss: return "noncentered-field-gauss";
    case ParameterizationKind::noncentered_field_cauchy: return "noncentered-field-cauchy";
  }
  return "?";
}

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

enum class Type { integer, real, boolean, text, choice, real_list };

struct Context {
  ModelProblem problem;
  ParameterizationKind param;
};

struct KeySpec {
  std::string key;
  Type type;
  std::function<std::string(const Context&)> fallback;
  std::vector<std::string> choices;
};

std::function<std::string(const Context&)> fixed(std::string v) {
  return [v = std::move(v)](const Context&) { return v; };
}

std::function<std::string(const Context&)> per_problem(std::string darcy, std::string source) {
  return [darcy = std::move(darcy), source = std::move(source)](const Context& c) {
    return c.problem == ModelProblem::darcy ? darcy : source;
  };
}

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = [] {
    std::vector<KeySpec> v;
    auto add = [&v](std::string k, Type t, auto f, std::vector<std::string> ch = {}) {
      v.push_back({std::move(k), t, std::function<std::string(const Context&)>(f), std::move(ch)});
    };
    // experiment
    add("experiment.model_problem", Type::choice, fixed(""), {"darcy", "source1d"});
    add("experiment.parameterization", Type::choice,
        per_problem("noncentered-hier", "noncentered-field-gauss"),
        {"plain", "level-set", "channel", "centered-hier", "noncentered-hier",
         "noncentered-field-gauss", "noncentered-field-cauchy"});
    add("experiment.n_ensemble", Type::integer, fixed("200"));
    add("experiment.n_initializations", Type::integer, fixed("10"));
    add("experiment.master_seed", Type::integer, fixed("1"));
    add("experiment.output_dir", Type::text, fixed("hieki-run"));
    add("experiment.parallel", Type::integer, fixed("1"));
    add("experiment.snapshots", Type::integer, fixed("5"));
    // eki
    add("eki.rho", Type::real, fixed("0.8"));
    add("eki.zeta", Type::real, fixed("0"));
    add("eki.upsilon0", Type::real, fixed("1"));
    add("eki.max_iterations", Type::integer, fixed("30"));
    add("eki.max_doublings", Type::integer, fixed("60"));
    add("eki.perturb_observations", Type::boolean, fixed("true"));
    add("eki.upsilon_mode", Type::choice, fixed("shared"), {"shared", "per-member"});
    add("eki.noise_level", Type::choice, fixed("realized"), {"realized", "expected"});
    // grid
    add("grid.n_cells", Type::integer, per_problem("40", "1000"));
    add("grid.coordinate_scaling", Type::choice, per_problem("normalized", "physical"),
        {"normalized", "physical"});
    add("grid.max_modes", Type::integer, fixed("0"));
    // observations
    add("observations.count", Type::integer, per_problem("64", "50"));
    add("observations.gamma", Type::real, fixed("1e-4"));
    add("observations.mollifier_width", Type::real, fixed("0.06"));
    add("observations.noise_free", Type::boolean, fixed("false"));
    // scalar hierarchical prior
    add("prior.alpha_min", Type::real, fixed("1.3"));
    add("prior.alpha_max", Type::real, fixed("4"));
    add("prior.tau_min", Type::real, fixed("5"));
    add("prior.tau_max", Type::real, fixed("30"));
    add("prior.mean", Type::real, fixed("0"));
    add("prior.sigma2", Type::real, fixed("1"));
    add("prior.fixed_alpha", Type::real, fixed("2.65"));
    add("prior.fixed_tau", Type::real, fixed("17.5"));
    add("prior.fixed_length_scale", Type::real, fixed("1"));
    add("prior.coefficient", Type::choice,
        [](const Context& c) {
          if (c.param == ParameterizationKind::level_set) return std::string("level-set");
          return std::string(c.problem == ModelProblem::darcy ? "exp" : "identity");
        },
        {"identity", "exp", "level-set"});
    add("prior.kappa_minus", Type::real, fixed("1"));
    add("prior.kappa_plus", Type::real, fixed("10"));
    // function-valued hyperparameter prior
    add("field_prior.alpha", Type::integer, fixed("2"));
    add("field_prior.v_mean", Type::real, per_problem("-2", "-0.7"));
    add("field_prior.v_alpha", Type::real, fixed("2"));
    add("field_prior.v_tau", Type::real, fixed("2"));
    add("field_prior.v_sigma2", Type::real, fixed("0.5"));
    add("field_prior.cauchy_delta", Type::real, fixed("0.1"));
    add("field_prior.cauchy_interpolate", Type::boolean, fixed("false"));
    add("field_prior.g_kind", Type::choice,
        [](const Context& c) {
          return std::string(c.param == ParameterizationKind::noncentered_field_cauchy ? "rational"
                                                                                      : "exp");
        },
        {"exp", "rational"});
    add("field_prior.g_a", Type::real, fixed("4"));
    add("field_prior.g_b", Type::real, fixed("0"));
    add("field_prior.g_c", Type::real, fixed("1"));
    add("field_prior.g_d", Type::real, fixed("0"));
    add("field_prior.g_floor", Type::real, per_problem("1e-6", "1e-5"));
    add("field_prior.g_ceiling", Type::real, per_problem("1", "10"));
    // channel
    add("channel.hierarchy", Type::choice, fixed("noncentered"),
        {"none", "centered", "noncentered"});
    const char* dmin[5] = {"0", "2", "0.4", "0", "0.1"};
    const char* dmax[5] = {"1", "13", "1", "1", "0.3"};
    for (int k = 0; k < 5; ++k) {
      add("channel.d" + std::to_string(k + 1) + "_min", Type::real, fixed(dmin[k]));
      add("channel.d" + std::to_string(k + 1) + "_max", Type::real, fixed(dmax[k]));
    }
    for (int f = 1; f <= 2; ++f) {
      const std::string s = std::to_string(f);
      add("channel.alpha" + s + "_min", Type::real, fixed("1.3"));
      add("channel.alpha" + s + "_max", Type::real, fixed("3"));
      add("channel.tau" + s + "_min", Type::real, fixed("8"));
      add("channel.tau" + s + "_max", Type::real, fixed("30"));
      add("channel.mean" + s, Type::real, fixed(f == 1 ? "1" : "4"));
    }
    // truth
    add("truth.seed", Type::integer, fixed("0"));
    add("truth.noise_seed", Type::integer, fixed("0"));
    add("truth.alpha", Type::real, fixed("3"));
    add("truth.tau", Type::real, fixed("10"));
    add("truth.alpha1", Type::real, fixed("2"));
    add("truth.alpha2", Type::real, fixed("2.8"));
    add("truth.tau1", Type::real, fixed("30"));
    add("truth.tau2", Type::real, fixed("10"));
    add("truth.d1", Type::real, fixed("0.2"));
    add("truth.d2", Type::real, fixed("6"));
    add("truth.d3", Type::real, fixed("0.5"));
    add("truth.d4", Type::real, fixed("0.3"));
    add("truth.d5", Type::real, fixed("0.15"));
    // output
    add("output.record_wall_time", Type::boolean, fixed("false"));
    // prior sampling (sample-prior subcommand)
    add("sample_prior.kind", Type::choice, fixed("matern"),
        {"matern", "field-gauss", "field-cauchy"});
    add("sample_prior.alphas", Type::real_list, fixed("1.6"));
    add("sample_prior.taus", Type::real_list, fixed("10,25,50,100"));
    add("sample_prior.n_cells", Type::integer, fixed("100"));
    add("sample_prior.count", Type::integer, fixed("1"));
    add("sample_prior.seed", Type::integer, fixed("1"));
    return v;
  }();
  return s;
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : schema())
    if (s.key == key) return &s;
  return nullptr;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* b = v.data();
  const auto [p, ec] = std::from_chars(b, b + v.size(), out);
  if (ec != std::errc() || p != b + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* b = v.data();
  const auto [p, ec] = std::from_chars(b, b + v.size(), out);
  if (ec != std::errc() || p != b + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

void check_type(const KeySpec& s, const std::string& v) {
  switch (s.type) {
    case Type::integer: parse_integer(s.key, v); break;
    case Type::real: parse_real(s.key, v); break;
    case Type::boolean: parse_bool(s.key, v); break;
    case Type::real_list: parse_list(s.key, v); break;
    case Type::choice:
      if (std::find(s.choices.begin(), s.choices.end(), v) == s.choices.end()) {
        std::string msg = s.key + ": '" + v + "' is not one of";
        for (const auto& c : s.choices) msg += " " + c;
        throw ConfigError(msg);
      }
      break;
    case Type::text: break;
  }
}

ParameterizationKind parameterization_from(const std::string& s) {
  for (auto p : {ParameterizationKind::plain, ParameterizationKind::level_set,
                 ParameterizationKind::channel, ParameterizationKind::centered_hier,
                 ParameterizationKind::noncentered_hier,
                 ParameterizationKind::noncentered_field_gauss,
                 ParameterizationKind::noncentered_field_cauchy})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown parameterization '" + s + "'");
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate(const ExperimentConfig& c) {
  require(c.n_ensemble >= 2, "experiment.n_ensemble: need at least 2 members");
  require(c.n_initializations >= 1, "experiment.n_initializations: must be >= 1");
  require(c.parallel >= 1, "experiment.parallel: must be >= 1");
  require(c.get_int("experiment.snapshots") >= 2, "experiment.snapshots: must be >= 2");
  try {
    c.controls.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find("rho") == 0) throw ConfigError("eki.rho: " + what);
    if (what.find("zeta") == 0) throw ConfigError("eki.zeta: " + what);
    throw ConfigError(std::string("eki: ") + what);
  }
  require(c.get_int("grid.n_cells") >= 2, "grid.n_cells: must be >= 2");
  require(c.get_int("grid.max_modes") >= 0, "grid.max_modes: must be >= 0");
  require(c.get_int("observations.count") >= 1, "observations.count: must be >= 1");
  if (c.model_problem == ModelProblem::darcy) {
    const int n = c.get_int("observations.count");
    const int r = static_cast<int>(std::lround(std::sqrt(double(n))));
    require(r * r == n, "observations.count: Darcy observations form a square lattice");
  }
  require(c.get_double("observations.gamma") > 0, "observations.gamma: must be positive");
  require(c.get_double("observations.mollifier_width") > 0,
          "observations.mollifier_width: must be positive");
  auto bounds = [&](const std::string& lo, const std::string& hi) {
    require(c.get_double(lo) < c.get_double(hi), lo + " must be below " + hi);
  };
  bounds("prior.alpha_min", "prior.alpha_max");
  bounds("prior.tau_min", "prior.tau_max");
  for (int k = 1; k <= 5; ++k)
    bounds("channel.d" + std::to_string(k) + "_min", "channel.d" + std::to_string(k) + "_max");
  for (int f = 1; f <= 2; ++f) {
    bounds("channel.alpha" + std::to_string(f) + "_min", "channel.alpha" + std::to_string(f) + "_max");
    bounds("channel.tau" + std::to_string(f) + "_min", "channel.tau" + std::to_string(f) + "_max");
  }
  require(c.get_double("channel.d2_min") > 0, "channel.d2_min: frequency must be positive");
  require(c.get_double("channel.d5_min") > 0, "channel.d5_min: width must be positive");
  const int dim = c.model_problem == ModelProblem::darcy ? 2 : 1;
  require(c.get_double("prior.alpha_min") > dim / 2.0, "prior.alpha_min: must exceed d/2");
  require(c.get_double("prior.tau_min") > 0, "prior.tau_min: must be positive");
  require(c.get_double("prior.fixed_alpha") > dim / 2.0, "prior.fixed_alpha: must exceed d/2");
  require(c.get_double("prior.fixed_tau") > 0, "prior.fixed_tau: must be positive");
  require(c.get_double("prior.fixed_length_scale") > 0,
          "prior.fixed_length_scale: must be positive");
  require(c.get_double("prior.sigma2") > 0, "prior.sigma2: must be positive");
  require(c.get_double("prior.kappa_minus") > 0 && c.get_double("prior.kappa_plus") > 0 &&
              c.get_double("prior.kappa_minus") != c.get_double("prior.kappa_plus"),
          "prior.kappa_minus/kappa_plus: must be positive and distinct");
  const int fa = c.get_int("field_prior.alpha");
  require(fa > 0 && fa % 2 == 0, "field_prior.alpha: must be a positive even integer");
  require(c.get_double("field_prior.v_alpha") > dim / 2.0, "field_prior.v_alpha: must exceed d/2");
  require(c.get_double("field_prior.v_tau") > 0, "field_prior.v_tau: must be positive");
  require(c.get_double("field_prior.v_sigma2") > 0, "field_prior.v_sigma2: must be positive");
  require(c.get_double("field_prior.cauchy_delta") > 0, "field_prior.cauchy_delta: must be positive");
  require(c.get_double("field_prior.g_a") > 0 && c.get_double("field_prior.g_c") > 0,
          "field_prior.g_a/g_c: must be positive");
  require(c.get_double("field_prior.g_b") >= 0 && c.get_double("field_prior.g_d") >= 0,
          "field_prior.g_b/g_d: must be non-negative");
  require(c.get_double("field_prior.g_floor") > 0 &&
              c.get_double("field_prior.g_ceiling") > c.get_double("field_prior.g_floor"),
          "field_prior.g_floor/g_ceiling: need 0 < floor < ceiling");
  const auto p = c.parameterization;
  if (p == ParameterizationKind::channel)
    require(c.model_problem == ModelProblem::darcy, "experiment.parameterization: channel needs darcy");
  if (p == ParameterizationKind::noncentered_field_cauchy)
    require(c.model_problem == ModelProblem::source1d,
            "experiment.parameterization: the Cauchy process prior is one-dimensional");
  if (c.model_problem == ModelProblem::source1d)
    require(c.get_string("prior.coefficient") == "identity",
            "prior.coefficient: the source problem takes u directly (identity)");
  else
    require(c.get_string("prior.coefficient") != "identity",
            "prior.coefficient: Darcy permeability needs exp or level-set");
  if (c.get_string("sample_prior.kind") == "matern") {
    for (double a : c.get_list("sample_prior.alphas"))
      require(a > 1.0, "sample_prior.alphas: Matern samples on the unit square need alpha > 1");
    for (double t : c.get_list("sample_prior.taus"))
      require(t > 0, "sample_prior.taus: must be positive");
  }
  require(c.get_int("sample_prior.n_cells") >= 2, "sample_prior.n_cells: must be >= 2");
  require(c.get_int("sample_prior.count") >= 1, "sample_prior.count: must be >= 1");
}

}  // namespace

std::map<std::string, std::string> parse_ini(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string k = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (k.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + k + "' outside a section");
    const std::string full = section + "." + k;
    if (!out.emplace(full, v).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& s : schema()) k.push_back(s.key);
  return k;
}

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_real(key, get_string(key));
}
int ExperimentConfig::get_int(const std::string& key) const {
  return static_cast<int>(parse_integer(key, get_string(key)));
}
bool ExperimentConfig::get_bool(const std::string& key) const {
  return parse_bool(key, get_string(key));
}
const std::string& ExperimentConfig::get_string(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing configuration key '" + key + "'");
  return it->second;
}
std::vector<double> ExperimentConfig::get_list(const std::string& key) const {
  return parse_list(key, get_string(key));
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream out;
  std::string current;
  for (const auto& s : schema()) {
    const auto dot = s.key.find('.');
    const std::string sec = s.key.substr(0, dot);
    if (sec != current) {
      if (!current.empty()) out << '\n';
      out << '[' << sec << "]\n";
      current = sec;
    }
    out << s.key.substr(dot + 1) << " = " << values.at(s.key) << '\n';
  }
  return out.str();
}

ExperimentConfig resolve_config(const std::string& text,
                                const std::map<std::string, std::string>& overrides) {
  auto raw = parse_ini(text);
  for (const auto& [k, v] : overrides) raw[k] = v;
  for (const auto& [k, v] : raw)
    if (!find_spec(k)) throw ConfigError("unknown configuration key '" + k + "'");

  const auto mp = raw.find("experiment.model_problem");
  if (mp == raw.end()) throw ConfigError("experiment.model_problem is required");
  check_type(*find_spec(mp->first), mp->second);
  Context ctx;
  ctx.problem = mp->second == "darcy" ? ModelProblem::darcy : ModelProblem::source1d;
  const auto pk = raw.find("experiment.parameterization");
  if (pk != raw.end()) {
    check_type(*find_spec(pk->first), pk->second);
    ctx.param = parameterization_from(pk->second);
  } else {
    ctx.param = parameterization_from(find_spec("experiment.parameterization")->fallback(ctx));
  }

  ExperimentConfig c;
  for (const auto& s : schema()) {
    const auto it = raw.find(s.key);
    std::string v = it != raw.end() ? it->second : s.fallback(ctx);
    check_type(s, v);
    c.values[s.key] = v;
  }
  // The resolved zeta is echoed so the run metadata states it explicitly.
  if (c.get_double("eki.zeta") <= 0) {
    std::ostringstream z;
    z.precision(17);
    z << 1.1 / c.get_double("eki.rho");
    c.values["eki.zeta"] = z.str();
  }
  c.model_problem = ctx.problem;
  c.parameterization = ctx.param;
  c.n_ensemble = c.get_int("experiment.n_ensemble");
  c.n_initializations = c.get_int("experiment.n_initializations");
  c.master_seed = static_cast<std::uint64_t>(parse_integer("experiment.master_seed",
                                                           c.get_string("experiment.master_seed")));
  c.output_dir = c.get_string("experiment.output_dir");
  c.parallel = c.get_int("experiment.parallel");
  c.controls.rho = c.get_double("eki.rho");
  c.controls.zeta = c.get_double("eki.zeta");
  c.controls.upsilon0 = c.get_double("eki.upsilon0");
  c.controls.max_iterations = c.get_int("eki.max_iterations");
  c.controls.max_doublings = c.get_int("eki.max_doublings");
  c.controls.perturb_observations = c.get_bool("eki.perturb_observations");
  c.controls.upsilon_mode = c.get_string("eki.upsilon_mode") == "shared" ? UpsilonMode::shared
                                                                          : UpsilonMode::per_member;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return resolve_config(ss.str(), overrides);
}

}  // namespace hieki
