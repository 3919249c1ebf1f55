#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hieki/eki.hpp"

namespace hieki {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelProblem { darcy, source1d };

enum class ParameterizationKind {
  plain,
  level_set,
  channel,
  centered_hier,
  noncentered_hier,
  noncentered_field_gauss,
  noncentered_field_cauchy,
};

const char* to_string(ModelProblem m);
const char* to_string(ParameterizationKind p);

/// Parsed INI text: `[section]` headers and `key = value` lines, `#` or `;`
/// comments. Keys are returned as "section.key". Duplicates are errors.
std::map<std::string, std::string> parse_ini(const std::string& text);

/// Fully resolved experiment configuration. Every schema key is present in
/// `values` after loading, with defaults materialized for the chosen model
/// problem; the typed members mirror the most used entries.
struct ExperimentConfig {
  ModelProblem model_problem = ModelProblem::source1d;
  ParameterizationKind parameterization = ParameterizationKind::noncentered_field_gauss;
  int n_ensemble = 200;
  int n_initializations = 10;
  std::uint64_t master_seed = 1;
  std::string output_dir;
  int parallel = 1;
  EkiControls controls;

  std::map<std::string, std::string> values;

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

  /// Canonical INI text of every resolved key, grouped by section.
  std::string to_ini() const;
};

/// Builds a validated configuration from INI text, applying overrides
/// (keys "section.key") after parsing and before defaults are resolved.
ExperimentConfig resolve_config(const std::string& text,
                                const std::map<std::string, std::string>& overrides = {});

ExperimentConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides = {});

/// Every key the schema knows, in canonical order.
std::vector<std::string> config_keys();

}  // namespace hieki
