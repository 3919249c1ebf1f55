#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hieki/config.hpp"
#include "hieki/model.hpp"

namespace hieki {

inline constexpr const char* kVersion = "hieki 0.1.0";

/// Piecewise source with smooth and rough parts on [0, 10]:
/// exp(4 - 25 / (x (5 - x))) on (0, 5), 1 on [7, 8], -1 on (8, 9], else 0.
double step_truth(double x);
Field<double> step_truth_field(const Domain& d);

struct Truth {
  Field<double> unknown;      // what reconstructions are compared against
  Field<double> coefficient;  // what the PDE sees
  std::vector<std::pair<std::string, double>> hypers;
};

/// Everything a run needs that does not depend on the initialization.
struct Setup {
  ExperimentConfig config;
  Domain physical;
  std::shared_ptr<const Parameterization> param;
  std::shared_ptr<const PdeObserver> pde;
  ObservationModel data;
  Truth truth;
};

std::shared_ptr<const Parameterization> make_parameterization(const ExperimentConfig& c);
PdeObserver make_observer(const ExperimentConfig& c);
Truth make_truth(const ExperimentConfig& c);
Domain physical_domain(const ExperimentConfig& c);
SpectralBasis<double> prior_basis(const ExperimentConfig& c);
Setup build_setup(const ExperimentConfig& c);

struct Metrics {
  double relative_error = 0.0;
  double misfit = 0.0;
};

/// Grid L2 relative error ||estimate - truth|| / ||truth||; zero truth rejected.
double relative_error(const Field<double>& estimate, const Field<double>& truth);

/// Relative error of the mean field and whitened misfit of the ensemble-mean
/// forward output.
Metrics compute_metrics(const Field<double>& mean_field, const Field<double>& truth,
                        const Observations<double>& obs, const Matrix<double>& outputs);

/// Ensemble mean of the decoded unknowns, hyperparameters, and (for
/// function-valued hyperparameters) length scales.
struct EnsembleSummary {
  Field<double> mean_unknown;
  std::vector<std::pair<std::string, double>> hyper_means;
  std::optional<Field<double>> mean_length_scale;
};
EnsembleSummary summarize_ensemble(const Parameterization& param, const Matrix<double>& members);
EnsembleSummary summarize_decoded(const Domain& domain, const std::vector<Decoded>& decoded);

std::uint64_t initialization_seed(std::uint64_t master, int index);
Ensemble<double> initial_ensemble(const Parameterization& param, int n_members,
                                  std::uint64_t init_seed);

struct InitializationOutcome {
  int index = 0;
  std::uint64_t seed = 0;
  StopReason stop_reason = StopReason::max_iterations;
  std::string diagnostic;
  std::vector<IterationRecord> records;
  std::vector<std::string> hyper_columns;
  std::vector<Field<double>> mean_history;  // mean unknown per recorded iteration
  std::optional<Field<double>> final_length_scale;
  Field<double> final_mean;

  double final_misfit() const { return records.empty() ? 0.0 : records.back().misfit; }
  std::optional<double> final_rel_error() const {
    return records.empty() ? std::nullopt : records.back().rel_error;
  }
};

/// Draws the initial ensemble and runs the inversion for one initialization;
/// `threads` forward evaluations run concurrently.
InitializationOutcome run_initialization(const Setup& s, int index, int threads = 1);

/// Iterations shown as snapshots: first, last and evenly spaced in between.
std::vector<int> snapshot_iterations(int last_iteration, int count);

struct RunResult {
  std::filesystem::path directory;
  std::vector<InitializationOutcome> initializations;
  std::vector<std::string> files;
};

/// Runs every initialization and writes the output tree (see README).
RunResult run_experiment(const ExperimentConfig& c);

/// Summary statistics over the initializations of a finished run directory.
struct ReportRow {
  std::string quantity;
  double min = 0, median = 0, max = 0;
};
struct Report {
  int initializations = 0;
  int discrepancy_stops = 0;
  std::vector<ReportRow> rows;
  std::string to_text() const;
};
Report report_run(const std::filesystem::path& run_dir);

/// Prior realizations for the sample-prior subcommand: one CSV per setting.
std::vector<std::filesystem::path> sample_prior_fields(const ExperimentConfig& c);

double median(std::vector<double> v);

}  // namespace hieki
