#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hieki/config.hpp"
#include "hieki/experiment.hpp"

namespace {

struct Overrides {
  std::optional<long long> seed;
  std::optional<std::string> out_dir;
  std::optional<int> parallel;
  std::optional<int> max_iter;

  std::map<std::string, std::string> as_map() const {
    std::map<std::string, std::string> m;
    if (seed) m["experiment.master_seed"] = std::to_string(*seed);
    if (out_dir) m["experiment.output_dir"] = *out_dir;
    if (parallel) m["experiment.parallel"] = std::to_string(*parallel);
    if (max_iter) m["eki.max_iterations"] = std::to_string(*max_iter);
    return m;
  }
};

void add_overrides(CLI::App* cmd, Overrides& o, bool run_flags) {
  cmd->add_option("--seed", o.seed, "master seed (overrides experiment.master_seed)");
  cmd->add_option("--out-dir", o.out_dir, "output directory (overrides experiment.output_dir)");
  if (!run_flags) return;
  cmd->add_option("--parallel", o.parallel, "worker threads (overrides experiment.parallel)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", o.max_iter, "iteration budget (overrides eki.max_iterations)")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical ensemble Kalman inversion experiments"};
  app.require_subcommand(1);

  std::string config_path, run_dir;
  Overrides o;

  auto* run = app.add_subcommand("run", "run all initializations of an experiment");
  run->add_option("config", config_path, "configuration file")->required();
  add_overrides(run, o, true);

  auto* sample = app.add_subcommand("sample-prior", "write prior realizations as gridded CSV");
  sample->add_option("config", config_path, "configuration file")->required();
  add_overrides(sample, o, false);

  auto* validate = app.add_subcommand("validate", "check a configuration and echo it resolved");
  validate->add_option("config", config_path, "configuration file")->required();
  add_overrides(validate, o, true);

  auto* report = app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("run-dir", run_dir, "directory written by `run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*report) {
      std::cout << hieki::report_run(run_dir).to_text();
      return 0;
    }
    const hieki::ExperimentConfig cfg = hieki::load_config(config_path, o.as_map());
    if (*validate) {
      std::cout << cfg.to_ini();
      return 0;
    }
    if (*sample) {
      for (const auto& p : hieki::sample_prior_fields(cfg)) std::cout << p.string() << '\n';
      return 0;
    }
    const auto result = hieki::run_experiment(cfg);
    int aborted = 0;
    for (const auto& init : result.initializations) {
      std::cout << "init " << init.index << ": " << hieki::to_string(init.stop_reason)
                << " after " << (init.records.empty() ? 0 : init.records.back().iteration)
                << " iterations, misfit " << init.final_misfit();
      if (auto e = init.final_rel_error()) std::cout << ", relative error " << *e;
      std::cout << '\n';
      if (init.stop_reason == hieki::StopReason::aborted) {
        ++aborted;
        std::cerr << "init " << init.index << " aborted: " << init.diagnostic << '\n';
      }
    }
    std::cout << "outputs in " << result.directory.string() << '\n';
    if (aborted) std::cerr << aborted << " initialization(s) aborted\n";
    return 0;
  } catch (const hieki::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
