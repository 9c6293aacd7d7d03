#include <exception>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stratsim/cli.hpp"
#include "stratsim/data.hpp"
#include "stratsim/json_io.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw stratsim::cli::ConfigError("cannot open config '" + path + "'");
  nlohmann::json doc;
  in >> doc;
  return doc;
}

struct Overrides {
  double p = -1.0;
  double q = -1.0;
  int m = 0;
  std::int64_t seed = -1;
  int max_steps = -1;
  std::string out_dir;

  void apply(stratsim::cli::RunConfig& cfg) const {
    if (p >= 0.0) cfg.dynamics.p = p;
    if (q > 0.0) cfg.dynamics.q = q;
    if (m > 0) cfg.m = m;
    if (seed >= 0) cfg.reveal_seed = static_cast<std::uint64_t>(seed);
    if (max_steps >= 0) cfg.dynamics.max_steps = max_steps;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
  }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--p", ov.p, "override dynamics.p");
  cmd->add_option("--q", ov.q, "override dynamics.q");
  cmd->add_option("--m", ov.m, "override service count");
  cmd->add_option("--seed", ov.seed, "override reveal seed");
  cmd->add_option("--max-steps", ov.max_steps, "override step budget");
  cmd->add_option("--out", ov.out_dir, "override output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strategic-usage simulation driver"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_dir;
  Overrides ov;
  int jobs = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "execute one simulation run");
  run_cmd->add_option("--config", config_path, "JSON config file")->required();
  run_cmd->add_option("--data-dir", data_dir, "directory for relative CSV paths");
  add_override_flags(run_cmd, ov);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the config's sweep grid");
  sweep_cmd->add_option("--config", config_path, "JSON config file")->required();
  sweep_cmd->add_option("--data-dir", data_dir, "directory for relative CSV paths");
  sweep_cmd->add_option("--jobs", jobs, "worker pool size (0 = hardware)");
  add_override_flags(sweep_cmd, ov);

  CLI::App* scenario_cmd = app.add_subcommand("scenario", "builtin scenario tools");
  CLI::App* list_cmd = scenario_cmd->add_subcommand("list", "list builtin scenarios");
  scenario_cmd->require_subcommand(1);

  CLI::App* validate_cmd = app.add_subcommand("validate", "lint a config file");
  validate_cmd->add_option("--config", config_path, "JSON config file")->required();
  validate_cmd->add_option("--data-dir", data_dir, "directory for relative CSV paths");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list_cmd->parsed()) {
      for (const std::string& name : stratsim::builtin_scenario_names())
        std::cout << name << "\n";
      return 0;
    }

    const nlohmann::json doc = load_config(config_path);

    if (validate_cmd->parsed()) {
      const auto problems = stratsim::cli::validate_config(doc, data_dir);
      for (const std::string& problem : problems) std::cout << problem << "\n";
      if (problems.empty()) std::cout << "config ok\n";
      return problems.empty() ? 0 : 1;
    }

    stratsim::cli::RunConfig cfg = stratsim::cli::parse_config(doc, data_dir);
    ov.apply(cfg);

    if (run_cmd->parsed()) {
      const stratsim::Verdict verdict = stratsim::cli::execute_run(cfg);
      std::cout << stratsim::verdict_to_json(verdict).dump() << "\n";
      return 0;  // a completed run is success regardless of verdict
    }

    stratsim::cli::SweepAxes axes = stratsim::cli::parse_sweep(doc);
    if (jobs > 0) axes.jobs = jobs;
    const int failed = stratsim::cli::execute_sweep(cfg, axes);
    if (failed > 0) std::cerr << failed << " sweep cell(s) failed\n";
    return failed == 0 ? 0 : 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}
