#include "stratsim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "stratsim/json_io.hpp"

namespace stratsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_path(const std::string& path, const std::string& data_dir) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
  std::string dir = data_dir;
  if (dir.empty())
    if (const char* env = std::getenv("STRATSIM_DATA_DIR")) dir = env;
  if (dir.empty()) return path;
  return (fs::path(dir) / path).string();
}

TiePolicy parse_tie_policy(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "even_split") return TiePolicy::even_split();
    if (s == "lowest_index") return TiePolicy::lowest_index();
    throw ConfigError("unknown tie_policy '" + s + "'");
  }
  if (j.is_object() && j.contains("concentrate"))
    return TiePolicy::concentrate(j["concentrate"].value("seed", 0ULL));
  throw ConfigError("tie_policy must be a name or {\"concentrate\": {\"seed\": n}}");
}

ColumnSpec::Role parse_role(const std::string& role) {
  if (role == "feature") return ColumnSpec::Role::Feature;
  if (role == "categorical") return ColumnSpec::Role::Categorical;
  if (role == "label") return ColumnSpec::Role::Label;
  if (role == "ignore") return ColumnSpec::Role::Ignore;
  throw ConfigError("unknown column role '" + role + "'");
}

FamilySpec parse_family(const json& j) {
  const std::string kernel = j.value("kernel", "rbf");
  if (kernel == "rbf") return FamilySpec::kernel(KernelSpec::rbf(j.value("gamma", 1.0)));
  if (kernel == "linear_kernel") return FamilySpec::kernel(KernelSpec::linear());
  if (kernel == "linear") return FamilySpec::linear(FeatureMap::AppendOne);
  throw ConfigError("model.kernel must be rbf, linear or linear_kernel");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

std::string format_cell_name(double p, double q, int m, std::uint64_t seed) {
  std::ostringstream name;
  name << "p" << p << "_q" << q << "_m" << m << "_s" << seed;
  return name.str();
}

}  // namespace

RunConfig parse_config(const json& doc, const std::string& data_dir) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  if (!doc.contains("schema_version"))
    throw ConfigError("config is missing schema_version");
  if (doc["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError("unsupported schema_version (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (!doc.contains("scenario")) throw ConfigError("config is missing scenario");

  RunConfig cfg;
  const json& sc = doc["scenario"];
  if (sc.contains("builtin")) {
    cfg.builtin = sc["builtin"].get<std::string>();
    cfg.builtin_size = sc.value("size", 0);
  } else if (sc.contains("csv")) {
    const json& csv = sc["csv"];
    if (!csv.contains("path")) throw ConfigError("scenario.csv needs a path");
    cfg.csv_path = resolve_path(csv["path"].get<std::string>(), data_dir);
    cfg.schema.has_header = csv.value("header", true);
    if (csv.contains("columns"))
      for (const auto& col : csv["columns"])
        cfg.schema.columns.push_back(
            {col.value("name", ""), parse_role(col.value("role", "feature"))});
    if (csv.contains("label_map"))
      for (const auto& [key, value] : csv["label_map"].items())
        cfg.schema.label_map[key] = value.get<int>();
    cfg.prep.normalize = csv.value("normalize", false);
    if (csv.contains("realizability_filter"))
      cfg.prep.filter_C = csv["realizability_filter"].value("C", 1.0);
    if (csv.contains("subsample")) {
      const int per_class = csv["subsample"].value("per_class", 0);
      if (per_class <= 0) throw ConfigError("subsample.per_class must be positive");
      cfg.prep.subsample_per_class = per_class;
      if (csv["subsample"].contains("seed"))
        cfg.prep.subsample_seed = csv["subsample"]["seed"].get<std::uint64_t>();
    }
  } else {
    throw ConfigError("scenario must specify builtin or csv");
  }

  if (doc.contains("services")) {
    cfg.m = doc["services"].value("m", 1);
    cfg.reveal_seed = doc["services"].value("reveal_seed", 100ULL);
  }
  if (doc.contains("model")) cfg.family = parse_family(doc["model"]);

  if (doc.contains("dynamics")) {
    const json& dyn = doc["dynamics"];
    cfg.dynamics.p = dyn.value("p", cfg.dynamics.p);
    cfg.dynamics.q = dyn.value("q", cfg.dynamics.q);
    cfg.dynamics.zero_tol = dyn.value("zero_tol", cfg.dynamics.zero_tol);
    cfg.dynamics.tie_tol = dyn.value("tie_tol", cfg.dynamics.tie_tol);
    cfg.dynamics.max_steps = dyn.value("max_steps", 0);
    if (dyn.contains("tie_policy"))
      cfg.dynamics.user_tie_policy = parse_tie_policy(dyn["tie_policy"]);
  }
  if (doc.contains("trainer")) {
    const json& tr = doc["trainer"];
    const std::string solver = tr.value("solver", "dual_ascent");
    if (solver == "dual_ascent")
      cfg.trainer.solver = TrainerConfig::Solver::DualAscent;
    else if (solver == "projected_gradient")
      cfg.trainer.solver = TrainerConfig::Solver::ProjectedGradient;
    else
      throw ConfigError("trainer.solver must be dual_ascent or projected_gradient");
    cfg.trainer.max_iter = tr.value("max_iter", cfg.trainer.max_iter);
    cfg.trainer.kkt_tol = tr.value("kkt_tol", cfg.trainer.kkt_tol);
  }
  if (doc.contains("output")) cfg.out_dir = doc["output"].value("dir", cfg.out_dir);
  if (cfg.dynamics.q <= 1.0) throw ConfigError("dynamics.q must be > 1");
  if (cfg.dynamics.p < 0.0) throw ConfigError("dynamics.p must be >= 0");
  return cfg;
}

SweepAxes parse_sweep(const json& doc) {
  SweepAxes axes;
  if (!doc.contains("sweep")) throw ConfigError("config has no sweep section");
  const json& sw = doc["sweep"];
  if (sw.contains("p")) axes.p = sw["p"].get<std::vector<double>>();
  if (sw.contains("q")) axes.q = sw["q"].get<std::vector<double>>();
  if (sw.contains("m")) axes.m = sw["m"].get<std::vector<int>>();
  if (sw.contains("seed")) axes.seed = sw["seed"].get<std::vector<std::uint64_t>>();
  axes.jobs = sw.value("jobs", 0);
  if (axes.p.empty() && axes.q.empty() && axes.m.empty() && axes.seed.empty())
    throw ConfigError("sweep section lists no axes");
  return axes;
}

namespace {

struct Prepared {
  Dataset dataset;
  SimState initial;
  DynamicsConfig dynamics;
  TrainerConfig trainer;
  LossSpec loss_spec;
  bool filtered = false;
  std::vector<int> removed_by_filter;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared prep;
  prep.trainer = cfg.trainer;
  if (!cfg.builtin.empty()) {
    Scenario sc = builtin_scenario(cfg.builtin, cfg.builtin_size);
    prep.dataset = std::move(sc.dataset);
    prep.dynamics = sc.config;
    prep.dynamics.p = cfg.dynamics.p;
    prep.dynamics.q = cfg.dynamics.q;
    prep.dynamics.zero_tol = cfg.dynamics.zero_tol;
    prep.dynamics.tie_tol = cfg.dynamics.tie_tol;
    prep.dynamics.max_steps = cfg.dynamics.max_steps;
    prep.loss_spec = sc.loss_spec;
    prep.initial = make_initial_state(std::move(sc.models), prep.dataset, prep.loss_spec,
                                      prep.dynamics);
    return prep;
  }

  LoadResult loaded = load_csv(cfg.csv_path, cfg.schema, cfg.prep);
  prep.dataset = std::move(loaded.dataset);
  prep.filtered = cfg.prep.filter_C.has_value();
  prep.removed_by_filter = std::move(loaded.removed_by_filter);
  prep.dynamics = cfg.dynamics;
  prep.loss_spec = cfg.loss_spec;

  prep.initial = seeded_initial_state(prep.dataset, cfg.m, cfg.reveal_seed, cfg.family,
                                      prep.loss_spec, prep.dynamics, prep.trainer);
  return prep;
}

void write_outputs(const fs::path& dir, const RunResult& result, const Prepared& prep) {
  // summary.json: verdict plus final per-service accounting
  OrderedJson summary;
  summary["schema_version"] = kSchemaVersion;
  summary["verdict"] = verdict_to_json(result.verdict);
  summary["steps_recorded"] = result.trajectory.size();
  const StepReport& last = result.trajectory.back();
  summary["final"] = step_report_to_json(last, prep.dataset);
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  // plot tables: loss and class usage against the step index
  std::ostringstream loss_tsv, usage_tsv;
  loss_tsv << "step";
  usage_tsv << "step";
  for (int j = 0; j < last.state.m(); ++j) {
    loss_tsv << "\tservice" << j;
    usage_tsv << "\tservice" << j << "_pos\tservice" << j << "_neg";
  }
  loss_tsv << "\n";
  usage_tsv << "\n";
  for (const StepReport& report : result.trajectory) {
    loss_tsv << report.state.step_index;
    usage_tsv << report.state.step_index;
    for (int j = 0; j < report.state.m(); ++j) {
      loss_tsv << '\t' << report.per_service_loss(j);
      double pos = 0.0, neg = 0.0;
      for (int i = 0; i < report.state.n(); ++i)
        (prep.dataset.y(i) == 1 ? pos : neg) += report.state.usage(i, j);
      usage_tsv << '\t' << pos << '\t' << neg;
    }
    loss_tsv << "\n";
    usage_tsv << "\n";
  }
  write_text(dir / "loss_vs_step.tsv", loss_tsv.str());
  write_text(dir / "usage_vs_step.tsv", usage_tsv.str());

  if (prep.filtered) {
    std::ostringstream report;
    for (int row : prep.removed_by_filter) {
      OrderedJson record;
      record["row"] = row;
      record["reason"] = "misclassified under soft-margin fit";
      report << record.dump() << "\n";
    }
    write_text(dir / "filter_report.jsonl", report.str());
  }
}

}  // namespace

Verdict execute_run(const RunConfig& cfg) {
  Prepared prep = prepare(cfg);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);

  std::ofstream stream(dir / "trajectory.jsonl");
  if (!stream) throw ConfigError("cannot write trajectory in '" + cfg.out_dir + "'");
  StepSink sink = [&](const StepReport& report) {
    stream << step_report_to_json(report, prep.dataset).dump() << "\n";
    stream.flush();  // keep the stream usable while the run is in flight
  };

  RunResult result =
      run(prep.initial, prep.dataset, prep.loss_spec, prep.dynamics, prep.trainer, sink);
  write_outputs(dir, result, prep);
  return result.verdict;
}

int execute_sweep(const RunConfig& base, const SweepAxes& axes) {
  // Cross product with absent axes pinned to the base config's value.
  const std::vector<double> ps = axes.p.empty() ? std::vector<double>{base.dynamics.p} : axes.p;
  const std::vector<double> qs = axes.q.empty() ? std::vector<double>{base.dynamics.q} : axes.q;
  const std::vector<int> ms = axes.m.empty() ? std::vector<int>{base.m} : axes.m;
  const std::vector<std::uint64_t> seeds =
      axes.seed.empty() ? std::vector<std::uint64_t>{base.reveal_seed} : axes.seed;

  struct Cell {
    RunConfig cfg;
    std::string name;
    std::string verdict;
    std::string error;
  };
  std::vector<Cell> cells;
  for (double p : ps)
    for (double q : qs)
      for (int m : ms)
        for (std::uint64_t seed : seeds) {
          Cell cell;
          cell.cfg = base;
          cell.cfg.dynamics.p = p;
          cell.cfg.dynamics.q = q;
          cell.cfg.m = m;
          cell.cfg.reveal_seed = seed;
          cell.name = format_cell_name(p, q, m, seed);
          cell.cfg.out_dir = (fs::path(base.out_dir) / cell.name).string();
          cells.push_back(std::move(cell));
        }

  unsigned jobs = axes.jobs > 0 ? static_cast<unsigned>(axes.jobs)
                                : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cells.size()));

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t at = cursor.fetch_add(1);
      if (at >= cells.size()) return;
      Cell& cell = cells[at];
      try {
        const Verdict verdict = execute_run(cell.cfg);
        cell.verdict = verdict_to_json(verdict)["kind"].get<std::string>();
      } catch (const std::exception& err) {
        cell.error = err.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  fs::create_directories(base.out_dir);
  std::ostringstream table;
  table << "cell\tstatus\tverdict_or_error\n";
  int failures = 0;
  for (const Cell& cell : cells) {
    if (cell.error.empty()) {
      table << cell.name << "\tok\t" << cell.verdict << "\n";
    } else {
      table << cell.name << "\tfailed\t" << cell.error << "\n";
      ++failures;
    }
  }
  write_text(fs::path(base.out_dir) / "sweep_summary.tsv", table.str());
  return failures;
}

std::vector<std::string> validate_config(const json& doc, const std::string& data_dir) {
  std::vector<std::string> problems;
  RunConfig cfg;
  try {
    cfg = parse_config(doc, data_dir);
  } catch (const std::exception& err) {
    problems.emplace_back(err.what());
    return problems;
  }
  if (!cfg.csv_path.empty() && !fs::exists(cfg.csv_path))
    problems.push_back("csv file not found: " + cfg.csv_path);
  if (!cfg.builtin.empty()) {
    const auto names = builtin_scenario_names();
    if (std::find(names.begin(), names.end(), cfg.builtin) == names.end())
      problems.push_back("unknown builtin scenario: " + cfg.builtin);
  }
  if (doc.contains("sweep")) {
    try {
      parse_sweep(doc);
    } catch (const std::exception& err) {
      problems.emplace_back(err.what());
    }
  }
  return problems;
}

}  // namespace stratsim::cli
