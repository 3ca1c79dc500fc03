// planex: run, sweep and check randomized-reward exploration experiments.
//
//   planex run   --config cfg.json --out dir
//   planex sweep --config sweep.json --out dir
//   planex check --config cfg.json --runs a.csv b.csv [--out report.json]
//
// Exit status is nonzero iff a deterministic invariant fails (or the input is
// unusable).

#include "planex/diagnostics.hpp"
#include "planex/driver.hpp"
#include "planex/json_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace planex;

namespace {

constexpr int kInvariantFailure = 2;
constexpr int kUsageFailure = 1;

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = ExperimentConfig::from_json(json_io::read_file(config_path));
  fs::create_directories(out_dir);
  const std::string csv_path = (fs::path(out_dir) / "run.csv").string();

  // Rows are streamed so a failed run still leaves its prefix on disk.
  std::ofstream csv(csv_path);
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << '\n';
  auto sink = [&csv](const IterationRow& row) {
    RunRecord one;
    one.rows.push_back(row);
    const std::string text = to_csv(one);
    csv << text.substr(text.find('\n') + 1);
    csv.flush();
  };

  RunRecord rec;
  try {
    rec = run_experiment(cfg, sink);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariantFailure;
  }
  nlohmann::json summary = run_summary(rec);
  summary["config"] = cfg.to_json();
  json_io::write_file((fs::path(out_dir) / "summary.json").string(), summary);

  const double margin = potential_margin(rec);
  std::cout << rec.agent << " on " << rec.world << ": K=" << rec.K << " v*=" << rec.v_star
            << " final regret=" << (rec.rows.empty() ? 0.0 : rec.rows.back().cum_regret)
            << " potential margin=" << margin << '\n';
  return margin >= -kPotentialTolerance ? 0 : kInvariantFailure;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  const auto doc = json_io::read_file(config_path);
  const auto items = expand_sweep(doc);
  fs::create_directories(out_dir);

  // Group by everything except the seed for the slope summaries.
  std::map<std::string, std::vector<RunRecord>> groups;
  nlohmann::json runs = nlohmann::json::array();
  bool failed = false;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    RunRecord rec;
    try {
      rec = run_experiment(item.config);
    } catch (const InvariantViolation& e) {
      std::cerr << item.label << ": invariant violated: " << e.what() << '\n';
      failed = true;
      continue;
    }
    const std::string name = "run_" + std::to_string(i) + ".csv";
    write_csv((fs::path(out_dir) / name).string(), rec);
    nlohmann::json s = run_summary(rec);
    s["label"] = item.label;
    s["csv"] = name;
    runs.push_back(s);
    if (potential_margin(rec) < -kPotentialTolerance) failed = true;
    const auto cut = item.label.rfind("seed=");
    groups[item.label.substr(0, cut)].push_back(std::move(rec));
    std::cout << item.label << " done\n";
  }

  nlohmann::json grouped = nlohmann::json::object();
  for (const auto& [key, recs] : groups) {
    const DiagnosticsReport rep = diagnose(recs);
    nlohmann::json g = rep.to_json();
    std::vector<double> finals;
    for (const auto& r : recs) finals.push_back(r.rows.back().cum_regret);
    g["final_regret"] = finals;
    grouped[key.empty() ? "all" : key] = g;
    if (!rep.ok()) failed = true;
  }
  json_io::write_file((fs::path(out_dir) / "summary.json").string(),
                      nlohmann::json{{"runs", runs}, {"groups", grouped}});
  return failed ? kInvariantFailure : 0;
}

int cmd_check(const std::string& config_path, const std::vector<std::string>& csvs,
              const std::string& out_path) {
  const ExperimentConfig cfg = ExperimentConfig::from_json(json_io::read_file(config_path));
  const KnrWorld world = world_from_config(cfg.world);
  const ValueEstimate vs = estimate_v_star(cfg, world);
  std::vector<RunRecord> recs;
  for (const auto& path : csvs) {
    RunRecord r = read_csv(path);
    r.agent = to_string(cfg.agent);
    r.world = world.name();
    r.horizon = world.horizon();
    r.feature_dim = world.feature_dim();
    r.lambda_reg = cfg.lambda_reg;
    r.v_star = vs.mean;
    r.v_star_se = vs.std_error;
    recs.push_back(std::move(r));
  }
  DiagnosticsOptions opts;
  opts.tolerance_se = cfg.optimism_tolerance_se;
  const DiagnosticsReport rep = diagnose(recs, opts);
  std::cout << rep.to_table();
  if (!out_path.empty()) json_io::write_file(out_path, rep.to_json());
  return rep.ok() ? 0 : kInvariantFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized-reward exploration under KNR dynamics"};
  app.require_subcommand(1);

  std::string config, out;
  std::vector<std::string> runs;

  auto* run = app.add_subcommand("run", "Run one configuration and write run.csv + summary.json");
  run->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run a grid over seeds and parameters");
  sweep->add_option("--config", config, "Sweep document (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory")->required();

  auto* check = app.add_subcommand("check", "Run the diagnostics over existing run CSVs");
  check->add_option("--config", config, "Config the runs were produced with")->required()->check(CLI::ExistingFile);
  check->add_option("--runs", runs, "Run CSV files")->required()->check(CLI::ExistingFile);
  check->add_option("--out", out, "Write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out);
    if (*sweep) return cmd_sweep(config, out);
    if (*check) return cmd_check(config, runs, out);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariantFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageFailure;
  }
  return kUsageFailure;
}
