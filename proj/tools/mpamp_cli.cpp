// mpamp: command-line harness for the MP-AMP simulator.
//
//   mpamp run <config>         simulate and write trace.csv / summary.json
//   mpamp se <config>          centralized state evolution only (se.csv)
//   mpamp allocate <config>    rate plan only (plan.csv)
//   mpamp table1 <config-dir>  total-bits table over every *.json in the directory

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mpamp/error.hpp"
#include "mpamp/experiment.hpp"

namespace fs = std::filesystem;
using namespace mpamp;

namespace {

ExperimentConfig load(const std::string& path, const std::vector<std::string>& sets, const std::string& out_dir) {
  ExperimentConfig c = load_config(path, sets);
  if (!out_dir.empty()) c.output_dir = out_dir;
  return c;
}

int cmd_run(const ExperimentConfig& c) {
  const RunReport r = run_experiment_to_files(c);
  const RunSummary& s = r.summary;
  std::printf("mode=%s coder=%s T=%d final SDR centralized=%s dB mp=%s dB total_bits=%s%s\n", s.mode.c_str(),
              s.coder.c_str(), s.T, format_number(s.final_sdr_centralized_db).c_str(),
              format_number(s.final_sdr_mp_db).c_str(), format_number(s.total_bits).c_str(),
              s.diverged ? " (diverged)" : "");
  std::printf("wrote %s\n", (fs::path(c.output_dir) / "trace.csv").string().c_str());
  return 0;
}

int cmd_se(const ExperimentConfig& c) {
  const SeModel model = se_model(c);
  const int T = c.T ? *c.T : c.numerics.T_max;
  const SETrace trace = se_trajectory(model, {}, T, c.numerics.steady_tol_db);
  fs::create_directories(c.output_dir);
  const fs::path path = fs::path(c.output_dir) / "se.csv";
  std::ofstream out(path);
  out << "t,sigma2,sdr_db\n";
  for (std::size_t t = 0; t < trace.sigma2_seq.size(); ++t) {
    out << t << ',' << format_number(trace.sigma2_seq[t]) << ',' << format_number(trace.sdr_seq[t]) << '\n';
  }
  if (trace.steady_state_t) {
    std::printf("steady state at T=%d (SDR %s dB)\n", *trace.steady_state_t,
                format_number(trace.sdr_seq[*trace.steady_state_t]).c_str());
  } else {
    std::printf("no steady state within %d iterations\n", T);
  }
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_allocate(const ExperimentConfig& c) {
  if (c.mode != ExperimentMode::kDp && c.mode != ExperimentMode::kBt) {
    throw ConfigError("mode: allocate needs bt or dp");
  }
  const int T = resolve_T(c);
  auto cache = std::make_shared<RdCurveCache>();
  const std::string cache_path =
      c.numerics.rd_cache.empty() ? "" : (fs::path(c.base_dir) / c.numerics.rd_cache).string();
  if (!cache_path.empty()) cache->load(cache_path);
  const AllocationContext ctx = make_context(c, cache);
  AllocationPlan plan;
  if (c.mode == ExperimentMode::kDp) {
    plan = dp_allocate(se_model(c).sigma2_0(), resolve_R_total(c, T), T, c.delta_R, ctx).plan;
    if (c.coder == CoderKind::kEcsq) plan = plan_to_ecsq(plan);
  } else {
    plan = bt_offline_plan(c, T, ctx);
  }
  if (!cache_path.empty() && cache->size() > 0) cache->save(cache_path);
  fs::create_directories(c.output_dir);
  const fs::path path = fs::path(c.output_dir) / "plan.csv";
  plan.save_csv(path.string());
  for (int t = 0; t < plan.T(); ++t) {
    std::printf("t=%2d R=%s sigma2=%s\n", t + 1, format_number(plan.rates[t]).c_str(),
                format_number(plan.predicted_sigma2[t]).c_str());
  }
  std::printf("total_bits=%s\nwrote %s\n", format_number(plan.total_bits).c_str(), path.string().c_str());
  return 0;
}

int cmd_table1(const std::string& dir, const std::vector<std::string>& sets, const std::string& output) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ExperimentConfig> configs;
  for (const auto& f : files) configs.push_back(load_config(f.string(), sets));
  std::sort(configs.begin(), configs.end(),
            [](const auto& a, const auto& b) { return a.prior.epsilon < b.prior.epsilon; });
  std::vector<Table1Column> columns;
  for (const auto& c : configs) {
    std::fprintf(stderr, "table1: epsilon=%g\n", c.prior.epsilon);
    columns.push_back(table1_column(c));
  }
  const std::string table = table1_csv(columns);
  std::fputs(table.c_str(), stdout);
  if (!output.empty()) {
    const fs::path out(output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << table;
  }
  if (columns.empty()) {
    std::fprintf(stderr, "table1: no configs found in %s\n", dir.c_str());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-processor AMP with lossy message compression"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string table_output = "table1.csv";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--set", sets, "override a config key, e.g. --set problem.seed=7");
    sub->add_option("-o,--output-dir", out_dir, "override output_dir");
  };
  CLI::App* run = app.add_subcommand("run", "simulate an experiment");
  add_common(run);
  CLI::App* se = app.add_subcommand("se", "offline centralized state evolution");
  add_common(se);
  CLI::App* alloc = app.add_subcommand("allocate", "rate plan only");
  add_common(alloc);
  CLI::App* table = app.add_subcommand("table1", "total bits per element for every config in a directory");
  table->add_option("config-dir", config_path, "directory of configs")->required();
  table->add_option("--set", sets, "override a key in every config");
  table->add_option("-o,--output", table_output, "table file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(load(config_path, sets, out_dir));
    if (se->parsed()) return cmd_se(load(config_path, sets, out_dir));
    if (alloc->parsed()) return cmd_allocate(load(config_path, sets, out_dir));
    if (table->parsed()) return cmd_table1(config_path, sets, table_output);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
