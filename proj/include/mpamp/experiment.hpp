#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpamp/allocation.hpp"
#include "mpamp/simulation.hpp"

namespace mpamp {

enum class ExperimentMode { kCentralized, kMpUncompressed, kBt, kDp };

struct NumericsConfig {
  double steady_tol_db = 0.1;
  int quad_order = 16;
  int ba_points = 2001;
  double ba_tol_bits = 1e-7;
  /// "ba" (tabulated Blahut-Arimoto curves) or "gaussian".
  std::string rd_backend = "ba";
  int rd_nodes_per_octave = 2;
  ChannelVarianceSource channel = ChannelVarianceSource::kOnline;
  /// Curve cache file; empty disables persistence. Relative paths resolve against the config file.
  std::string rd_cache;
  /// Iteration cap when T is "auto".
  int T_max = 200;
};

struct ExperimentConfig {
  ProblemConfig problem;
  SignalPrior prior{0.05, 0.0, 1.0};
  ExperimentMode mode = ExperimentMode::kCentralized;
  CoderKind coder = CoderKind::kEcsq;
  /// Empty means "auto" (SE steady state).
  std::optional<int> T;
  BTPolicy bt;
  BtReference bt_reference = BtReference::kTrajectory;
  /// Empty means "2T".
  std::optional<double> R_total;
  double delta_R = 0.1;
  NumericsConfig numerics;
  std::string output_dir = "out";
  /// Directory of the config file, for resolving relative paths.
  std::string base_dir = ".";
  /// The parsed document after overrides, echoed into summaries.
  std::string echo_json;

  void validate() const;
};

/// Parses a JSON config. `overrides` are "dotted.key=value" assignments applied before
/// validation; values are parsed as JSON and fall back to strings. Throws ConfigError naming the field.
ExperimentConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides = {},
                              const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::string mode_name(ExperimentMode mode);
std::string coder_name(CoderKind coder);

SeModel se_model(const ExperimentConfig& config);
/// Explicit T, or the SE steady-state iteration for "auto".
int resolve_T(const ExperimentConfig& config);
double resolve_R_total(const ExperimentConfig& config, int T);

/// Allocation context with the configured rate-distortion backend; curves go through `cache`.
AllocationContext make_context(const ExperimentConfig& config, std::shared_ptr<RdCurveCache> cache);

/// Offline BT plan driven by SE predictions instead of a simulation.
AllocationPlan bt_offline_plan(const ExperimentConfig& config, int T, const AllocationContext& ctx);

struct TraceRow {
  int t = 0;
  double rate_bits = 0.0;
  double hq_bits = 0.0;
  double sigma2_C = 0.0;
  double sigma2_D_pred = 0.0;
  double sigma2_D_emp = 0.0;
  double sdr_C_db = 0.0;
  double sdr_D_db = 0.0;
  double cum_bits = 0.0;
};

struct RunSummary {
  std::string mode;
  std::string coder;
  int T = 0;
  double final_sdr_centralized_db = 0.0;
  double final_sdr_mp_db = 0.0;
  /// Headline per-element per-processor total: the plan total for DP, the measured total otherwise.
  double total_bits = 0.0;
  /// Sum of the trace's rate_bits column.
  double measured_total_bits = 0.0;
  double hq_total_bits = 0.0;
  double rd_total_bits = 0.0;
  std::optional<double> plan_total_bits;
  double aggregate_total_bits = 0.0;
  bool diverged = false;
};

struct RunReport {
  std::vector<TraceRow> trace;
  RunSummary summary;
  std::optional<AllocationPlan> plan;
};

/// Runs the configured experiment in memory.
RunReport run_experiment(const ExperimentConfig& config);
/// run_experiment plus trace.csv, summary.json (and plan.csv for DP) under config.output_dir.
RunReport run_experiment_to_files(const ExperimentConfig& config);

std::string format_number(double value);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string summary_json(const RunSummary& summary, const ExperimentConfig& config);

struct Table1Column {
  double epsilon = 0.0;
  int T = 0;
  std::optional<double> bt_rd;
  std::optional<double> bt_ecsq;
  std::optional<double> dp_rd;
  std::optional<double> dp_ecsq;
};

/// Published totals for the three sparsity levels, keyed by row name then epsilon.
const std::map<std::string, std::map<double, double>>& table1_reference();

/// One column per config: BT simulated with the ECSQ coder (measured and RD-equivalent totals)
/// and the DP plan (RD and ECSQ-convention totals).
Table1Column table1_column(const ExperimentConfig& config);
std::string table1_csv(const std::vector<Table1Column>& columns);

}  // namespace mpamp
