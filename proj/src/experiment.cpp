#include "mpamp/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "mpamp/error.hpp"

namespace mpamp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCodeVersion = "0.1.0";

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw ConfigError(field + ": " + why);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad_field(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad_field(where.empty() ? key : where + "." + key, "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  bad_field(path + key, "expected a number");
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad_field(path + key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) bad_field(path + key, "expected a string");
  return v.get<std::string>();
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer;
  std::stringstream parts(key);
  std::string part;
  while (std::getline(parts, part, '.')) pointer += "/" + part;
  doc[json::json_pointer(pointer)] = value;
}

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string resolve_path(const ExperimentConfig& config, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative()) p = fs::path(config.base_dir) / p;
  return p.string();
}

std::shared_ptr<RdCurveCache> open_cache(const ExperimentConfig& config) {
  auto cache = std::make_shared<RdCurveCache>();
  if (!config.numerics.rd_cache.empty()) cache->load(resolve_path(config, config.numerics.rd_cache));
  return cache;
}

void close_cache(const ExperimentConfig& config, const RdCurveCache& cache) {
  if (!config.numerics.rd_cache.empty() && cache.size() > 0) cache.save(resolve_path(config, config.numerics.rd_cache));
}

std::vector<double> centralized_se(const ExperimentConfig& config, int T) {
  return se_trajectory(se_model(config), {}, T, config.numerics.steady_tol_db).sigma2_seq;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    prior.validate();
    problem.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  if (T && *T < 1) bad_field("T", "must be at least 1");
  try {
    bt.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (R_total && !(*R_total >= 0.0)) bad_field("dp.R_total", "must be nonnegative");
  if (!(delta_R > 0.0)) bad_field("dp.delta_R", "must be positive");
  if (!(numerics.steady_tol_db > 0.0)) bad_field("numerics.steady_tol_db", "must be positive");
  if (numerics.quad_order < 2) bad_field("numerics.quad_order", "must be at least 2");
  if (numerics.ba_points < 101 || numerics.ba_points % 2 == 0) bad_field("numerics.ba_points", "must be odd and >= 101");
  if (!(numerics.ba_tol_bits > 0.0)) bad_field("numerics.ba_tol", "must be positive");
  if (numerics.rd_backend != "ba" && numerics.rd_backend != "gaussian") {
    bad_field("numerics.rd_backend", "expected \"ba\" or \"gaussian\"");
  }
  if (numerics.rd_nodes_per_octave < 1) bad_field("numerics.rd_nodes_per_octave", "must be at least 1");
  if (numerics.T_max < 1) bad_field("numerics.T_max", "must be at least 1");
}

ExperimentConfig parse_config(const std::string& json_text, const std::vector<std::string>& overrides,
                              const std::string& base_dir) {
  json doc = json::parse(json_text, nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError("config is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  check_keys(doc, "", {"problem", "mode", "coder", "T", "bt", "dp", "numerics", "output_dir", "comment"});

  ExperimentConfig c;
  c.base_dir = base_dir;
  c.echo_json = doc.dump();

  const json problem = doc.value("problem", json::object());
  check_keys(problem, "problem", {"N", "M", "P", "snr_db", "seed", "epsilon", "mu_s", "sigma_s"});
  c.problem.N = get_int(problem, "problem.", "N", c.problem.N);
  c.problem.M = get_int(problem, "problem.", "M", c.problem.M);
  c.problem.P = get_int(problem, "problem.", "P", c.problem.P);
  c.problem.snr_db = get_number(problem, "problem.", "snr_db", c.problem.snr_db);
  if (problem.contains("seed")) {
    if (!problem["seed"].is_number_unsigned()) bad_field("problem.seed", "expected a nonnegative integer");
    c.problem.seed = problem["seed"].get<std::uint64_t>();
  }
  c.prior.epsilon = get_number(problem, "problem.", "epsilon", c.prior.epsilon);
  c.prior.mu_s = get_number(problem, "problem.", "mu_s", c.prior.mu_s);
  c.prior.sigma_s = get_number(problem, "problem.", "sigma_s", c.prior.sigma_s);

  const std::string mode = get_string(doc, "", "mode", "centralized");
  if (mode == "centralized") {
    c.mode = ExperimentMode::kCentralized;
  } else if (mode == "mp-uncompressed") {
    c.mode = ExperimentMode::kMpUncompressed;
  } else if (mode == "bt") {
    c.mode = ExperimentMode::kBt;
  } else if (mode == "dp") {
    c.mode = ExperimentMode::kDp;
  } else {
    bad_field("mode", "expected centralized, mp-uncompressed, bt or dp");
  }
  const std::string coder = get_string(doc, "", "coder", "ecsq");
  if (coder == "ecsq") {
    c.coder = CoderKind::kEcsq;
  } else if (coder == "ideal") {
    c.coder = CoderKind::kIdeal;
  } else {
    bad_field("coder", "expected ideal or ecsq");
  }

  if (doc.contains("T")) {
    const json& t = doc["T"];
    if (t.is_string() && t.get<std::string>() == "auto") {
      c.T.reset();
    } else if (t.is_number_integer()) {
      c.T = t.get<int>();
    } else {
      bad_field("T", "expected an integer or \"auto\"");
    }
  }

  const json bt = doc.value("bt", json::object());
  check_keys(bt, "bt", {"gamma", "rate_cap_bits", "reference"});
  c.bt.gamma = get_number(bt, "bt.", "gamma", c.bt.gamma);
  c.bt.rate_cap_bits = get_number(bt, "bt.", "rate_cap_bits", c.bt.rate_cap_bits);
  const std::string reference = get_string(bt, "bt.", "reference", "trajectory");
  if (reference == "trajectory") {
    c.bt_reference = BtReference::kTrajectory;
  } else if (reference == "current") {
    c.bt_reference = BtReference::kCurrent;
  } else {
    bad_field("bt.reference", "expected trajectory or current");
  }

  const json dp = doc.value("dp", json::object());
  check_keys(dp, "dp", {"R_total", "delta_R"});
  if (dp.contains("R_total")) {
    const json& r = dp["R_total"];
    if (r.is_string() && r.get<std::string>() == "2T") {
      c.R_total.reset();
    } else if (r.is_number()) {
      c.R_total = r.get<double>();
    } else {
      bad_field("dp.R_total", "expected a number or \"2T\"");
    }
  }
  c.delta_R = get_number(dp, "dp.", "delta_R", c.delta_R);

  const json num = doc.value("numerics", json::object());
  check_keys(num, "numerics",
             {"steady_tol_db", "quad_order", "ba_points", "ba_tol", "rd_backend", "rd_nodes_per_octave",
              "channel_variance", "rd_cache", "T_max"});
  NumericsConfig& n = c.numerics;
  n.steady_tol_db = get_number(num, "numerics.", "steady_tol_db", n.steady_tol_db);
  n.quad_order = get_int(num, "numerics.", "quad_order", n.quad_order);
  n.ba_points = get_int(num, "numerics.", "ba_points", n.ba_points);
  n.ba_tol_bits = get_number(num, "numerics.", "ba_tol", n.ba_tol_bits);
  n.rd_backend = get_string(num, "numerics.", "rd_backend", n.rd_backend);
  n.rd_nodes_per_octave = get_int(num, "numerics.", "rd_nodes_per_octave", n.rd_nodes_per_octave);
  const std::string channel = get_string(num, "numerics.", "channel_variance", "online");
  if (channel == "online") {
    n.channel = ChannelVarianceSource::kOnline;
  } else if (channel == "se") {
    n.channel = ChannelVarianceSource::kStateEvolution;
  } else {
    bad_field("numerics.channel_variance", "expected online or se");
  }
  n.rd_cache = get_string(num, "numerics.", "rd_cache", n.rd_cache);
  n.T_max = get_int(num, "numerics.", "T_max", n.T_max);

  c.output_dir = get_string(doc, "", "output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  fs::path dir = fs::path(path).parent_path();
  return parse_config(buffer.str(), overrides, dir.empty() ? "." : dir.string());
}

std::string mode_name(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::kCentralized:
      return "centralized";
    case ExperimentMode::kMpUncompressed:
      return "mp-uncompressed";
    case ExperimentMode::kBt:
      return "bt";
    case ExperimentMode::kDp:
      return "dp";
  }
  return "?";
}

std::string coder_name(CoderKind coder) { return coder == CoderKind::kIdeal ? "ideal" : "ecsq"; }

SeModel se_model(const ExperimentConfig& config) {
  SeModel m = SeModel::from_problem(config.problem, config.prior);
  m.quad_order = config.numerics.quad_order;
  return m;
}

int resolve_T(const ExperimentConfig& config) {
  if (config.T) return *config.T;
  const SETrace trace = se_trajectory(se_model(config), {}, config.numerics.T_max, config.numerics.steady_tol_db);
  if (!trace.steady_state_t) {
    throw ConvergenceError("T=auto: state evolution did not settle within " + std::to_string(config.numerics.T_max) +
                               " iterations",
                           0.0, trace.sigma2_seq.back());
  }
  return *trace.steady_state_t;
}

double resolve_R_total(const ExperimentConfig& config, int T) { return config.R_total ? *config.R_total : 2.0 * T; }

AllocationContext make_context(const ExperimentConfig& config, std::shared_ptr<RdCurveCache> cache) {
  AllocationContext ctx;
  ctx.prior = config.prior;
  ctx.kappa = config.problem.kappa();
  ctx.sigma2_e = config.problem.sigma2_e(config.prior);
  ctx.P = config.problem.P;
  ctx.quad_order = config.numerics.quad_order;
  if (config.numerics.rd_backend == "gaussian") {
    ctx.rd = std::make_shared<GaussianRdModel>(config.prior, config.problem.P);
  } else {
    RdCurveOptions opts;
    opts.num_points = config.numerics.ba_points;
    opts.ba.tol_bits = config.numerics.ba_tol_bits;
    ctx.rd = std::make_shared<TabulatedRdModel>(config.prior, config.problem.P, opts, std::move(cache),
                                                config.numerics.rd_nodes_per_octave);
  }
  return ctx;
}

AllocationPlan bt_offline_plan(const ExperimentConfig& config, int T, const AllocationContext& ctx) {
  const std::vector<double> sigma2_C = centralized_se(config, T);
  AllocationPlan plan;
  double s2 = sigma2_C.front();
  for (int t = 0; t < T; ++t) {
    const double next_C = config.bt_reference == BtReference::kCurrent
                              ? se_step(s2, 0.0, ctx.prior, ctx.kappa, ctx.sigma2_e, ctx.quad_order)
                              : sigma2_C[t + 1];
    const BtDecision d = bt_step(s2, next_C, config.bt, ctx);
    s2 = se_step(s2, ctx.P * d.sigma2_Q, ctx.prior, ctx.kappa, ctx.sigma2_e, ctx.quad_order);
    plan.rates.push_back(d.rate_bits);
    plan.predicted_sigma2.push_back(s2);
    plan.total_bits += d.rate_bits;
  }
  return plan;
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const int T = resolve_T(config);
  const std::vector<double> sigma2_C = centralized_se(config, T);
  const ProblemInstance instance = build_instance(config.problem, config.prior);
  RunOptions opts;
  opts.quad_order = config.numerics.quad_order;
  const RunResult central = run_centralized(instance, T, opts);

  RunReport report;
  RunResult dist;
  std::shared_ptr<RdCurveCache> cache;
  if (config.mode == ExperimentMode::kCentralized) {
    dist = central;
  } else {
    MpSettings settings;
    settings.coder = config.coder;
    settings.channel = config.numerics.channel;
    settings.sigma2_C = sigma2_C;
    settings.bt = config.bt;
    settings.bt_reference = config.bt_reference;
    if (config.mode == ExperimentMode::kMpUncompressed) {
      settings.mode = MpMode::kUncompressed;
    } else {
      cache = open_cache(config);
      settings.ctx = make_context(config, cache);
      if (config.mode == ExperimentMode::kBt) {
        settings.mode = MpMode::kBt;
      } else {
        settings.mode = MpMode::kDp;
        const SeModel se = se_model(config);
        AllocationPlan plan = dp_allocate(se.sigma2_0(), resolve_R_total(config, T), T, config.delta_R, settings.ctx).plan;
        if (config.coder == CoderKind::kEcsq) plan = plan_to_ecsq(plan);
        settings.plan = plan;
        report.plan = plan;
      }
    }
    dist = run_mp(instance, settings, T, opts);
    if (cache) close_cache(config, *cache);
  }

  RunSummary& s = report.summary;
  s.mode = mode_name(config.mode);
  s.coder = coder_name(config.coder);
  s.T = T;
  for (int t = 0; t <= T; ++t) {
    const IterationRecord& d = dist.records[t];
    TraceRow row;
    row.t = t;
    row.rate_bits = d.rate_bits;
    row.hq_bits = d.hq_bits;
    row.sigma2_C = sigma2_C[t];
    row.sigma2_D_pred = d.sigma2_pred;
    row.sigma2_D_emp = d.sigma2_hat;
    row.sdr_C_db = central.records[t].sdr_db;
    row.sdr_D_db = d.sdr_db;
    row.cum_bits = d.cum_bits;
    report.trace.push_back(row);
    s.measured_total_bits += d.rate_bits;
    s.hq_total_bits += d.hq_bits;
    s.rd_total_bits += d.rd_bits;
  }
  s.final_sdr_centralized_db = central.records.back().sdr_db;
  s.final_sdr_mp_db = dist.records.back().sdr_db;
  s.aggregate_total_bits = config.problem.P * s.measured_total_bits;
  s.diverged = dist.any_diverged();
  if (report.plan) s.plan_total_bits = report.plan->total_bits;
  s.total_bits = report.plan ? report.plan->total_bits : s.measured_total_bits;
  return report;
}

RunReport run_experiment_to_files(const ExperimentConfig& config) {
  RunReport report = run_experiment(config);
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_file(dir / "trace.csv", trace_csv(report.trace));
  write_file(dir / "summary.json", summary_json(report.summary, config));
  if (report.plan) report.plan->save_csv((dir / "plan.csv").string());
  return report;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "t,rate_bits,HQ_bits,sigma2_C,sigma2_D_pred,sigma2_D_emp,sdr_C_db,sdr_D_db,cum_bits\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.t);
    for (double v : {r.rate_bits, r.hq_bits, r.sigma2_C, r.sigma2_D_pred, r.sigma2_D_emp, r.sdr_C_db, r.sdr_D_db,
                     r.cum_bits}) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

std::string summary_json(const RunSummary& s, const ExperimentConfig& config) {
  json j;
  j["mode"] = s.mode;
  j["coder"] = s.coder;
  j["T"] = s.T;
  j["final_sdr_centralized_db"] = number_or_string(s.final_sdr_centralized_db);
  j["final_sdr_mp_db"] = number_or_string(s.final_sdr_mp_db);
  j["total_bits"] = s.total_bits;
  j["measured_total_bits"] = s.measured_total_bits;
  j["hq_total_bits"] = s.hq_total_bits;
  j["rd_total_bits"] = s.rd_total_bits;
  j["plan_total_bits"] = s.plan_total_bits ? json(*s.plan_total_bits) : json(nullptr);
  j["aggregate_total_bits"] = s.aggregate_total_bits;
  j["diverged"] = s.diverged;
  j["config"] = json::parse(config.echo_json.empty() ? "{}" : config.echo_json);
  j["code_version"] = kCodeVersion;
  return j.dump(2) + "\n";
}

const std::map<std::string, std::map<double, double>>& table1_reference() {
  static const std::map<std::string, std::map<double, double>> ref{
      {"BT-MP-AMP (RD prediction)", {{0.03, 33.82}, {0.05, 46.43}, {0.10, 96.16}}},
      {"BT-MP-AMP (ECSQ simulation)", {{0.03, 36.09}, {0.05, 49.19}, {0.10, 101.50}}},
      {"DP-MP-AMP (RD prediction)", {{0.03, 16.0}, {0.05, 20.0}, {0.10, 40.0}}},
      {"DP-MP-AMP (ECSQ simulation)", {{0.03, 18.04}, {0.05, 22.55}, {0.10, 45.10}}},
  };
  return ref;
}

Table1Column table1_column(const ExperimentConfig& config) {
  Table1Column col;
  col.epsilon = config.prior.epsilon;
  col.T = resolve_T(config);
  auto cache = open_cache(config);
  const AllocationContext ctx = make_context(config, cache);

  const SeModel se = se_model(config);
  const AllocationPlan plan = dp_allocate(se.sigma2_0(), resolve_R_total(config, col.T), col.T, config.delta_R, ctx).plan;
  col.dp_rd = plan.total_bits;
  col.dp_ecsq = plan_to_ecsq(plan).total_bits;

  const ProblemInstance instance = build_instance(config.problem, config.prior);
  MpSettings settings;
  settings.mode = MpMode::kBt;
  settings.coder = CoderKind::kEcsq;
  settings.bt = config.bt;
  settings.bt_reference = config.bt_reference;
  settings.ctx = ctx;
  settings.sigma2_C = centralized_se(config, col.T);
  settings.channel = config.numerics.channel;
  RunOptions opts;
  opts.quad_order = config.numerics.quad_order;
  const RunResult bt = run_mp(instance, settings, col.T, opts);
  double ecsq = 0.0;
  double rd = 0.0;
  for (const auto& r : bt.records) {
    ecsq += r.rate_bits;
    rd += r.rd_bits;
  }
  col.bt_ecsq = ecsq;
  col.bt_rd = rd;
  close_cache(config, *cache);
  return col;
}

std::string table1_csv(const std::vector<Table1Column>& columns) {
  std::string out = "method";
  for (const auto& c : columns) {
    char eps[32];
    std::snprintf(eps, sizeof eps, "%g", c.epsilon);
    out += std::string(",eps_") + eps + ",paper_" + eps;
  }
  out += '\n';
  out += "T";
  for (const auto& c : columns) out += "," + std::to_string(c.T) + ",";
  out += '\n';
  const auto& ref = table1_reference();
  const std::pair<const char*, std::optional<double> Table1Column::*> rows[] = {
      {"BT-MP-AMP (RD prediction)", &Table1Column::bt_rd},
      {"BT-MP-AMP (ECSQ simulation)", &Table1Column::bt_ecsq},
      {"DP-MP-AMP (RD prediction)", &Table1Column::dp_rd},
      {"DP-MP-AMP (ECSQ simulation)", &Table1Column::dp_ecsq},
  };
  for (const auto& [name, member] : rows) {
    out += name;
    for (const auto& c : columns) {
      const auto& v = c.*member;
      out += ',';
      if (v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *v);
        out += buf;
      }
      out += ',';
      const auto& by_eps = ref.at(name);
      for (const auto& [eps, value] : by_eps) {
        if (std::abs(eps - c.epsilon) < 1e-12) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f", value);
          out += buf;
        }
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace mpamp
