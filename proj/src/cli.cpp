#include "ctdr/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ctdr/common.hpp"
#include "ctdr/errors.hpp"
#include "ctdr/montecarlo.hpp"
#include "ctdr/rng.hpp"

namespace ctdr {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::config, "config line " + std::to_string(lineno) +
                                  " is not of the form key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      fail(ErrorCode::config,
           "config line " + std::to_string(lineno) + " has an empty key");
    }
    if (out.has(key)) {
      fail(ErrorCode::config, "duplicate config key `" + key + "`");
    }
    out.values[key] = value;
  }
  return out;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::uint64_t config_digest(const ParsedConfig& config) {
  std::string canonical;
  for (const auto& [key, value] : config.values) {  // std::map is sorted
    canonical += key;
    canonical += '=';
    canonical += value;
    canonical += '\n';
  }
  return fnv1a64(canonical);
}

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Typed access with an allowed-key registry: a typo is a config error.

class ConfigReader {
 public:
  explicit ConfigReader(const ParsedConfig& config) : config_(config) {}

  std::string get_string(const std::string& key, const std::string& fallback) {
    allowed_.insert(key);
    auto it = config_.values.find(key);
    return it == config_.values.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) {
    allowed_.insert(key);
    auto it = config_.values.find(key);
    if (it == config_.values.end()) {
      fail(ErrorCode::config, "missing required key `" + key + "`");
    }
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    allowed_.insert(key);
    auto it = config_.values.find(key);
    if (it == config_.values.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::config, "key `" + key + "` is not a number: `" +
                                  it->second + "`");
    }
  }

  long long get_int(const std::string& key, long long fallback) {
    allowed_.insert(key);
    auto it = config_.values.find(key);
    if (it == config_.values.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::config, "key `" + key + "` is not an integer: `" +
                                  it->second + "`");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    allowed_.insert(key);
    auto it = config_.values.find(key);
    if (it == config_.values.end()) return fallback;
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::config, "key `" + key + "` is not an unsigned integer: `" +
                                  it->second + "`");
    }
  }

  std::vector<int> get_int_list(const std::string& key,
                                const std::string& fallback) {
    const std::string raw = get_string(key, fallback);
    std::vector<int> out;
    std::istringstream in(raw);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      out.push_back(static_cast<int>(std::stoll(tok)));
    }
    if (out.empty()) fail(ErrorCode::config, "key `" + key + "` has no entries");
    return out;
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::string& fallback) {
    const std::string raw = get_string(key, fallback);
    std::vector<double> out;
    std::istringstream in(raw);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      out.push_back(std::stod(tok));
    }
    if (out.empty()) fail(ErrorCode::config, "key `" + key + "` has no entries");
    return out;
  }

  void reject_unknown_keys() const {
    for (const auto& [key, value] : config_.values) {
      if (!allowed_.count(key)) {
        fail(ErrorCode::config, "unknown config key `" + key + "`");
      }
    }
  }

 private:
  const ParsedConfig& config_;
  std::set<std::string> allowed_;
};

NuisanceMode parse_mode(const std::string& raw, const std::string& key) {
  if (raw == "oracle") return NuisanceMode::oracle;
  if (raw == "fitted-correct") return NuisanceMode::fitted_correct;
  if (raw == "fitted-misspecified") return NuisanceMode::fitted_misspecified;
  if (raw == "synthetic-rate") return NuisanceMode::synthetic_rate;
  fail(ErrorCode::config, "key `" + key + "` has unknown mode `" + raw + "`");
}

const char* mode_name(NuisanceMode mode) {
  switch (mode) {
    case NuisanceMode::oracle:
      return "oracle";
    case NuisanceMode::fitted_correct:
      return "fitted-correct";
    case NuisanceMode::fitted_misspecified:
      return "fitted-misspecified";
    case NuisanceMode::synthetic_rate:
      return "synthetic-rate";
  }
  return "?";
}

ScenarioConfig scenario_from(ConfigReader& reader) {
  ScenarioConfig cfg;
  const std::string scenario = reader.require_string("dgp.scenario");
  if (scenario == "censoring") {
    cfg.dgp.scenario = Scenario::censoring;
  } else if (scenario == "truncation") {
    cfg.dgp.scenario = Scenario::truncation;
  } else {
    fail(ErrorCode::config,
         "key `dgp.scenario` must be censoring or truncation, got `" +
             scenario + "`");
  }
  const std::string covariate = reader.get_string("dgp.covariate", "bernoulli");
  if (covariate == "bernoulli") {
    cfg.dgp.covariate.kind = CovariateLaw::Kind::bernoulli;
  } else if (covariate == "uniform") {
    cfg.dgp.covariate.kind = CovariateLaw::Kind::uniform01;
  } else {
    fail(ErrorCode::config,
         "key `dgp.covariate` must be bernoulli or uniform, got `" + covariate +
             "`");
  }
  cfg.dgp.covariate.p = reader.get_double("dgp.covariate_param", 0.5);
  cfg.dgp.event.rate = reader.get_double("dgp.event_rate", 1.0);
  cfg.dgp.event.beta = reader.get_double("dgp.event_beta", 1.0);
  cfg.dgp.coarsening.rate = reader.get_double(
      "dgp.coarsening_rate", cfg.dgp.scenario == Scenario::censoring ? 0.5 : 1.2);
  cfg.dgp.coarsening.beta = reader.get_double("dgp.coarsening_beta", 1.0);
  cfg.dgp.t0 = reader.get_double("dgp.t0", 0.75);
  cfg.dgp.tau_max = reader.get_double("dgp.tau_max", 4.0);

  const std::string estimator = reader.get_string("estimator", "mdr");
  if (estimator == "mdr") {
    cfg.estimator = EstimatorKind::mdr;
  } else if (estimator == "rdr") {
    cfg.estimator = EstimatorKind::rdr;
  } else {
    fail(ErrorCode::config,
         "key `estimator` must be mdr or rdr, got `" + estimator + "`");
  }
  cfg.folds = static_cast<int>(reader.get_int("crossfit.folds", 5));
  cfg.n = static_cast<int>(reader.get_int("n", 2000));
  cfg.replications = static_cast<int>(reader.get_int("replications", 200));
  cfg.master_seed = reader.get_u64("seed", 12345);

  cfg.event_nuisance.mode =
      parse_mode(reader.get_string("nuisance.event.mode", "oracle"),
                 "nuisance.event.mode");
  cfg.event_nuisance.rate_exponent = reader.get_double("nuisance.event.alpha", 0.3);
  cfg.event_nuisance.amplitude = reader.get_double("nuisance.event.c", 1.0);
  cfg.event_nuisance.shape_seed = reader.get_u64("nuisance.event.shape_seed", 101);
  cfg.coarsening_nuisance.mode =
      parse_mode(reader.get_string("nuisance.coarsening.mode", "oracle"),
                 "nuisance.coarsening.mode");
  cfg.coarsening_nuisance.rate_exponent =
      reader.get_double("nuisance.coarsening.alpha", 0.3);
  cfg.coarsening_nuisance.amplitude = reader.get_double("nuisance.coarsening.c", 1.0);
  cfg.coarsening_nuisance.shape_seed =
      reader.get_u64("nuisance.coarsening.shape_seed", 202);
  return cfg;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed_override = 0;
  bool seed_overridden = false;
};

void apply_seed_override(const CommonArgs& args, ScenarioConfig& cfg) {
  // Flag wins over the CTDR_SEED environment variable; both win over config.
  if (args.seed_overridden) {
    cfg.master_seed = args.seed_override;
    return;
  }
  if (const char* env = std::getenv("CTDR_SEED")) {
    try {
      cfg.master_seed = std::stoull(env);
    } catch (const std::exception&) {
      fail(ErrorCode::config, "CTDR_SEED is not an unsigned integer");
    }
  }
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::config, "cannot create output directory " + out);
  return dir;
}

std::string csv_or_empty(bool present, double value) {
  return present ? format_double(value) : std::string();
}

void write_report_csv(const fs::path& path,
                      const std::vector<DrMatrixCell>& cells) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::config, "cannot write " + path.string());
  out << "cell,n,R,bias,sd,mean_se,coverage,mcse,failures\n";
  for (const auto& cell : cells) {
    const ScenarioReport& r = cell.report;
    out << cell.label << "," << r.n << "," << r.replications << ","
        << format_double(r.bias) << "," << csv_or_empty(r.has_sd, r.sd) << ","
        << format_double(r.mean_se) << "," << format_double(r.coverage) << ","
        << csv_or_empty(r.has_sd, r.mcse) << "," << r.failures << "\n";
  }
}

void write_manifest(const fs::path& dir, const RunManifest& info) {
  nlohmann::json j;
  j["command"] = info.command;
  char digest_hex[32];
  std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                static_cast<unsigned long long>(info.config_digest));
  j["config_digest"] = digest_hex;
  j["tool_version"] = info.tool_version;
  j["master_seed"] = info.master_seed;
  j["wall_time_seconds"] = info.wall_time_seconds;
  j["outputs"] = info.outputs;
  std::ofstream out(dir / "manifest.json");
  if (!out) fail(ErrorCode::config, "cannot write manifest.json");
  out << j.dump(2) << "\n";
}

int cmd_simulate(const CommonArgs& args, bool matrix) {
  const auto t_start = std::chrono::steady_clock::now();
  const ParsedConfig parsed = parse_config_file(args.config_path);
  ConfigReader reader(parsed);
  ScenarioConfig cfg = scenario_from(reader);
  const bool dump_samples = reader.get_int("output.samples", 0) != 0;
  reader.reject_unknown_keys();
  apply_seed_override(args, cfg);
  cfg.validate();

  const fs::path dir = prepare_out_dir(args.out_dir);
  std::vector<DrMatrixCell> cells;
  if (matrix) {
    cells = dr_matrix(cfg, args.threads);
  } else {
    const std::string label = std::string(mode_name(cfg.event_nuisance.mode)) +
                              "_" + mode_name(cfg.coarsening_nuisance.mode);
    cells.push_back({label, run_scenario(cfg, args.threads)});
  }

  RunManifest info;
  info.command = matrix ? "dr-matrix" : "simulate";
  info.config_digest = config_digest(parsed);
  info.tool_version = CTDR_VERSION;
  info.master_seed = cfg.master_seed;
  write_report_csv(dir / "report.csv", cells);
  info.outputs.push_back("report.csv");

  if (dump_samples) {
    std::ofstream out(dir / "samples.csv");
    if (!out) fail(ErrorCode::config, "cannot write samples.csv");
    const std::uint64_t seed = derive_seed(cfg.master_seed, 0);
    if (cfg.dgp.scenario == Scenario::censoring) {
      write_samples_csv(out, generate_censoring(cfg.dgp, cfg.n, seed));
    } else {
      write_samples_csv(out, generate_truncation(cfg.dgp, cfg.n, seed));
    }
    info.outputs.push_back("samples.csv");
  }

  info.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  write_manifest(dir, info);
  return 0;
}

int cmd_diagnose(const CommonArgs& args) {
  const auto t_start = std::chrono::steady_clock::now();
  const ParsedConfig parsed = parse_config_file(args.config_path);
  ConfigReader reader(parsed);
  ScenarioConfig cfg = scenario_from(reader);
  const auto tv_grid = reader.get_int_list("tv_gap.n_grid", "100,1000,10000");
  const int tv_reps =
      static_cast<int>(reader.get_int("tv_gap.replications", 20));
  const double contrast_alpha = reader.get_double("contrast.alpha", 0.4);
  const double contrast_c = reader.get_double("contrast.c", 1.0);
  const std::uint64_t contrast_seed = reader.get_u64("contrast.shape_seed", 303);
  const auto rate_sums = reader.get_double_list("rates.alpha_sums", "0.4,0.6,0.8");
  const auto rate_grid = reader.get_int_list("rates.n_grid", "1000,4000,16000");
  const auto decay_grid = reader.get_int_list("norm_decay.n_grid", "500,2000,8000");
  const int decay_reps =
      static_cast<int>(reader.get_int("norm_decay.replications", 50));
  const double decay_z = reader.get_double("norm_decay.z_ref", 1.0);
  reader.reject_unknown_keys();
  apply_seed_override(args, cfg);
  cfg.validate();

  const fs::path dir = prepare_out_dir(args.out_dir);
  RunManifest info;
  info.command = "diagnose";
  info.config_digest = config_digest(parsed);
  info.tool_version = CTDR_VERSION;
  info.master_seed = cfg.master_seed;

  {
    std::ofstream out(dir / "tv_gap.csv");
    if (!out) fail(ErrorCode::config, "cannot write tv_gap.csv");
    out << "n,sup_err,tv_err\n";
    for (const auto& row : tv_gap_study(tv_grid, tv_reps, cfg.master_seed)) {
      out << row.n << "," << format_double(row.sup_err) << ","
          << format_double(row.tv_err) << "\n";
    }
    info.outputs.push_back("tv_gap.csv");
  }
  {
    std::ofstream out(dir / "tv_contrast.csv");
    if (!out) fail(ErrorCode::config, "cannot write tv_contrast.csv");
    out << "n,sup_err,tv_err\n";
    for (const auto& row : synthetic_tv_contrast(cfg.dgp, contrast_alpha,
                                                 contrast_c, contrast_seed,
                                                 tv_grid)) {
      out << row.n << "," << format_double(row.sup_err) << ","
          << format_double(row.tv_err) << "\n";
    }
    info.outputs.push_back("tv_contrast.csv");
  }
  {
    ScenarioConfig rate_cfg = cfg;
    rate_cfg.estimator = EstimatorKind::mdr;
    rate_cfg.event_nuisance.mode = NuisanceMode::synthetic_rate;
    rate_cfg.coarsening_nuisance.mode = NuisanceMode::synthetic_rate;
    std::ofstream out(dir / "rates.csv");
    if (!out) fail(ErrorCode::config, "cannot write rates.csv");
    out << "alpha_sum,n,sqrtn_bias,cross_integral\n";
    for (const auto& row :
         rate_condition_study(rate_cfg, rate_sums, rate_grid, args.threads)) {
      out << format_double(row.alpha_sum) << "," << row.n << ","
          << format_double(row.sqrtn_bias) << ","
          << format_double(row.cross_integral) << "\n";
    }
    info.outputs.push_back("rates.csv");
  }
  if (cfg.dgp.scenario == Scenario::censoring) {
    std::ofstream out(dir / "norm_decay.csv");
    if (!out) fail(ErrorCode::config, "cannot write norm_decay.csv");
    out << "n,sup_err,tv_err\n";
    for (const auto& row :
         norm_decay_study(cfg, decay_grid, decay_reps, decay_z, args.threads)) {
      out << row.n << "," << format_double(row.sup_err) << ","
          << format_double(row.tv_err) << "\n";
    }
    info.outputs.push_back("norm_decay.csv");
  }

  info.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  write_manifest(dir, info);
  return 0;
}

int cmd_decompose(const CommonArgs& args) {
  const auto t_start = std::chrono::steady_clock::now();
  const ParsedConfig parsed = parse_config_file(args.config_path);
  ConfigReader reader(parsed);
  ScenarioConfig cfg = scenario_from(reader);
  const long long reps =
      reader.get_int("decompose.replications", cfg.replications);
  const std::string at = reader.get_string("decompose.at", "theta-hat");
  reader.reject_unknown_keys();
  apply_seed_override(args, cfg);
  cfg.replications = static_cast<int>(reps);
  cfg.validate();
  DecompositionPoint point;
  if (at == "theta-hat") {
    point = DecompositionPoint::at_theta_hat;
  } else if (at == "truth") {
    point = DecompositionPoint::at_truth;
  } else {
    fail(ErrorCode::config,
         "key `decompose.at` must be theta-hat or truth, got `" + at + "`");
  }

  const fs::path dir = prepare_out_dir(args.out_dir);
  const DecompositionReport report =
      decomposition_report(cfg, point, args.threads);
  {
    std::ofstream out(dir / "decomposition.csv");
    if (!out) fail(ErrorCode::config, "cannot write decomposition.csv");
    out << "rep,T1,T2,T3,T4,T5,T6,reconstruction_residual\n";
    for (const auto& row : report.rows) {
      out << row.replication << "," << format_double(row.t1) << ","
          << format_double(row.t2) << "," << format_double(row.t3) << ","
          << format_double(row.t4) << "," << format_double(row.t5) << ","
          << format_double(row.t6) << ","
          << format_double(row.reconstruction_residual) << "\n";
    }
  }
  RunManifest info;
  info.command = "decompose";
  info.config_digest = config_digest(parsed);
  info.tool_version = CTDR_VERSION;
  info.master_seed = cfg.master_seed;
  info.outputs.push_back("decomposition.csv");
  info.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  write_manifest(dir, info);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Continuous-time doubly robust estimation toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "config file path")
        ->required();
    sub->add_option("--out", common.out_dir, "output directory")->required();
    sub->add_option("--threads", common.threads,
                    "worker threads (default: machine parallelism)");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&common](const std::uint64_t& v) {
          common.seed_override = v;
          common.seed_overridden = true;
        },
        "master seed override (wins over CTDR_SEED and the config)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run one scenario");
  CLI::App* matrix = app.add_subcommand("dr-matrix",
                                        "run the 2x2 double-robustness matrix");
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "run the TV-gap, rate and norm studies");
  CLI::App* decompose =
      app.add_subcommand("decompose", "emit the estimating-equation terms");
  add_common(simulate);
  add_common(matrix);
  add_common(diagnose);
  add_common(decompose);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << "CTDR-E2: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common, false);
    if (matrix->parsed()) return cmd_simulate(common, true);
    if (diagnose->parsed()) return cmd_diagnose(common);
    if (decompose->parsed()) return cmd_decompose(common);
    std::cerr << "CTDR-E2: no subcommand given\n";
    return 2;
  } catch (const CtdrError& e) {
    std::cerr << "CTDR-E" << e.code_int() << ": " << e.what() << "\n";
    return e.code() == ErrorCode::config ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "CTDR-E3: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ctdr
