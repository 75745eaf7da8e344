// Acceptance suite: one pass/fail line per criterion, fixed seeds throughout.
// Exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ctdr/cli.hpp"
#include "ctdr/crossfit.hpp"
#include "ctdr/dgp.hpp"
#include "ctdr/errors.hpp"
#include "ctdr/estimator.hpp"
#include "ctdr/montecarlo.hpp"
#include "ctdr/rng.hpp"
#include "ctdr/step_path.hpp"

using namespace ctdr;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail) {
  std::printf("[%s] %d. %s%s%s\n", pass ? "PASS" : "FAIL", criterion,
              name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Shared fixed configurations (seeds pinned; the statistical tolerances below
// are deterministic given these seeds).

ScenarioConfig censoring_matrix_config() {
  ScenarioConfig cfg;
  cfg.dgp.scenario = Scenario::censoring;
  cfg.dgp.covariate = {CovariateLaw::Kind::bernoulli, 0.5};
  cfg.dgp.event = {1.0, 1.5};
  cfg.dgp.coarsening = {0.5, 1.5};
  cfg.dgp.t0 = 0.75;
  cfg.dgp.tau_max = 4.0;
  cfg.n = 2000;
  cfg.replications = 1000;
  cfg.master_seed = 0x5EED0001ULL;
  return cfg;
}

ScenarioConfig truncation_matrix_config() {
  ScenarioConfig cfg = censoring_matrix_config();
  cfg.dgp.scenario = Scenario::truncation;
  cfg.dgp.coarsening = {1.2, 1.5};
  cfg.master_seed = 0x5EED0002ULL;
  return cfg;
}

// Fixtures from one-time n = 1e5 runs of the both-misspecified cells
// (30 replications each; see the matrix configs above for the DGPs).
constexpr double kCensoringBothWrongBias = 0.047775;    // mcse 0.00036
constexpr double kTruncationBothWrongBias = -0.097071;  // mcse 0.00030

StepPath random_step_path(Rng& rng) {
  const int k = static_cast<int>(rng.next_u64() % 9);
  std::vector<double> times;
  for (int i = 0; i < k; ++i) times.push_back(5.0 * rng.uniform());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const double initial = 2.0 * rng.uniform() - 1.0;
  std::vector<double> values;
  double v = initial;
  for (std::size_t i = 0; i < times.size(); ++i) {
    v += 2.0 * rng.uniform() - 1.0;
    values.push_back(v);
  }
  return StepPath(initial, std::move(times), std::move(values));
}

FiniteVariationPath random_jump_path(Rng& rng) {
  const int k = static_cast<int>(rng.next_u64() % 9);
  std::vector<double> times;
  for (int i = 0; i < k; ++i) times.push_back(5.0 * rng.uniform());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<Jump> jumps;
  for (double t : times) jumps.push_back({t, 2.0 * rng.uniform() - 1.0});
  return FiniteVariationPath(2.0 * rng.uniform() - 1.0, std::move(jumps), {});
}

// ---------------------------------------------------------------------------

void criterion_1_integration_oracle() {
  Rng rng(0x5EED0007ULL);
  double worst_vs_oracle = 0.0;
  double worst_ibp = 0.0;
  int pairs = 0;
  while (pairs < 1000) {
    const StepPath h = random_step_path(rng);
    const FiniteVariationPath q = random_jump_path(rng);
    bool collision = false;
    for (const auto& j : q.jumps) {
      if (h.has_jump_at(j.time)) collision = true;
    }
    if (collision) continue;
    ++pairs;

    double oracle = 0.0;
    for (const auto& j : q.jumps) {
      if (j.time > 0.0) oracle += h.value_at(j.time) * j.size;
    }
    worst_vs_oracle =
        std::max(worst_vs_oracle, std::abs(rs_integrate(h, q) - oracle));

    // integration by parts against a second step path with its own jumps
    const StepPath g = random_step_path(rng);
    bool g_collision = false;
    for (double t : g.jump_times) {
      if (h.has_jump_at(t)) g_collision = true;
    }
    if (!g_collision) {
      RsOptions left;
      left.use_left_limits = true;
      const double lhs = rs_integrate(h, to_finite_variation(g)) +
                         rs_integrate(g, to_finite_variation(h), kInfiniteTime,
                                      left);
      const double rhs = h.final_value() * g.final_value() -
                         h.value_at(0.0) * g.value_at(0.0);
      worst_ibp = std::max(worst_ibp, std::abs(lhs - rhs));
    }
  }
  const bool pass = worst_vs_oracle <= 1e-12 && worst_ibp <= 1e-10;
  report(1, "integration oracle", pass,
         fmt("max |rs - jump sum| = %.2e (<= 1e-12), max IBP defect = %.2e "
             "(<= 1e-10) over 1000 pairs",
             worst_vs_oracle, worst_ibp));
}

void criterion_2_closed_form_reduction() {
  double worst = 0.0;

  {  // censoring plugin with lambda_C == 0
    DgpSpec spec = censoring_matrix_config().dgp;
    spec.coarsening.rate = 0.0;
    const auto truth = true_nuisance(spec);
    const auto sample = generate_censoring(spec, 4000, 0x5EED0021ULL);
    const CensoringPlugin plugin(truth.first, truth.second, spec.t0);
    const EstimateResult res = solve_mdr(sample, plugin);
    int above = 0;
    for (const auto& o : sample) {
      if (o.t_tilde > spec.t0) ++above;
    }
    worst = std::max(worst,
                     std::abs(res.theta_hat - static_cast<double>(above) / 4000.0));
  }
  {  // truncation plugin in the no-truncation limit: q == 0, G == 1
    DgpSpec spec = truncation_matrix_config().dgp;
    const auto latent = generate_truncation_latent(spec, 4000, 0x5EED0022ULL);
    std::vector<TruncationObservation> sample;
    for (const auto& l : latent) sample.push_back({l.z, 0.0, l.t});
    const TruncationPlugin plugin(true_nuisance(spec).first,
                                  ConditionalHazardModel::unit_cdf(), spec.t0);
    const EstimateResult res = solve_mdr(sample, plugin);
    int above = 0;
    for (const auto& o : sample) {
      if (o.t > spec.t0) ++above;
    }
    worst = std::max(worst,
                     std::abs(res.theta_hat - static_cast<double>(above) / 4000.0));
  }
  report(2, "closed-form reduction to the empirical survival fraction",
         worst <= 1e-12, fmt("max |theta - fraction| = %.2e (<= 1e-12)", worst));
}

// Returns the both-correct cell coverage for criterion 4.
double criterion_3_dr_matrix() {
  double both_correct_coverage = -1.0;
  bool pass = true;
  std::string detail;

  const struct {
    const char* tag;
    ScenarioConfig cfg;
    double pinned_bias;
  } scenarios[2] = {
      {"censoring", censoring_matrix_config(), kCensoringBothWrongBias},
      {"truncation", truncation_matrix_config(), kTruncationBothWrongBias},
  };
  for (const auto& sc : scenarios) {
    const auto cells = dr_matrix(sc.cfg, 0);
    for (const auto& cell : cells) {
      const double ratio = std::abs(cell.report.bias) / cell.report.mcse;
      if (cell.label == "both_misspecified") {
        if (!(ratio > 5.0)) pass = false;
        // the bias magnitude is anchored by the recorded large-n fixture
        if (!(cell.report.bias * sc.pinned_bias > 0.0) ||
            std::abs(cell.report.bias - sc.pinned_bias) >
                0.5 * std::abs(sc.pinned_bias) + 5.0 * cell.report.mcse) {
          pass = false;
        }
      } else {
        if (!(ratio <= 3.0)) pass = false;
      }
      detail += fmt("%s/%s %.2f; ", sc.tag, cell.label.c_str(), ratio);
      if (sc.cfg.dgp.scenario == Scenario::censoring &&
          cell.label == "both_correct") {
        both_correct_coverage = cell.report.coverage;
      }
    }
  }
  report(3, "double-robustness matrix (|bias|/MCSE by cell)", pass, detail);
  return both_correct_coverage;
}

void criterion_4_coverage(double both_correct_coverage) {
  const bool pass =
      both_correct_coverage >= 0.93 && both_correct_coverage <= 0.97;
  report(4, "nominal-95% coverage in the both-correct MDR cell", pass,
         fmt("coverage = %.3f (in [0.93, 0.97])", both_correct_coverage));
}

void criterion_5_root_n_scaling() {
  ScenarioConfig cfg = censoring_matrix_config();
  cfg.master_seed = 0x5EED0003ULL;
  cfg.event_nuisance.mode = NuisanceMode::oracle;
  cfg.coarsening_nuisance.mode = NuisanceMode::oracle;
  const auto rows = root_n_scaling_study(cfg, {500, 2000, 8000}, 0);
  double lo = rows[0].sd_sqrt_n, hi = rows[0].sd_sqrt_n;
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    lo = std::min(lo, r.sd_sqrt_n);
    hi = std::max(hi, r.sd_sqrt_n);
    if (!(r.coverage >= 0.93 && r.coverage <= 0.97)) pass = false;
    if (!(r.se_to_sd >= 0.9 && r.se_to_sd <= 1.1)) pass = false;
    detail += fmt("n=%d sd*rt(n)=%.4f cov=%.3f se/sd=%.3f; ", r.n, r.sd_sqrt_n,
                  r.coverage, r.se_to_sd);
  }
  if (!(hi / lo <= 1.2)) pass = false;
  report(5, "root-n scaling of the oracle estimator", pass,
         detail + fmt("max/min = %.3f (<= 1.2)", hi / lo));
}

void criterion_6_crossfit_anchor() {
  bool pass = true;
  {
    const DgpSpec spec = censoring_matrix_config().dgp;
    const auto truth = true_nuisance(spec);
    const auto sample = generate_censoring(spec, 2000, 0x5EED0061ULL);
    const CensoringPlugin plugin(truth.first, truth.second, spec.t0);
    const double mdr = solve_mdr(sample, plugin).theta_hat;
    const auto fitter = [&](const std::vector<CensoringObservation>&) {
      return truth;
    };
    const auto builder = [&](const ConditionalHazardModel& e,
                             const ConditionalHazardModel& c) {
      return CensoringPlugin(e, c, spec.t0);
    };
    if (solve_rdr(sample, 5, fitter, builder, 0x5EED0062ULL).theta_hat != mdr) {
      pass = false;
    }
    if (solve_rdr(sample, 2, fitter, builder, 0x5EED0063ULL).theta_hat != mdr) {
      pass = false;
    }
  }
  {
    const DgpSpec spec = truncation_matrix_config().dgp;
    const auto truth = true_nuisance(spec);
    const auto sample = generate_truncation(spec, 2000, 0x5EED0064ULL);
    const TruncationPlugin plugin(truth.first, truth.second, spec.t0);
    const double mdr = solve_mdr(sample, plugin).theta_hat;
    const auto fitter = [&](const std::vector<TruncationObservation>&) {
      return truth;
    };
    const auto builder = [&](const ConditionalHazardModel& f,
                             const ConditionalHazardModel& g) {
      return TruncationPlugin(f, g, spec.t0);
    };
    if (solve_rdr(sample, 5, fitter, builder, 0x5EED0065ULL).theta_hat != mdr) {
      pass = false;
    }
  }
  report(6, "cross-fit estimator with an oracle fitter is bit-identical to MDR",
         pass, "L in {2, 5}, both plugins");
}

void criterion_7_rate_condition() {
  ScenarioConfig cfg = censoring_matrix_config();
  cfg.master_seed = 0x5EED0004ULL;
  cfg.event_nuisance = {NuisanceMode::synthetic_rate, 0.2, 2.0, 101};
  cfg.coarsening_nuisance = {NuisanceMode::synthetic_rate, 0.2, 2.0, 202};
  const std::vector<int> n_grid = {1000, 4000, 16000};
  const auto rows = rate_condition_study(cfg, {0.4, 0.6, 0.8}, n_grid, 0);

  auto row_at = [&](double sum, int n) {
    for (const auto& r : rows) {
      if (r.alpha_sum == sum && r.n == n) return r;
    }
    return RateConditionRow{};
  };
  bool pass = true;
  std::string detail;
  // slow regime: |sqrt(n) bias| grows with n
  {
    const auto first = row_at(0.4, 1000);
    const auto last = row_at(0.4, 16000);
    if (!(std::abs(last.sqrtn_bias) > std::abs(first.sqrtn_bias))) pass = false;
    detail += fmt("sum 0.4: %.4f -> %.4f (up); ", std::abs(first.sqrtn_bias),
                  std::abs(last.sqrtn_bias));
  }
  // fast regimes: flat or decreasing up to the Monte Carlo noise of the
  // two endpoints
  for (double sum : {0.6, 0.8}) {
    const auto first = row_at(sum, 1000);
    const auto last = row_at(sum, 16000);
    const double noise = 2.0 * std::sqrt(first.sqrtn_mcse * first.sqrtn_mcse +
                                         last.sqrtn_mcse * last.sqrtn_mcse);
    if (!(std::abs(last.sqrtn_bias) <=
          1.05 * std::abs(first.sqrtn_bias) + noise)) {
      pass = false;
    }
    detail += fmt("sum %.1f: %.4f -> %.4f (flat/down, noise %.4f); ", sum,
                  std::abs(first.sqrtn_bias), std::abs(last.sqrtn_bias), noise);
  }
  for (const auto& r : rows) {
    if (r.alpha_sum == 0.8 && r.n == 4000) {
      if (!(r.coverage >= 0.92 && r.coverage <= 0.97)) pass = false;
      detail += fmt("coverage(0.8, 4000) = %.3f", r.coverage);
    }
  }
  report(7, "rate condition for the cross error of synthetic nuisances", pass,
         detail);
}

void criterion_8_tv_gap() {
  const auto rows = tv_gap_study({100, 1000, 10000}, 30, 0x5EED0006ULL);
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    if (!(r.tv_err >= 1.8 && r.tv_err <= 2.0)) pass = false;
  }
  // log-log slope of the sup error over the decade grid
  double sxy = 0.0, sxx = 0.0;
  const double mx = (std::log(100.0) + std::log(1000.0) + std::log(10000.0)) / 3.0;
  double my = 0.0;
  for (const auto& r : rows) my += std::log(r.sup_err) / 3.0;
  for (const auto& r : rows) {
    sxy += (std::log(static_cast<double>(r.n)) - mx) * (std::log(r.sup_err) - my);
    sxx += (std::log(static_cast<double>(r.n)) - mx) *
           (std::log(static_cast<double>(r.n)) - mx);
  }
  const double sup_slope = sxy / sxx;
  if (!(sup_slope >= -0.6 && sup_slope <= -0.4)) pass = false;
  detail += fmt("ECDF: tv in [%.4f, %.4f], sup slope %.3f; ", rows[0].tv_err,
                rows[2].tv_err, sup_slope);

  // smooth contrast: TV error vanishes at the synthetic rate
  const double alpha = 0.4;
  const auto contrast = synthetic_tv_contrast(censoring_matrix_config().dgp,
                                              alpha, 1.0, 303, {100, 1000, 10000});
  const double contrast_slope =
      std::log(contrast[2].tv_err / contrast[0].tv_err) / std::log(100.0);
  if (!(std::abs(contrast_slope + alpha) <= 0.1)) pass = false;
  detail += fmt("smooth contrast TV slope %.3f (target %.1f)", contrast_slope,
                -alpha);
  report(8, "total-variation gap of step estimators", pass, detail);
}

void criterion_9_decomposition() {
  bool pass = true;
  std::string detail;

  {  // oracle nuisances: the nuisance terms vanish identically
    ScenarioConfig cfg = censoring_matrix_config();
    cfg.master_seed = 0x5EED0051ULL;
    cfg.replications = 100;
    cfg.event_nuisance.mode = NuisanceMode::oracle;
    cfg.coarsening_nuisance.mode = NuisanceMode::oracle;
    const auto rep = decomposition_report(cfg, DecompositionPoint::at_theta_hat, 0);
    for (const auto& row : rep.rows) {
      if (row.t1 != 0.0 || row.t2 != 0.0 || row.t3 != 0.0) pass = false;
      if (!(std::abs(row.reconstruction_residual) <= 1e-10)) pass = false;
    }
    detail += "oracle T1=T2=T3=0; ";
  }

  std::vector<double> mean_t1, mean_t2, mean_t3;
  for (int n : {500, 2000, 8000}) {
    ScenarioConfig cfg = censoring_matrix_config();
    cfg.master_seed = 0x5EED0005ULL;
    cfg.n = n;
    cfg.replications = 300;
    cfg.event_nuisance.mode = NuisanceMode::fitted_correct;
    cfg.coarsening_nuisance.mode = NuisanceMode::fitted_correct;
    const auto rep = decomposition_report(cfg, DecompositionPoint::at_theta_hat, 0);
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;
    for (const auto& row : rep.rows) {
      if (!(std::abs(row.reconstruction_residual) <= 1e-10)) pass = false;
      const double scale = std::sqrt(static_cast<double>(n));
      t1 += std::abs(scale * row.t1);
      t2 += std::abs(scale * row.t2);
      t3 += std::abs(scale * row.t3);
    }
    const double count = static_cast<double>(rep.rows.size());
    mean_t1.push_back(t1 / count);
    mean_t2.push_back(t2 / count);
    mean_t3.push_back(t3 / count);
  }
  if (!(mean_t1[0] > mean_t1[1] && mean_t1[1] > mean_t1[2])) pass = false;
  if (!(mean_t2[0] > mean_t2[1] && mean_t2[1] > mean_t2[2])) pass = false;
  if (!(mean_t3[0] > mean_t3[1] && mean_t3[1] > mean_t3[2])) pass = false;
  detail += fmt("mean |rt(n) T1| = %.5f > %.5f > %.5f, T2 and T3 likewise; "
                "residuals <= 1e-10",
                mean_t1[0], mean_t1[1], mean_t1[2]);
  report(9, "estimating-equation decomposition", pass, detail);
}

void criterion_10_cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "ctdr_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);

  const auto write_config = [&](const std::string& name,
                                const std::string& text) {
    const fs::path path = root / name;
    std::ofstream out(path);
    out << text;
    return path.string();
  };
  const std::string scenario_cfg = write_config("scenario.cfg",
                                                "dgp.scenario = censoring\n"
                                                "n = 300\n"
                                                "replications = 40\n"
                                                "seed = 99\n"
                                                "output.samples = 1\n");
  const std::string matrix_cfg = write_config("matrix.cfg",
                                              "dgp.scenario = censoring\n"
                                              "n = 200\n"
                                              "replications = 10\n"
                                              "seed = 98\n");
  const std::string diagnose_cfg = write_config("diagnose.cfg",
                                                "dgp.scenario = censoring\n"
                                                "n = 200\n"
                                                "replications = 10\n"
                                                "seed = 97\n"
                                                "tv_gap.n_grid = 100,400\n"
                                                "tv_gap.replications = 3\n"
                                                "rates.alpha_sums = 0.6\n"
                                                "rates.n_grid = 400\n"
                                                "norm_decay.n_grid = 100,200\n"
                                                "norm_decay.replications = 4\n");
  const std::string decompose_cfg = write_config("decompose.cfg",
                                                 "dgp.scenario = truncation\n"
                                                 "n = 200\n"
                                                 "replications = 6\n"
                                                 "seed = 96\n"
                                                 "nuisance.event.mode = fitted-correct\n"
                                                 "nuisance.coarsening.mode = fitted-correct\n");

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const auto outputs_identical = [&](const fs::path& a, const fs::path& b) {
    // every CSV must match byte for byte; the manifest's wall time is the
    // one permitted difference
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      if (slurp(entry.path()) != slurp(b / entry.path().filename())) {
        return false;
      }
    }
    return true;
  };

  bool pass = true;
  std::string detail;
  const struct {
    const char* command;
    std::string config;
  } runs[4] = {
      {"simulate", scenario_cfg},
      {"dr-matrix", matrix_cfg},
      {"diagnose", diagnose_cfg},
      {"decompose", decompose_cfg},
  };
  for (const auto& r : runs) {
    const fs::path out1 = root / (std::string(r.command) + "_1");
    const fs::path out2 = root / (std::string(r.command) + "_2");
    const fs::path out8 = root / (std::string(r.command) + "_8");
    const int c1 = run_cli({r.command, "--config", r.config, "--out",
                            out1.string(), "--threads", "1"});
    const int c2 = run_cli({r.command, "--config", r.config, "--out",
                            out2.string(), "--threads", "1"});
    const int c8 = run_cli({r.command, "--config", r.config, "--out",
                            out8.string(), "--threads", "8"});
    if (c1 != 0 || c2 != 0 || c8 != 0) pass = false;
    if (!outputs_identical(out1, out2) || !outputs_identical(out1, out8)) {
      pass = false;
      detail += fmt("%s differs; ", r.command);
    }
  }
  if (detail.empty()) detail = "rerun and threads 1 vs 8 byte-identical for all subcommands";
  report(10, "CLI determinism", pass, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite (seeds pinned)\n");
  try {
    criterion_1_integration_oracle();
    criterion_2_closed_form_reduction();
    const double coverage = criterion_3_dr_matrix();
    criterion_4_coverage(coverage);
    criterion_5_root_n_scaling();
    criterion_6_crossfit_anchor();
    criterion_7_rate_condition();
    criterion_8_tv_gap();
    criterion_9_decomposition();
    criterion_10_cli_determinism();
  } catch (const std::exception& e) {
    std::printf("[FAIL] suite aborted: %s\n", e.what());
    return 1;
  }
  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}
