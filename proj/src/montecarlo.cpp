#include "ctdr/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "ctdr/common.hpp"
#include "ctdr/crossfit.hpp"
#include "ctdr/errors.hpp"
#include "ctdr/rng.hpp"
#include "ctdr/step_path.hpp"

namespace ctdr {

namespace {

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Work items are independent and keyed by index; outputs land in
// index-addressed slots, so scheduling order cannot change any result.
void parallel_for(int count, int threads, const std::function<void(int)>& work) {
  threads = std::min(resolve_threads(threads), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto runner = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) break;
      try {
        work(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(runner);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct ModelPair {
  ConditionalHazardModel event;
  ConditionalHazardModel coarsening;
};

template <class Obs>
struct ScenarioTraits;

template <>
struct ScenarioTraits<CensoringObservation> {
  using Plugin = CensoringPlugin;
  static constexpr Scenario scenario = Scenario::censoring;
  static std::vector<CensoringObservation> generate(const DgpSpec& spec, int n,
                                                    std::uint64_t seed) {
    return generate_censoring(spec, n, seed);
  }
  static ConditionalHazardModel fit(const std::vector<CensoringObservation>& data,
                                    NuisanceTarget target, const DgpSpec& spec,
                                    bool include_covariate) {
    FitOptions opts;
    opts.include_covariate = include_covariate;
    opts.admin_horizon = spec.tau_max;
    return fit_piecewise_exponential(data, target, opts);
  }
  static Plugin make_plugin(const ConditionalHazardModel& event,
                            const ConditionalHazardModel& coarsening,
                            const DgpSpec& spec) {
    return Plugin(event, coarsening, spec.t0);
  }
};

template <>
struct ScenarioTraits<TruncationObservation> {
  using Plugin = TruncationPlugin;
  static constexpr Scenario scenario = Scenario::truncation;
  static std::vector<TruncationObservation> generate(const DgpSpec& spec, int n,
                                                     std::uint64_t seed) {
    return generate_truncation(spec, n, seed);
  }
  static ConditionalHazardModel fit(const std::vector<TruncationObservation>& data,
                                    NuisanceTarget target, const DgpSpec& spec,
                                    bool include_covariate) {
    (void)spec;
    FitOptions opts;
    opts.include_covariate = include_covariate;
    return fit_piecewise_exponential(data, target, opts);
  }
  static Plugin make_plugin(const ConditionalHazardModel& event,
                            const ConditionalHazardModel& coarsening,
                            const DgpSpec& spec) {
    return Plugin(event, coarsening, spec.t0);
  }
};

template <class Obs>
ConditionalHazardModel build_nuisance(const NuisanceSpec& nspec,
                                      NuisanceTarget target,
                                      const ScenarioConfig& cfg,
                                      const std::vector<Obs>& data,
                                      const ConditionalHazardModel& truth) {
  switch (nspec.mode) {
    case NuisanceMode::oracle:
      return truth;
    case NuisanceMode::fitted_correct:
      return ScenarioTraits<Obs>::fit(data, target, cfg.dgp, true);
    case NuisanceMode::fitted_misspecified:
      return ScenarioTraits<Obs>::fit(data, target, cfg.dgp, false);
    case NuisanceMode::synthetic_rate:
      // The perturbation scale is tied to the full sample size, also under
      // cross-fitting (the models do not depend on the data).
      return synthetic_rate(truth, nspec.rate_exponent, nspec.amplitude, cfg.n,
                            nspec.shape_seed, cfg.dgp.tau_max);
  }
  fail(ErrorCode::config, "unknown nuisance mode");
}

// Per-replication fitted models; under cross-fitting one pair per fold.
template <class Obs>
struct ReplicationModels {
  bool crossfit = false;
  FoldAssignment folds;
  std::vector<ModelPair> per_fold;  // fold l at index l-1; single fit at [0]

  const ModelPair& for_observation(int i) const {
    if (!crossfit) return per_fold[0];
    return per_fold[static_cast<std::size_t>(
        folds.assignment[static_cast<std::size_t>(i)] - 1)];
  }
};

template <class Obs>
ReplicationModels<Obs> build_replication_models(const ScenarioConfig& cfg,
                                                const std::vector<Obs>& data,
                                                const ModelPair& truth,
                                                std::uint64_t rep_seed) {
  ReplicationModels<Obs> out;
  if (cfg.estimator == EstimatorKind::mdr) {
    out.crossfit = false;
    out.per_fold.push_back(
        {build_nuisance(cfg.event_nuisance, NuisanceTarget::event, cfg, data,
                        truth.event),
         build_nuisance(cfg.coarsening_nuisance, NuisanceTarget::coarsening, cfg,
                        data, truth.coarsening)});
    return out;
  }
  out.crossfit = true;
  const int n = static_cast<int>(data.size());
  out.folds = split_folds(n, cfg.folds, derive_seed(rep_seed, 0x666f6c64ULL));
  for (int l = 1; l <= cfg.folds; ++l) {
    std::vector<Obs> training;
    training.reserve(data.size());
    for (int i = 0; i < n; ++i) {
      if (out.folds.assignment[static_cast<std::size_t>(i)] != l) {
        training.push_back(data[static_cast<std::size_t>(i)]);
      }
    }
    out.per_fold.push_back(
        {build_nuisance(cfg.event_nuisance, NuisanceTarget::event, cfg, training,
                        truth.event),
         build_nuisance(cfg.coarsening_nuisance, NuisanceTarget::coarsening, cfg,
                        training, truth.coarsening)});
  }
  return out;
}

// Per-observation affine values against a model assignment; fold-aware.
template <class Obs>
std::vector<AffineXi> affine_against(const ScenarioConfig& cfg,
                                     const std::vector<Obs>& data,
                                     const ReplicationModels<Obs>& models,
                                     bool use_event_of_models,
                                     bool use_coarsening_of_models,
                                     const ModelPair& reference) {
  using Traits = ScenarioTraits<Obs>;
  const int n = static_cast<int>(data.size());
  std::vector<AffineXi> xi(static_cast<std::size_t>(n));
  const std::size_t plugin_count = models.per_fold.size();
  std::vector<typename Traits::Plugin> plugins;
  plugins.reserve(plugin_count);
  for (const auto& pair : models.per_fold) {
    plugins.push_back(Traits::make_plugin(
        use_event_of_models ? pair.event : reference.event,
        use_coarsening_of_models ? pair.coarsening : reference.coarsening,
        cfg.dgp));
  }
  for (int i = 0; i < n; ++i) {
    const std::size_t p =
        models.crossfit
            ? static_cast<std::size_t>(
                  models.folds.assignment[static_cast<std::size_t>(i)] - 1)
            : 0;
    xi[static_cast<std::size_t>(i)] = plugins[p].affine(data[static_cast<std::size_t>(i)]);
  }
  return xi;
}

template <class Obs>
RepOutcome one_replication(const ScenarioConfig& cfg, int rep,
                           const ModelPair& truth, double theta_true) {
  RepOutcome out;
  const std::uint64_t rep_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(rep));
  try {
    const auto data = ScenarioTraits<Obs>::generate(cfg.dgp, cfg.n, rep_seed);
    const auto models = build_replication_models(cfg, data, truth, rep_seed);
    const auto xi = affine_against(cfg, data, models, true, true, truth);
    const EstimateResult res = solve_affine(xi);
    out.ok = true;
    out.theta_hat = res.theta_hat;
    out.se = res.se;
    out.covered = res.ci_low <= theta_true && theta_true <= res.ci_high;
  } catch (const CtdrError& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

ScenarioReport aggregate(const ScenarioConfig& cfg, double theta_true,
                         std::vector<RepOutcome> outcomes) {
  ScenarioReport report;
  report.true_theta = theta_true;
  report.n = cfg.n;
  report.replications = cfg.replications;

  std::vector<double> thetas, ses;
  int covered = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++report.failures;
      continue;
    }
    thetas.push_back(o.theta_hat);
    ses.push_back(o.se);
    if (o.covered) ++covered;
  }
  report.outcomes = std::move(outcomes);
  if (report.failures * 20 > cfg.replications) {
    fail(ErrorCode::scenario,
         "more than 5% of replications failed (" +
             std::to_string(report.failures) + " of " +
             std::to_string(cfg.replications) + "); first error: " +
             [&]() -> std::string {
           for (const auto& o : report.outcomes) {
             if (!o.ok) return o.error;
           }
           return "";
         }());
  }
  const std::size_t m = thetas.size();
  if (m == 0) return report;
  const double mean_theta = pairwise_mean(thetas);
  report.bias = mean_theta - theta_true;
  report.mean_se = pairwise_mean(ses);
  report.coverage = static_cast<double>(covered) / static_cast<double>(m);
  if (m >= 2) {
    std::vector<double> sq(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = thetas[i] - mean_theta;
      sq[i] = d * d;
    }
    report.has_sd = true;
    report.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(m - 1));
    report.mcse = report.sd / std::sqrt(static_cast<double>(m));
  }
  return report;
}

template <class Obs>
ScenarioReport run_scenario_impl(const ScenarioConfig& cfg, int threads) {
  const double theta_true = true_estimand(cfg.dgp);
  auto [event_truth, coarsening_truth] = true_nuisance(cfg.dgp);
  const ModelPair truth{std::move(event_truth), std::move(coarsening_truth)};
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(cfg.replications));
  parallel_for(cfg.replications, threads, [&](int r) {
    outcomes[static_cast<std::size_t>(r)] =
        one_replication<Obs>(cfg, r, truth, theta_true);
  });
  return aggregate(cfg, theta_true, std::move(outcomes));
}

}  // namespace

void ScenarioConfig::validate() const {
  dgp.validate();
  require(replications >= 1, ErrorCode::config, "replications must be >= 1");
  require(n >= 50, ErrorCode::config, "n must be >= 50");
  event_nuisance.validate();
  coarsening_nuisance.validate();
  if (estimator == EstimatorKind::rdr) {
    require(folds >= 2 && folds <= n, ErrorCode::config,
            "folds must lie in [2, n]");
  }
}

ScenarioReport run_scenario(const ScenarioConfig& config, int threads) {
  config.validate();
  if (config.dgp.scenario == Scenario::censoring) {
    return run_scenario_impl<CensoringObservation>(config, threads);
  }
  return run_scenario_impl<TruncationObservation>(config, threads);
}

std::vector<DrMatrixCell> dr_matrix(const ScenarioConfig& base, int threads) {
  const struct {
    const char* label;
    NuisanceMode event;
    NuisanceMode coarsening;
  } cells[4] = {
      {"both_correct", NuisanceMode::fitted_correct, NuisanceMode::fitted_correct},
      {"event_misspecified", NuisanceMode::fitted_misspecified,
       NuisanceMode::fitted_correct},
      {"coarsening_misspecified", NuisanceMode::fitted_correct,
       NuisanceMode::fitted_misspecified},
      {"both_misspecified", NuisanceMode::fitted_misspecified,
       NuisanceMode::fitted_misspecified},
  };
  std::vector<DrMatrixCell> out;
  for (const auto& cell : cells) {
    ScenarioConfig cfg = base;
    cfg.event_nuisance.mode = cell.event;
    cfg.coarsening_nuisance.mode = cell.coarsening;
    out.push_back({cell.label, run_scenario(cfg, threads)});
  }
  return out;
}

std::vector<RootNScalingRow> root_n_scaling_study(const ScenarioConfig& base,
                                                  const std::vector<int>& n_grid,
                                                  int threads) {
  std::vector<RootNScalingRow> rows;
  for (int n : n_grid) {
    ScenarioConfig cfg = base;
    cfg.n = n;
    const ScenarioReport rep = run_scenario(cfg, threads);
    RootNScalingRow row;
    row.n = n;
    row.sd_sqrt_n = rep.sd * std::sqrt(static_cast<double>(n));
    row.coverage = rep.coverage;
    row.se_to_sd = rep.has_sd && rep.sd > 0.0 ? rep.mean_se / rep.sd : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<TvGapRow> tv_gap_study(const std::vector<int>& n_grid,
                                   int replications, std::uint64_t master_seed) {
  require(replications >= 1, ErrorCode::config, "replications must be >= 1");
  const FiniteVariationPath uniform_cdf(0.0, {}, {{0.0, 1.0, 1.0}});
  std::vector<TvGapRow> rows;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const int n = n_grid[gi];
    require(n >= 1, ErrorCode::config, "n grid entries must be >= 1");
    std::vector<double> sups(static_cast<std::size_t>(replications));
    std::vector<double> tvs(static_cast<std::size_t>(replications));
    for (int r = 0; r < replications; ++r) {
      Rng rng(derive_seed(derive_seed(master_seed, gi), static_cast<std::uint64_t>(r)));
      std::vector<double> sample(static_cast<std::size_t>(n));
      for (auto& x : sample) x = rng.uniform();
      const StepPath ecdf = ecdf_path(std::move(sample));
      sups[static_cast<std::size_t>(r)] = sup_distance(ecdf, uniform_cdf);
      tvs[static_cast<std::size_t>(r)] = total_variation(ecdf, uniform_cdf);
    }
    rows.push_back({n, pairwise_mean(sups), pairwise_mean(tvs)});
  }
  return rows;
}

std::vector<TvGapRow> synthetic_tv_contrast(const DgpSpec& dgp, double alpha,
                                            double amplitude,
                                            std::uint64_t shape_seed,
                                            const std::vector<int>& n_grid) {
  const auto truth = true_nuisance(dgp).first;
  const FiniteVariationPath truth_path =
      truth.cumulative_hazard_path(0.0, dgp.tau_max);
  std::vector<TvGapRow> rows;
  for (int n : n_grid) {
    const auto perturbed =
        synthetic_rate(truth, alpha, amplitude, n, shape_seed, dgp.tau_max);
    const FiniteVariationPath path =
        perturbed.cumulative_hazard_path(0.0, dgp.tau_max);
    rows.push_back({n, sup_distance(path, truth_path),
                    total_variation(path, truth_path)});
  }
  return rows;
}

std::vector<TvGapRow> norm_decay_study(const ScenarioConfig& base,
                                       const std::vector<int>& n_grid,
                                       int replications, double z_ref,
                                       int threads) {
  require(base.dgp.scenario == Scenario::censoring, ErrorCode::config,
          "norm decay study runs on the censoring scenario");
  require(replications >= 1, ErrorCode::config, "replications must be >= 1");
  const auto truth = true_nuisance(base.dgp).first;
  const FiniteVariationPath truth_path =
      truth.cumulative_hazard_path(z_ref, base.dgp.tau_max);
  const bool misspecified =
      base.event_nuisance.mode == NuisanceMode::fitted_misspecified;
  std::vector<TvGapRow> rows;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const int n = n_grid[gi];
    std::vector<double> sups(static_cast<std::size_t>(replications));
    std::vector<double> tvs(static_cast<std::size_t>(replications));
    parallel_for(replications, threads, [&](int r) {
      const std::uint64_t seed =
          derive_seed(derive_seed(base.master_seed, gi), static_cast<std::uint64_t>(r));
      const auto data = generate_censoring(base.dgp, n, seed);
      FitOptions opts;
      opts.include_covariate = !misspecified;
      opts.admin_horizon = base.dgp.tau_max;
      const auto fit = fit_piecewise_exponential(data, NuisanceTarget::event, opts);
      const FiniteVariationPath path =
          fit.cumulative_hazard_path(z_ref, base.dgp.tau_max);
      sups[static_cast<std::size_t>(r)] = sup_distance(path, truth_path);
      tvs[static_cast<std::size_t>(r)] = total_variation(path, truth_path);
    });
    rows.push_back({n, pairwise_mean(sups), pairwise_mean(tvs)});
  }
  return rows;
}

double cross_integral(const ConditionalHazardModel& h_perturbed,
                      const ConditionalHazardModel& h_truth,
                      const ConditionalHazardModel& q_perturbed,
                      const ConditionalHazardModel& q_truth, double z,
                      double horizon) {
  // Both cumulative-hazard differences are piecewise linear, so on a grid
  // refined at every breakpoint the integrand is linear and the trapezoid is
  // exact.
  std::vector<double> cuts;
  auto add_cuts = [&](const ConditionalHazardModel& m) {
    if (m.kind() != ConditionalHazardModel::Kind::hazard) return;
    for (double c : m.cutpoints()) {
      if (c > 0.0 && c < horizon) cuts.push_back(c);
    }
  };
  add_cuts(h_perturbed);
  add_cuts(h_truth);
  add_cuts(q_perturbed);
  add_cuts(q_truth);
  cuts.push_back(horizon);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto h_diff = [&](double t) {
    return h_perturbed.cumulative_hazard(t, z) - h_truth.cumulative_hazard(t, z);
  };
  double acc = 0.0;
  double lo = 0.0;
  double h_lo = 0.0;
  for (double hi : cuts) {
    const double q_rate =
        q_perturbed.hazard(lo, z) - q_truth.hazard(lo, z);
    const double h_hi = h_diff(hi);
    acc += q_rate * 0.5 * (h_lo + h_hi) * (hi - lo);
    h_lo = h_hi;
    lo = hi;
  }
  return acc;
}

std::vector<RateConditionRow> rate_condition_study(
    const ScenarioConfig& base, const std::vector<double>& alpha_sums,
    const std::vector<int>& n_grid, int threads) {
  require(base.event_nuisance.mode == NuisanceMode::synthetic_rate &&
              base.coarsening_nuisance.mode == NuisanceMode::synthetic_rate,
          ErrorCode::config,
          "rate condition study needs synthetic-rate nuisance modes");
  const auto truth = true_nuisance(base.dgp);
  std::vector<RateConditionRow> rows;
  for (double sum : alpha_sums) {
    require(sum > 0.0 && sum < 2.0, ErrorCode::config,
            "alpha sums must lie in (0, 2)");
    for (int n : n_grid) {
      ScenarioConfig cfg = base;
      cfg.n = n;
      cfg.event_nuisance.rate_exponent = sum / 2.0;
      cfg.coarsening_nuisance.rate_exponent = sum / 2.0;
      const ScenarioReport rep = run_scenario(cfg, threads);
      RateConditionRow row;
      row.alpha_sum = sum;
      row.n = n;
      row.sqrtn_bias = std::sqrt(static_cast<double>(n)) * rep.bias;
      row.sqrtn_mcse = std::sqrt(static_cast<double>(n)) * rep.mcse;
      row.coverage = rep.coverage;
      const auto h_tilde = synthetic_rate(
          truth.first, cfg.event_nuisance.rate_exponent,
          cfg.event_nuisance.amplitude, n, cfg.event_nuisance.shape_seed,
          cfg.dgp.tau_max);
      const auto q_tilde = synthetic_rate(
          truth.second, cfg.coarsening_nuisance.rate_exponent,
          cfg.coarsening_nuisance.amplitude, n, cfg.coarsening_nuisance.shape_seed,
          cfg.dgp.tau_max);
      row.cross_integral = cross_integral(h_tilde, truth.first, q_tilde,
                                          truth.second, 0.0, cfg.dgp.tau_max);
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

double population_xi_mean(const DgpSpec& dgp, double theta_true, double theta) {
  // With the generating truth as both processes, E[Xi(theta)] is available in
  // closed form: theta_true - theta for censoring, scaled by the sampling
  // probability 1/P(Q <= T) under truncation.
  if (dgp.scenario == Scenario::censoring) return theta_true - theta;
  return (theta_true - theta) / dgp.acceptance_probability();
}

template <class Obs>
DecompositionReport decomposition_impl(const ScenarioConfig& cfg,
                                       DecompositionPoint point, int threads) {
  const double theta_true = true_estimand(cfg.dgp);
  auto [event_truth, coarsening_truth] = true_nuisance(cfg.dgp);
  const ModelPair truth{std::move(event_truth), std::move(coarsening_truth)};

  DecompositionReport report;
  report.true_theta = theta_true;
  report.rows.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(cfg.replications, threads, [&](int r) {
    const std::uint64_t rep_seed =
        derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r));
    const auto data = ScenarioTraits<Obs>::generate(cfg.dgp, cfg.n, rep_seed);
    const auto models = build_replication_models(cfg, data, truth, rep_seed);
    const auto xi11 = affine_against(cfg, data, models, true, true, truth);
    const auto xi10 = affine_against(cfg, data, models, true, false, truth);
    const auto xi01 = affine_against(cfg, data, models, false, true, truth);
    const auto xi00 = affine_against(cfg, data, models, false, false, truth);

    const double theta_eval = point == DecompositionPoint::at_truth
                                  ? theta_true
                                  : solve_affine(xi11).theta_hat;
    const std::size_t n = xi11.size();
    std::vector<double> v1(n), v2(n), v3(n), v4(n), v5(n), v_full(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x11 = xi11[i].at(theta_eval);
      const double x10 = xi10[i].at(theta_eval);
      const double x01 = xi01[i].at(theta_eval);
      const double x00 = xi00[i].at(theta_eval);
      const double x00_true = xi00[i].at(theta_true);
      v1[i] = x11 - x10 - x01 + x00;
      v2[i] = x10 - x00;
      v3[i] = x01 - x00;
      v4[i] = x00 - x00_true;
      v5[i] = x00_true;
      v_full[i] = x11;
    }
    DecompositionRow row;
    row.replication = r;
    row.t1 = pairwise_mean(v1);
    row.t2 = pairwise_mean(v2);
    row.t3 = pairwise_mean(v3);
    const double p_eval = population_xi_mean(cfg.dgp, theta_true, theta_eval);
    row.t4 = pairwise_mean(v4) - p_eval;  // P Xi(theta_true) == 0
    row.t5 = pairwise_mean(v5);
    row.t6 = p_eval;
    const double reconstruction = row.t1 + row.t2 + row.t3 + row.t4 + row.t5 + row.t6;
    row.reconstruction_residual = reconstruction - pairwise_mean(v_full);
    if (!(std::abs(row.reconstruction_residual) <= 1e-10)) {
      fail(ErrorCode::invariant,
           "decomposition reconstruction residual " +
               std::to_string(row.reconstruction_residual) + " exceeds 1e-10");
    }
    report.rows[static_cast<std::size_t>(r)] = row;
  });
  return report;
}

}  // namespace

DecompositionReport decomposition_report(const ScenarioConfig& config,
                                         DecompositionPoint point, int threads) {
  config.validate();
  if (config.dgp.scenario == Scenario::censoring) {
    return decomposition_impl<CensoringObservation>(config, point, threads);
  }
  return decomposition_impl<TruncationObservation>(config, point, threads);
}

}  // namespace ctdr
