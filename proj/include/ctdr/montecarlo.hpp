#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctdr/dgp.hpp"
#include "ctdr/estimator.hpp"
#include "ctdr/nuisance.hpp"

namespace ctdr {

enum class EstimatorKind { mdr, rdr };

struct ScenarioConfig {
  DgpSpec dgp;
  EstimatorKind estimator = EstimatorKind::mdr;
  NuisanceSpec event_nuisance;
  NuisanceSpec coarsening_nuisance;
  int n = 2000;
  int replications = 200;
  std::uint64_t master_seed = 12345;
  int folds = 5;  // rdr only

  void validate() const;
};

struct RepOutcome {
  bool ok = false;
  double theta_hat = 0.0;
  double se = 0.0;
  bool covered = false;
  std::string error;
};

struct ScenarioReport {
  double true_theta = 0.0;
  int n = 0;
  int replications = 0;
  int failures = 0;
  double bias = 0.0;
  bool has_sd = false;  // false with fewer than two successful replications
  double sd = 0.0;
  double mcse = 0.0;  // sd / sqrt(successes)
  double mean_se = 0.0;
  double coverage = 0.0;
  std::vector<RepOutcome> outcomes;  // one per replication, index order
};

/// R independent replications of generate / build nuisances / estimate.
/// Replication r always uses derive_seed(master_seed, r), so reports are pure
/// functions of the config and identical across thread counts. Failed
/// replications are recorded; more than 5% of them is a scenario error.
ScenarioReport run_scenario(const ScenarioConfig& config, int threads = 0);

struct DrMatrixCell {
  std::string label;
  ScenarioReport report;
};

/// The four cells {event correct/misspecified} x {coarsening correct/mis},
/// where "correct" fits the generating family with the covariate and
/// "misspecified" omits the covariate.
std::vector<DrMatrixCell> dr_matrix(const ScenarioConfig& base, int threads = 0);

struct RootNScalingRow {
  int n = 0;
  double sd_sqrt_n = 0.0;
  double coverage = 0.0;
  double se_to_sd = 0.0;  // mean sandwich SE / empirical SD
};

std::vector<RootNScalingRow> root_n_scaling_study(const ScenarioConfig& base,
                                                  const std::vector<int>& n_grid,
                                                  int threads = 0);

struct TvGapRow {
  int n = 0;
  double sup_err = 0.0;
  double tv_err = 0.0;
};

/// ECDF of n uniform(0,1) draws against the uniform CDF: the sup error decays
/// like n^{-1/2} while the total-variation error stays at 2.
std::vector<TvGapRow> tv_gap_study(const std::vector<int>& n_grid,
                                   int replications, std::uint64_t master_seed);

/// Contrast case: the smooth synthetic-rate estimate of a cumulative hazard,
/// whose TV error does vanish, at rate n^{-alpha}.
std::vector<TvGapRow> synthetic_tv_contrast(const DgpSpec& dgp, double alpha,
                                            double amplitude,
                                            std::uint64_t shape_seed,
                                            const std::vector<int>& n_grid);

/// Sup and TV error of the fitted event cumulative hazard against the truth
/// at covariate value z_ref, averaged over replications per n.
std::vector<TvGapRow> norm_decay_study(const ScenarioConfig& base,
                                       const std::vector<int>& n_grid,
                                       int replications, double z_ref,
                                       int threads = 0);

struct RateConditionRow {
  double alpha_sum = 0.0;
  int n = 0;
  double sqrtn_bias = 0.0;
  double sqrtn_mcse = 0.0;  // Monte Carlo noise of sqrtn_bias
  double cross_integral = 0.0;
  double coverage = 0.0;
};

/// Synthetic-rate nuisances with alpha_H = alpha_Q = alpha_sum / 2: the
/// cross integrated error is n^{-alpha_sum} by construction. cross_integral
/// is int (Lambda~_H - Lambda_H) d(Lambda~_Q - Lambda_Q) at z = 0 on
/// [0, tau_max], computed exactly (both differences are piecewise linear).
std::vector<RateConditionRow> rate_condition_study(
    const ScenarioConfig& base, const std::vector<double>& alpha_sums,
    const std::vector<int>& n_grid, int threads = 0);

/// Exact cross integral between two pairs of hazard models (diagnostic
/// companion of the rate study).
double cross_integral(const ConditionalHazardModel& h_perturbed,
                      const ConditionalHazardModel& h_truth,
                      const ConditionalHazardModel& q_perturbed,
                      const ConditionalHazardModel& q_truth, double z,
                      double horizon);

enum class DecompositionPoint { at_theta_hat, at_truth };

struct DecompositionRow {
  int replication = 0;
  double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0, t5 = 0.0, t6 = 0.0;
  double reconstruction_residual = 0.0;
};

struct DecompositionReport {
  double true_theta = 0.0;
  std::vector<DecompositionRow> rows;
};

/// Six-term Z-estimation decomposition of the empirical estimating equation,
/// per replication:
///   T1 cross term, T2 event-nuisance term, T3 coarsening-nuisance term,
///   T4 equicontinuity term (P_n - P){Xi(theta) - Xi(theta_true)},
///   T5 CLT term (P_n - P) Xi(theta_true), T6 drift term P Xi(theta),
/// with the generating truth as the reference processes. The terms sum to
/// the estimating-equation value; the reconstruction residual is pure
/// floating-point rounding and must stay below 1e-10.
DecompositionReport decomposition_report(const ScenarioConfig& config,
                                         DecompositionPoint point =
                                             DecompositionPoint::at_theta_hat,
                                         int threads = 0);

}  // namespace ctdr
