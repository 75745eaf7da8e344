#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ctdr/dgp.hpp"
#include "ctdr/hazard_model.hpp"
#include "ctdr/step_path.hpp"

namespace ctdr {

enum class NuisanceTarget { event, coarsening };

enum class NuisanceMode {
  oracle,               // exact generating hazards
  fitted_correct,       // piecewise-exponential MLE with the covariate
  fitted_misspecified,  // same family with the covariate omitted
  synthetic_rate,       // truth perturbed at a controlled n^{-alpha} rate
};

struct NuisanceSpec {
  NuisanceMode mode = NuisanceMode::oracle;
  // synthetic-rate parameters
  double rate_exponent = 0.3;  // alpha in (0, 1)
  double amplitude = 1.0;      // c >= 0; c == 0 reproduces the truth exactly
  std::uint64_t shape_seed = 1;

  void validate() const;
};

struct FitOptions {
  // Unset -> quartiles of the target times; an explicit empty list fits a
  // single piece.
  std::optional<std::vector<double>> cutpoints;
  bool include_covariate = true;
  // Censoring data: observations with t_tilde >= admin_horizon and delta == 0
  // are administrative, not coarsening events.
  double admin_horizon = kInfiniteTime;
  double gradient_tol = 1e-10;
  int max_iterations = 100;
};

/// Quartiles (25/50/75%) of the given times, deduplicated.
std::vector<double> default_cutpoints(std::vector<double> times);

/// Maximizes the Poisson-form likelihood of the piecewise-exponential
/// proportional-hazards model by Newton iteration. Every piece must contain
/// at least one event of the target type and positive exposure.
ConditionalHazardModel fit_piecewise_exponential(
    const std::vector<CensoringObservation>& data, NuisanceTarget target,
    const FitOptions& opts = {});

/// Truncation-data fits. The event distribution uses the left-truncated
/// likelihood (at-risk from q to t). The truncation-time distribution uses
/// the conditional likelihood g(q|z) / G(t|z), which does not involve the
/// event distribution.
ConditionalHazardModel fit_piecewise_exponential(
    const std::vector<TruncationObservation>& data, NuisanceTarget target,
    const FitOptions& opts = {});

/// Max-norm of the fitting score at the given model's parameters.
double score_norm(const std::vector<CensoringObservation>& data,
                  NuisanceTarget target, const ConditionalHazardModel& model,
                  const FitOptions& opts = {});
double score_norm(const std::vector<TruncationObservation>& data,
                  NuisanceTarget target, const ConditionalHazardModel& model,
                  const FitOptions& opts = {});

/// Per-stratum Nelson-Aalen cumulative hazards; strata partition the
/// covariate axis at the given boundaries.
struct StratifiedNPEstimate {
  std::vector<double> boundaries;  // interior boundaries over z, ascending
  std::vector<StepPath> cumulative_hazards;

  std::size_t stratum_index(double z) const;
};

StratifiedNPEstimate nelson_aalen_stratified(
    const std::vector<CensoringObservation>& data, NuisanceTarget target,
    std::vector<double> boundaries, double admin_horizon = kInfiniteTime);
StratifiedNPEstimate nelson_aalen_stratified(
    const std::vector<TruncationObservation>& data,
    std::vector<double> boundaries);

/// Hazard perturbed multiplicatively at a controlled rate:
///   lambda~(t|z) = lambda(t|z) * exp(c * n^{-alpha} * zeta(t)),
/// where zeta is a fixed smooth three-term cosine profile with sup|zeta| = 1
/// drawn once from the shape seed. The smooth profile is laid down on a fine
/// piecewise-constant grid so the result stays inside the piecewise-
/// exponential family (sup and TV errors of the cumulative hazard then shrink
/// at the same n^{-alpha} order). c == 0 returns the truth unchanged.
ConditionalHazardModel synthetic_rate(const ConditionalHazardModel& truth,
                                      double alpha, double amplitude, int n,
                                      std::uint64_t shape_seed, double horizon,
                                      int grid_pieces = 96);

/// The zeta profile used by synthetic_rate (exposed for rate diagnostics).
struct ShapeProfile {
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double horizon = 1.0;
  double scale = 1.0;  // normalizes sup|zeta| to 1

  double value(double t) const;
};

ShapeProfile make_shape_profile(std::uint64_t shape_seed, double horizon);

}  // namespace ctdr
