#pragma once

#include <functional>
#include <limits>
#include <vector>

namespace ctdr {

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// Right-continuous step function with left limits. The value on
/// [jump_times[k], jump_times[k+1]) is post_jump_values[k]; initial_value
/// applies before the first jump and the path is constant after the last.
struct StepPath {
  double initial_value = 0.0;
  std::vector<double> jump_times;
  std::vector<double> post_jump_values;

  StepPath() = default;
  StepPath(double initial, std::vector<double> times, std::vector<double> values);

  double value_at(double t) const;
  double left_limit_at(double t) const;
  double final_value() const;
  bool has_jump_at(double t) const;
};

struct Jump {
  double time = 0.0;
  double size = 0.0;
};

struct DensitySegment {
  double start = 0.0;
  double end = 0.0;
  double rate = 0.0;
};

/// Cadlag path of finite variation: a pure-jump part plus a piecewise-constant
/// density part. Constant after its last breakpoint, so evaluation at
/// kInfiniteTime is well defined.
struct FiniteVariationPath {
  double initial_value = 0.0;
  std::vector<Jump> jumps;               // strictly increasing times, all >= 0
  std::vector<DensitySegment> segments;  // ordered, disjoint, end > start

  FiniteVariationPath() = default;
  FiniteVariationPath(double initial, std::vector<Jump> jumps,
                      std::vector<DensitySegment> segments);

  double value_at(double t) const;
  double left_limit_at(double t) const;
  double final_value() const;
};

FiniteVariationPath to_finite_variation(const StepPath& p);

/// Empirical CDF of a sample as a step path (ties merge into one jump).
StepPath ecdf_path(std::vector<double> sample);

struct NormReport {
  double sup_norm = 0.0;
  double tv_norm = 0.0;
  int sample_size = 0;
};

struct RsOptions {
  // Evaluate a step integrand at t- instead of t on integrator jumps
  // (predictable-integrand convention). Without the flag, a shared jump time
  // between integrand and integrator is a diagnostic error.
  bool use_left_limits = false;
  // Quadrature tolerances for callable integrands on density segments.
  double quad_abs_tol = 1e-14;
  double quad_rel_tol = 1e-12;
};

/// Pathwise Riemann-Stieltjes integral of the integrand against the
/// integrator over (0, upper]. Jumps exactly at t == 0 belong to the initial
/// condition and are not integrated. Exact for step integrands; a callable
/// integrand is integrated against density segments by adaptive quadrature.
double rs_integrate(const StepPath& integrand, const FiniteVariationPath& integrator,
                    double upper = kInfiniteTime, RsOptions opts = {});
double rs_integrate(const std::function<double(double)>& integrand,
                    const FiniteVariationPath& integrator,
                    double upper = kInfiniteTime, RsOptions opts = {});

/// Product integral of a nondecreasing cumulative hazard:
/// exp(-continuous part on [0,t]) * prod_{jumps <= t} (1 - size).
double product_limit(const FiniteVariationPath& cumulative_hazard, double t);

struct TvOptions {
  bool include_initial = true;  // add |f(0)| to the variation
};

double total_variation(const StepPath& f, TvOptions opts = {});
double total_variation(const FiniteVariationPath& f, TvOptions opts = {});
// Total variation of the pointwise difference a - b, computed exactly by
// refining at every jump time and segment breakpoint of both paths.
double total_variation(const StepPath& a, const StepPath& b, TvOptions opts = {});
double total_variation(const StepPath& a, const FiniteVariationPath& b, TvOptions opts = {});
double total_variation(const FiniteVariationPath& a, const FiniteVariationPath& b,
                       TvOptions opts = {});

/// Exact supremum of |a - b| over [0, infinity); attained at a breakpoint of
/// either path or at one of its left limits.
double sup_distance(const StepPath& a, const StepPath& b);
double sup_distance(const StepPath& a, const FiniteVariationPath& b);
double sup_distance(const FiniteVariationPath& a, const FiniteVariationPath& b);

}  // namespace ctdr
