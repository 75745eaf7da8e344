#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ctdr/dgp.hpp"
#include "ctdr/hazard_model.hpp"
#include "ctdr/step_path.hpp"

namespace ctdr {

/// Per-observation estimating-function value for the linear target
/// D(T,Z;theta) = 1(T > t0) - theta, stored as Xi(theta) = a - b * theta.
struct AffineXi {
  double a = 0.0;
  double b = 0.0;

  double at(double theta) const { return a - b * theta; }
};

struct EstimateResult {
  double theta_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
  double slope = 0.0;  // estimate of d/dtheta E[Xi], negative here
  double equation_residual = 0.0;
};

/// Counting-process martingale residual of the censoring time: one jump of
/// size 1 at t_tilde when delta == 0 (random or administrative censoring),
/// minus the model compensator 1(t_tilde >= t) lambda_C(t|z) dt, laid down
/// exactly as piecewise-constant density segments.
FiniteVariationPath censoring_martingale_path(
    const ConditionalHazardModel& censor_model, const CensoringObservation& obs);

/// Augmented inverse-probability-of-censoring estimating function
///   Xi = delta D(t~,z;theta) / K_C(t~|z)
///        + int_0^{t~} h(t,z;theta) / K_C(t|z) dM_C(t),
/// with K_C the product-limit of the censoring cumulative hazard and
/// h(t,z;theta) = S(max(t,t0)|z)/S(t|z) - theta from the event model.
///
/// Two evaluation routes are shipped: `affine` uses closed-form
/// piecewise-exponential antiderivatives, `affine_via_paths` assembles the
/// martingale path and calls rs_integrate. They agree to the quadrature
/// tolerance and are cross-checked in the tests.
class CensoringPlugin {
 public:
  CensoringPlugin(ConditionalHazardModel event_model,
                  ConditionalHazardModel censor_model, double t0);

  AffineXi affine(const CensoringObservation& obs) const;
  AffineXi affine_via_paths(const CensoringObservation& obs) const;
  double xi(const CensoringObservation& obs, double theta) const {
    return affine(obs).at(theta);
  }

  /// h(t,z;theta) = E[D | T >= t, z]; equals S(t0|z) - theta at t = 0.
  double conditional_residual_mean(double t, double z, double theta) const;

  const ConditionalHazardModel& event_model() const { return event_; }
  const ConditionalHazardModel& censor_model() const { return censor_; }
  double horizon() const { return t0_; }

 private:
  double survival_ratio(double t, double z) const;  // S(max(t,t0))/S(t)

  ConditionalHazardModel event_;
  ConditionalHazardModel censor_;
  double t0_;
};

/// Doubly robust estimating function under covariate-induced dependent left
/// truncation, built from an event-distribution model F(t|z) and a
/// truncation-time model G(t|z):
///   Xi = D(t,z;theta)/G(t|z)
///        + m(q,z;theta) / [(1-F(q|z)) G(q|z)]
///        - int_q^t m(u,z;theta) / [(1-F(u|z)) G(u|z)] * g(u|z)/G(u|z) du,
/// with m(u,z;theta) = E_F[1(T <= u) D(T,z;theta) | z]. The second and third
/// terms are the integral of m/[(1-F)G] against the entry-time martingale
/// residual (reverse-hazard compensator on the risk interval [q, t] minus the
/// unit jump at q), oriented so that the population mean vanishes whenever
/// either model is correct.
class TruncationPlugin {
 public:
  TruncationPlugin(ConditionalHazardModel f_model, ConditionalHazardModel g_model,
                   double t0);

  AffineXi affine(const TruncationObservation& obs) const;
  AffineXi affine_via_paths(const TruncationObservation& obs) const;
  double xi(const TruncationObservation& obs, double theta) const {
    return affine(obs).at(theta);
  }

  const ConditionalHazardModel& event_model() const { return f_; }
  const ConditionalHazardModel& entry_model() const { return g_; }
  double horizon() const { return t0_; }

 private:
  ConditionalHazardModel f_;
  ConditionalHazardModel g_;
  double t0_;
};

/// Exact ratio solution of the pooled linear estimating equation
/// (1/n) sum_i (a_i - b_i theta) = 0, with sandwich standard error
/// sqrt(mean Xi(theta_hat)^2 / slope^2) / sqrt(n). Reductions use
/// index-ordered pairwise summation, so results are bit-stable.
EstimateResult solve_affine(std::span<const AffineXi> xi);

template <class Obs, class Plugin>
std::vector<AffineXi> affine_values(const std::vector<Obs>& sample,
                                    const Plugin& plugin) {
  std::vector<AffineXi> xs;
  xs.reserve(sample.size());
  for (const auto& obs : sample) xs.push_back(plugin.affine(obs));
  return xs;
}

template <class Obs, class Plugin>
EstimateResult solve_mdr(const std::vector<Obs>& sample, const Plugin& plugin) {
  return solve_affine(affine_values(sample, plugin));
}

struct SearchInterval {
  double lo = -1.0;
  double hi = 2.0;
};

/// Bracketed-bisection fallback for estimating functions that are not linear
/// in theta; stops once |mean Xi| <= min(1e-8, 1/n).
EstimateResult solve_bisection(const std::function<double(double)>& mean_xi,
                               const std::function<double(double)>& mean_xi_sq,
                               SearchInterval interval, int n);

}  // namespace ctdr
