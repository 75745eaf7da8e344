#include "ctdr/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctdr/common.hpp"
#include "ctdr/errors.hpp"

namespace ctdr {

namespace {

// Breakpoints of both models plus t0, restricted to (lo, hi); the integrands
// are smooth within each resulting piece.
std::vector<double> merged_grid(const ConditionalHazardModel& a,
                                const ConditionalHazardModel& b, double t0,
                                double lo, double hi) {
  std::vector<double> cuts;
  auto add = [&](double c) {
    if (c > lo && c < hi) cuts.push_back(c);
  };
  if (a.kind() == ConditionalHazardModel::Kind::hazard) {
    for (double c : a.cutpoints()) add(c);
  }
  if (b.kind() == ConditionalHazardModel::Kind::hazard) {
    for (double c : b.cutpoints()) add(c);
  }
  add(t0);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

[[noreturn]] void positivity_error(const char* what, double value, double t,
                                   double z) {
  fail(ErrorCode::positivity,
       std::string(what) + " = " + std::to_string(value) + " at t=" +
           std::to_string(t) + ", z=" + std::to_string(z) +
           " is below the positivity floor");
}

}  // namespace

// ---------------------------------------------------------------------------
// Censoring plugin

CensoringPlugin::CensoringPlugin(ConditionalHazardModel event_model,
                                 ConditionalHazardModel censor_model, double t0)
    : event_(std::move(event_model)), censor_(std::move(censor_model)), t0_(t0) {
  require(std::isfinite(t0) && t0 > 0.0, ErrorCode::input, "t0 must be > 0");
  require(event_.kind() != ConditionalHazardModel::Kind::unit_cdf,
          ErrorCode::input, "event model cannot be unit_cdf");
  require(censor_.kind() != ConditionalHazardModel::Kind::unit_cdf,
          ErrorCode::input, "censoring model cannot be unit_cdf");
}

double CensoringPlugin::survival_ratio(double t, double z) const {
  if (t >= t0_) return 1.0;
  return event_.survival(t0_, z) / event_.survival(t, z);
}

double CensoringPlugin::conditional_residual_mean(double t, double z,
                                                  double theta) const {
  return survival_ratio(t, z) - theta;
}

FiniteVariationPath censoring_martingale_path(
    const ConditionalHazardModel& censor_model, const CensoringObservation& obs) {
  std::vector<Jump> jumps;
  if (obs.delta == 0) jumps.push_back({obs.t_tilde, 1.0});
  std::vector<DensitySegment> segments;
  if (censor_model.kind() == ConditionalHazardModel::Kind::hazard) {
    for (std::size_t k = 0; k < censor_model.piece_count(); ++k) {
      const double lo = censor_model.piece_start(k);
      if (lo >= obs.t_tilde) break;
      const double hi = std::min(censor_model.piece_end(k), obs.t_tilde);
      segments.push_back({lo, hi, -censor_model.hazard(lo, obs.z)});
    }
  }
  return FiniteVariationPath(0.0, std::move(jumps), std::move(segments));
}

AffineXi CensoringPlugin::affine(const CensoringObservation& obs) const {
  require(std::isfinite(obs.t_tilde) && obs.t_tilde > 0.0, ErrorCode::input,
          "t_tilde must be positive and finite");
  const double z = obs.z;
  const double K_end = censor_.survival(obs.t_tilde, z);
  if (!(K_end > kPositivityFloor)) {
    positivity_error("censoring survival K_C", K_end, obs.t_tilde, z);
  }

  AffineXi xi;
  const double inv_K_end = 1.0 / K_end;
  if (obs.delta == 1) {
    xi.a += obs.t_tilde > t0_ ? inv_K_end : 0.0;
    xi.b += inv_K_end;
  } else {
    // Censoring jump of dN_C at t_tilde; h evaluated at the jump time.
    xi.a += survival_ratio(obs.t_tilde, z) * inv_K_end;
    xi.b += inv_K_end;
  }

  // Compensator part: - int_0^{t~} h(t,z;theta) lambda_C(t|z) e^{Lambda_C(t|z)} dt,
  // elementary within each merged piece because both hazards are constant there.
  const double S_t0 = event_.survival(t0_, z);
  const auto cuts = merged_grid(event_, censor_, t0_, 0.0, obs.t_tilde);
  double lo = 0.0;
  double lam_e_cum = 0.0;  // Lambda_E(lo | z)
  double lam_c_cum = 0.0;  // Lambda_C(lo | z)
  for (double hi : cuts) {
    const double lam_e = event_.kind() == ConditionalHazardModel::Kind::hazard
                             ? event_.hazard(lo, z)
                             : 0.0;
    const double lam_c = censor_.kind() == ConditionalHazardModel::Kind::hazard
                             ? censor_.hazard(lo, z)
                             : 0.0;
    const double lam_e_hi = lam_e_cum + lam_e * (hi - lo);
    const double lam_c_hi = lam_c_cum + lam_c * (hi - lo);
    if (lam_c > 0.0) {
      const double d_exp_c = std::exp(lam_c_hi) - std::exp(lam_c_cum);
      xi.b -= d_exp_c;
      if (lo >= t0_) {
        xi.a -= d_exp_c;  // h_a == 1 past t0
      } else {
        // h_a(t) = S(t0) e^{Lambda_E(t)} on pieces below t0
        const double total = lam_e + lam_c;
        const double d_exp_ec =
            std::exp(lam_e_hi + lam_c_hi) - std::exp(lam_e_cum + lam_c_cum);
        xi.a -= S_t0 * lam_c / total * d_exp_ec;
      }
    }
    lam_e_cum = lam_e_hi;
    lam_c_cum = lam_c_hi;
    lo = hi;
  }
  return xi;
}

AffineXi CensoringPlugin::affine_via_paths(const CensoringObservation& obs) const {
  require(std::isfinite(obs.t_tilde) && obs.t_tilde > 0.0, ErrorCode::input,
          "t_tilde must be positive and finite");
  const double z = obs.z;
  const double K_end = censor_.survival(obs.t_tilde, z);
  if (!(K_end > kPositivityFloor)) {
    positivity_error("censoring survival K_C", K_end, obs.t_tilde, z);
  }
  const FiniteVariationPath martingale = censoring_martingale_path(censor_, obs);
  const std::function<double(double)> weighted_h = [this, z](double t) {
    return survival_ratio(t, z) / censor_.survival(t, z);
  };
  const std::function<double(double)> weight = [this, z](double t) {
    return 1.0 / censor_.survival(t, z);
  };
  AffineXi xi;
  xi.a = rs_integrate(weighted_h, martingale);
  xi.b = rs_integrate(weight, martingale);
  if (obs.delta == 1) {
    xi.a += obs.t_tilde > t0_ ? 1.0 / K_end : 0.0;
    xi.b += 1.0 / K_end;
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Truncation plugin

TruncationPlugin::TruncationPlugin(ConditionalHazardModel f_model,
                                   ConditionalHazardModel g_model, double t0)
    : f_(std::move(f_model)), g_(std::move(g_model)), t0_(t0) {
  require(std::isfinite(t0) && t0 > 0.0, ErrorCode::input, "t0 must be > 0");
  require(f_.kind() != ConditionalHazardModel::Kind::unit_cdf, ErrorCode::input,
          "event model cannot be unit_cdf");
  require(g_.kind() != ConditionalHazardModel::Kind::zero_hazard,
          ErrorCode::input,
          "a zero-hazard truncation-time model has G == 0; use unit_cdf for "
          "the no-truncation limit");
}

AffineXi TruncationPlugin::affine(const TruncationObservation& obs) const {
  require(std::isfinite(obs.q) && std::isfinite(obs.t) && obs.q >= 0.0 &&
              obs.q <= obs.t && obs.t > 0.0,
          ErrorCode::input, "truncation observation needs 0 <= q <= t, t > 0");
  const double z = obs.z;
  const bool unit_g = g_.kind() == ConditionalHazardModel::Kind::unit_cdf;
  const double G_T = g_.cdf(obs.t, z);
  const double G_Q = g_.cdf(obs.q, z);
  if (!(G_Q > kPositivityFloor)) {
    positivity_error("truncation-time CDF G", G_Q, obs.q, z);
  }
  const double S_T = f_.survival(obs.t, z);
  if (!(S_T > kPositivityFloor)) {
    positivity_error("event survival 1 - F", S_T, obs.t, z);
  }
  const double S_Q = f_.survival(obs.q, z);
  const double S_t0 = f_.survival(t0_, z);

  AffineXi xi;
  xi.a = (obs.t > t0_ ? 1.0 : 0.0) / G_T;
  xi.b = 1.0 / G_T;

  // Entry-time jump at q: + m(q) / [(1-F(q)) G(q)], with
  // m(u) = max(F(u) - F(t0), 0) - theta F(u).
  const double m_a_q = obs.q > t0_ ? S_t0 - S_Q : 0.0;
  const double m_b_q = 1.0 - S_Q;
  xi.a += m_a_q / (S_Q * G_Q);
  xi.b += m_b_q / (S_Q * G_Q);

  if (unit_g || obs.t == obs.q) return xi;  // no reverse-hazard compensator

  // Compensator part over [q, t]:
  //   - int m(u)/[(1-F(u)) G(u)] * g(u)/G(u) du.
  // On a merged piece the integrand splits as (c e^{f_r (u-lo)} - 1) g/G^2
  // with one shared quadrature J1 per piece and the exact J0 = int g/G^2.
  // J1 is integrated in w = 1/G(u), where dw = -g/G^2 du turns it into
  // int e^{f_r (u(w)-lo)} dw with a bounded smooth integrand even when G is
  // tiny near the entry time.
  const auto cuts = merged_grid(f_, g_, t0_, obs.q, obs.t);
  double lo = obs.q;
  double lam_f_lo = f_.cumulative_hazard(obs.q, z);
  double lam_g_lo = g_.cumulative_hazard(obs.q, z);
  for (double hi : cuts) {
    const double f_r = f_.kind() == ConditionalHazardModel::Kind::hazard
                           ? f_.hazard(lo, z)
                           : 0.0;
    const double g_r = g_.hazard(lo, z);
    const double lam_f_hi = lam_f_lo + f_r * (hi - lo);
    const double lam_g_hi = lam_g_lo + g_r * (hi - lo);
    if (g_r > 0.0) {
      const double G_lo = -std::expm1(-lam_g_lo);
      const double G_hi = -std::expm1(-lam_g_hi);
      const double J0 = 1.0 / G_lo - 1.0 / G_hi;
      double J1;
      if (f_r == 0.0) {
        J1 = J0;
      } else {
        // Substitute s = Lambda_G(u) and integrate in xi = s - s_lo:
        //   J1 = int_0^{ds} e^{nu xi} e^{-(s_lo+xi)} / G(s_lo+xi)^2 dxi,
        // with nu = f_r/g_r. Geometric panels (s doubling from s_lo) track
        // the 1/G^2 peak; Gauss-Legendre is near exact on each panel.
        const double s_lo = lam_g_lo;
        const double ds = g_r * (hi - lo);
        const double nu = f_r / g_r;
        const auto integrand = [s_lo, nu](double xi_s) {
          const double s = s_lo + xi_s;
          const double G = -std::expm1(-s);
          return std::exp(nu * xi_s - s) / (G * G);
        };
        J1 = 0.0;
        double a = 0.0;
        double boundary = s_lo;
        while (a < ds) {
          boundary *= 2.0;
          const double b = std::min(ds, boundary - s_lo);
          if (b <= a) continue;
          J1 += gauss_legendre_15(integrand, a, b);
          a = b;
        }
      }
      const double inv_SF_lo = std::exp(lam_f_lo);  // 1 / S_F(lo)
      xi.b -= inv_SF_lo * J1 - J0;
      if (lo >= t0_) {
        xi.a -= S_t0 * inv_SF_lo * J1 - J0;
      }
    }
    lam_f_lo = lam_f_hi;
    lam_g_lo = lam_g_hi;
    lo = hi;
  }
  return xi;
}

AffineXi TruncationPlugin::affine_via_paths(const TruncationObservation& obs) const {
  require(std::isfinite(obs.q) && std::isfinite(obs.t) && obs.q >= 0.0 &&
              obs.q <= obs.t && obs.t > 0.0,
          ErrorCode::input, "truncation observation needs 0 <= q <= t, t > 0");
  const double z = obs.z;
  const bool unit_g = g_.kind() == ConditionalHazardModel::Kind::unit_cdf;
  const double G_T = g_.cdf(obs.t, z);
  const double G_Q = g_.cdf(obs.q, z);
  if (!(G_Q > kPositivityFloor)) {
    positivity_error("truncation-time CDF G", G_Q, obs.q, z);
  }
  const double S_T = f_.survival(obs.t, z);
  if (!(S_T > kPositivityFloor)) {
    positivity_error("event survival 1 - F", S_T, obs.t, z);
  }
  const double S_t0 = f_.survival(t0_, z);

  // m/[(1-F) G] as callables in u, for the theta-free and theta parts.
  const std::function<double(double)> h_a = [this, z, S_t0](double u) {
    const double sf = f_.survival(u, z);
    const double m = u > t0_ ? S_t0 - sf : 0.0;
    return m / (sf * g_.cdf(u, z));
  };
  const std::function<double(double)> h_b = [this, z](double u) {
    const double sf = f_.survival(u, z);
    return (1.0 - sf) / (sf * g_.cdf(u, z));
  };

  AffineXi xi;
  xi.a = (obs.t > t0_ ? 1.0 : 0.0) / G_T;
  xi.b = 1.0 / G_T;

  // Jump of the entry counting process at q (an atom exactly at 0 is part of
  // the initial condition, where m(0) = 0 anyway).
  if (obs.q > 0.0) {
    const FiniteVariationPath entry_jump(0.0, {{obs.q, 1.0}}, {});
    xi.a += rs_integrate(h_a, entry_jump);
    xi.b += rs_integrate(h_b, entry_jump);
  }

  // Reverse-hazard compensator on the risk interval [q, t], integrated as a
  // Lebesgue segment with the rate g/G folded into the integrand. Tight
  // tolerances keep this route within 1e-10 of the closed form.
  if (!unit_g && obs.t > obs.q) {
    const FiniteVariationPath lebesgue(0.0, {}, {{obs.q, obs.t, 1.0}});
    RsOptions opts;
    opts.quad_abs_tol = 1e-15;
    opts.quad_rel_tol = 1e-13;
    const std::function<double(double)> comp_a = [this, z, &h_a](double u) {
      return h_a(u) * g_.density(u, z) / g_.cdf(u, z);
    };
    const std::function<double(double)> comp_b = [this, z, &h_b](double u) {
      return h_b(u) * g_.density(u, z) / g_.cdf(u, z);
    };
    xi.a -= rs_integrate(comp_a, lebesgue, kInfiniteTime, opts);
    xi.b -= rs_integrate(comp_b, lebesgue, kInfiniteTime, opts);
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Solvers

EstimateResult solve_affine(std::span<const AffineXi> xi) {
  const std::size_t n = xi.size();
  require(n >= 1, ErrorCode::solver, "empty sample");
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = xi[i].a;
    b[i] = xi[i].b;
  }
  const double sum_a = pairwise_sum(a);
  const double sum_b = pairwise_sum(b);
  if (!(sum_b > 0.0)) {
    fail(ErrorCode::solver, "estimating equation has nonpositive slope sum");
  }
  const double theta = sum_a / sum_b;

  std::vector<double> residual(n), residual_sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    residual[i] = a[i] - b[i] * theta;
    residual_sq[i] = residual[i] * residual[i];
  }
  const double mean_residual = pairwise_mean(residual);
  const double tol = std::min(1e-8, 1.0 / static_cast<double>(n));
  if (!(std::abs(mean_residual) <= tol)) {
    fail(ErrorCode::solver, "equation residual " + std::to_string(mean_residual) +
                                " exceeds tolerance");
  }
  const double mean_sq = pairwise_mean(residual_sq);
  const double slope_magnitude = sum_b / static_cast<double>(n);

  EstimateResult r;
  r.theta_hat = theta;
  r.n = static_cast<int>(n);
  r.slope = -slope_magnitude;
  r.equation_residual = mean_residual;
  r.se = std::sqrt(mean_sq) / (slope_magnitude * std::sqrt(static_cast<double>(n)));
  r.ci_low = theta - kZ975 * r.se;
  r.ci_high = theta + kZ975 * r.se;
  return r;
}

EstimateResult solve_bisection(const std::function<double(double)>& mean_xi,
                               const std::function<double(double)>& mean_xi_sq,
                               SearchInterval interval, int n) {
  require(n >= 1, ErrorCode::solver, "empty sample");
  double lo = interval.lo, hi = interval.hi;
  double f_lo = mean_xi(lo), f_hi = mean_xi(hi);
  if (f_lo == 0.0) std::swap(lo, hi), std::swap(f_lo, f_hi);
  if (!(f_lo * f_hi <= 0.0)) {
    fail(ErrorCode::solver, "no sign change over the search interval");
  }
  const double tol = std::min(1e-8, 1.0 / static_cast<double>(n));
  double mid = 0.5 * (lo + hi);
  double f_mid = mean_xi(mid);
  for (int it = 0; it < 200 && std::abs(f_mid) > tol; ++it) {
    if (f_lo * f_mid <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      f_lo = f_mid;
    }
    mid = 0.5 * (lo + hi);
    f_mid = mean_xi(mid);
  }
  if (!(std::abs(f_mid) <= tol)) {
    fail(ErrorCode::solver, "bisection did not reach the residual tolerance");
  }
  const double h = 1e-5;
  const double slope = (mean_xi(mid + h) - mean_xi(mid - h)) / (2.0 * h);
  EstimateResult r;
  r.theta_hat = mid;
  r.n = n;
  r.slope = slope;
  r.equation_residual = f_mid;
  r.se = std::sqrt(mean_xi_sq(mid)) /
         (std::abs(slope) * std::sqrt(static_cast<double>(n)));
  r.ci_low = mid - kZ975 * r.se;
  r.ci_high = mid + kZ975 * r.se;
  return r;
}

}  // namespace ctdr
