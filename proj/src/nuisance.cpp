#include "ctdr/nuisance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ctdr/common.hpp"
#include "ctdr/errors.hpp"
#include "ctdr/rng.hpp"

namespace ctdr {

void NuisanceSpec::validate() const {
  if (mode == NuisanceMode::synthetic_rate) {
    require(rate_exponent > 0.0 && rate_exponent < 1.0, ErrorCode::config,
            "synthetic rate exponent must be in (0, 1)");
    require(amplitude >= 0.0, ErrorCode::config,
            "synthetic amplitude must be >= 0");
  }
}

std::vector<double> default_cutpoints(std::vector<double> times) {
  require(!times.empty(), ErrorCode::fitting,
          "no target times to place default cutpoints");
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  std::vector<double> cut = {times[n / 4], times[n / 2], times[3 * n / 4]};
  std::sort(cut.begin(), cut.end());
  cut.erase(std::unique(cut.begin(), cut.end()), cut.end());
  std::vector<double> out;
  for (double c : cut) {
    if (c > 0.0 && std::isfinite(c)) out.push_back(c);
  }
  return out;
}

namespace {

double piece_overlap(const std::vector<double>& cutpoints, std::size_t k,
                     double lo, double hi) {
  const double start = k == 0 ? 0.0 : cutpoints[k - 1];
  const double end = k < cutpoints.size() ? cutpoints[k] : kInfiniteTime;
  return std::max(0.0, std::min(end, hi) - std::max(start, lo));
}

std::size_t piece_of(const std::vector<double>& cutpoints, double t) {
  auto it = std::upper_bound(cutpoints.begin(), cutpoints.end(), t);
  return static_cast<std::size_t>(it - cutpoints.begin());
}

// One row per observation for the Poisson-form likelihood: exposure per piece
// over the at-risk interval, plus the piece of the target event if any.
struct LikelihoodData {
  std::vector<double> cutpoints;
  std::vector<double> z;
  std::vector<std::vector<double>> exposure;  // [obs][piece]
  std::vector<int> event_piece;               // -1 when no target event
  // Truncation-entry fit only: exposures keyed by q and t separately.
  std::vector<std::vector<double>> exposure_q;
  std::vector<std::vector<double>> exposure_t;
  bool conditional_entry = false;
  int n = 0;
};

void check_pieces_identified(const LikelihoodData& d) {
  const std::size_t pieces = d.cutpoints.size() + 1;
  std::vector<int> events(pieces, 0);
  std::vector<double> expo(pieces, 0.0);
  for (int i = 0; i < d.n; ++i) {
    if (d.event_piece[i] >= 0) events[static_cast<std::size_t>(d.event_piece[i])]++;
    const auto& e = d.conditional_entry ? d.exposure_q[static_cast<std::size_t>(i)]
                                        : d.exposure[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < pieces; ++k) expo[k] += e[k];
  }
  for (std::size_t k = 0; k < pieces; ++k) {
    if (expo[k] <= 0.0) {
      fail(ErrorCode::fitting,
           "piece " + std::to_string(k) + " has zero exposure");
    }
    if (events[k] == 0) {
      fail(ErrorCode::fitting,
           "piece " + std::to_string(k) + " has no events of the target type");
    }
  }
}

// log-likelihood, gradient and Hessian of the standard Poisson form
//   sum_i [ d_i (alpha_{k(i)} + beta z_i) - sum_k e_ik exp(alpha_k + beta z_i) ].
struct PoissonObjective {
  const LikelihoodData& d;
  bool include_covariate;

  int dim() const {
    return static_cast<int>(d.cutpoints.size()) + 1 + (include_covariate ? 1 : 0);
  }

  void eval(const Eigen::VectorXd& params, double* loglik, Eigen::VectorXd* grad,
            Eigen::MatrixXd* hess) const {
    const std::size_t pieces = d.cutpoints.size() + 1;
    const int p = dim();
    double ll = 0.0;
    if (grad) grad->setZero(p);
    if (hess) hess->setZero(p, p);
    const double beta = include_covariate ? params[p - 1] : 0.0;
    for (int i = 0; i < d.n; ++i) {
      const double zi = d.z[static_cast<std::size_t>(i)];
      const double zterm = beta * zi;
      double mu_total = 0.0;
      for (std::size_t k = 0; k < pieces; ++k) {
        const double e = d.exposure[static_cast<std::size_t>(i)][k];
        if (e == 0.0) continue;
        const double mu = e * std::exp(params[static_cast<int>(k)] + zterm);
        ll -= mu;
        mu_total += mu;
        if (grad) {
          (*grad)[static_cast<int>(k)] -= mu;
          if (include_covariate) (*grad)[p - 1] -= zi * mu;
        }
        if (hess) {
          (*hess)(static_cast<int>(k), static_cast<int>(k)) -= mu;
          if (include_covariate) {
            (*hess)(static_cast<int>(k), p - 1) -= zi * mu;
            (*hess)(p - 1, static_cast<int>(k)) -= zi * mu;
          }
        }
      }
      if (hess && include_covariate) (*hess)(p - 1, p - 1) -= zi * zi * mu_total;
      const int ev = d.event_piece[static_cast<std::size_t>(i)];
      if (ev >= 0) {
        ll += params[ev] + zterm;
        if (grad) {
          (*grad)[ev] += 1.0;
          if (include_covariate) (*grad)[p - 1] += zi;
        }
      }
    }
    if (loglik) *loglik = ll;
  }
};

// Conditional likelihood of the truncation time given the event time:
//   sum_i [ log lambda_Q(q_i|z_i) - Lambda_Q(q_i|z_i) - log(1 - e^{-Lambda_Q(t_i|z_i)}) ].
struct EntryConditionalObjective {
  const LikelihoodData& d;
  bool include_covariate;

  int dim() const {
    return static_cast<int>(d.cutpoints.size()) + 1 + (include_covariate ? 1 : 0);
  }

  void eval(const Eigen::VectorXd& params, double* loglik, Eigen::VectorXd* grad,
            Eigen::MatrixXd* hess) const {
    const std::size_t pieces = d.cutpoints.size() + 1;
    const int p = dim();
    double ll = 0.0;
    if (grad) grad->setZero(p);
    if (hess) hess->setZero(p, p);
    const double beta = include_covariate ? params[p - 1] : 0.0;
    Eigen::VectorXd Lq(static_cast<int>(pieces)), Lt(static_cast<int>(pieces));
    for (int i = 0; i < d.n; ++i) {
      const double zi = d.z[static_cast<std::size_t>(i)];
      const double zterm = beta * zi;
      double lam_q = 0.0, lam_t = 0.0;
      for (std::size_t k = 0; k < pieces; ++k) {
        const double rate = std::exp(params[static_cast<int>(k)] + zterm);
        Lq[static_cast<int>(k)] = d.exposure_q[static_cast<std::size_t>(i)][k] * rate;
        Lt[static_cast<int>(k)] = d.exposure_t[static_cast<std::size_t>(i)][k] * rate;
        lam_q += Lq[static_cast<int>(k)];
        lam_t += Lt[static_cast<int>(k)];
      }
      const int ev = d.event_piece[static_cast<std::size_t>(i)];
      const double em1 = std::expm1(lam_t);  // e^{Lambda(t)} - 1 > 0
      const double r = 1.0 / em1;
      const double s = (1.0 + em1) / (em1 * em1);
      ll += params[ev] + zterm - lam_q - std::log1p(-std::exp(-lam_t));
      if (grad) {
        for (std::size_t k = 0; k < pieces; ++k) {
          (*grad)[static_cast<int>(k)] +=
              (ev == static_cast<int>(k) ? 1.0 : 0.0) -
              Lq[static_cast<int>(k)] - r * Lt[static_cast<int>(k)];
        }
        if (include_covariate) (*grad)[p - 1] += zi * (1.0 - lam_q - r * lam_t);
      }
      if (hess) {
        for (std::size_t k = 0; k < pieces; ++k) {
          const double lqk = Lq[static_cast<int>(k)];
          const double ltk = Lt[static_cast<int>(k)];
          (*hess)(static_cast<int>(k), static_cast<int>(k)) += -lqk - r * ltk;
          for (std::size_t j = 0; j < pieces; ++j) {
            (*hess)(static_cast<int>(k), static_cast<int>(j)) +=
                s * ltk * Lt[static_cast<int>(j)];
          }
          if (include_covariate) {
            const double cross = zi * (-lqk - r * ltk + s * ltk * lam_t);
            (*hess)(static_cast<int>(k), p - 1) += cross;
            (*hess)(p - 1, static_cast<int>(k)) += cross;
          }
        }
        if (include_covariate) {
          (*hess)(p - 1, p - 1) +=
              zi * zi * (-lam_q - r * lam_t + s * lam_t * lam_t);
        }
      }
    }
    if (loglik) *loglik = ll;
  }
};

template <class Objective>
ConditionalHazardModel newton_fit(const Objective& obj,
                                  const LikelihoodData& data,
                                  const FitOptions& opts,
                                  Eigen::VectorXd params) {
  const int p = obj.dim();
  double ll = 0.0;
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd hess(p, p);
  std::ostringstream trace;
  int iter = 0;
  bool converged = false;
  double best_gnorm = std::numeric_limits<double>::infinity();
  int no_progress = 0;
  for (; iter < opts.max_iterations; ++iter) {
    obj.eval(params, &ll, &grad, &hess);
    const double gnorm = grad.template lpNorm<Eigen::Infinity>();
    trace << "iter " << iter << " loglik " << ll << " grad " << gnorm << "; ";
    if (gnorm <= opts.gradient_tol) {
      converged = true;
      break;
    }
    // Score sums over n observations cannot cancel below their accumulation
    // noise. Once the gradient stops shrinking at that scale (relevant only
    // for samples in the tens of thousands), the fit is converged to
    // floating-point resolution.
    if (gnorm <= 0.5 * best_gnorm) {
      best_gnorm = gnorm;
      no_progress = 0;
    } else {
      best_gnorm = std::min(best_gnorm, gnorm);
      ++no_progress;
    }
    const double noise_floor = 1024.0 * std::numeric_limits<double>::epsilon() *
                               (std::abs(ll) + static_cast<double>(data.n));
    if (no_progress >= 4 && gnorm <= noise_floor) {
      converged = true;
      break;
    }

    // Ascent direction from (-H + ridge I) delta = grad; the Poisson form is
    // concave so the ridge stays at zero there.
    Eigen::VectorXd delta;
    double ridge = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd neg_h = -hess;
      if (ridge > 0.0) neg_h.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
      if (ldlt.info() == Eigen::Success) {
        delta = ldlt.solve(grad);
        if (delta.allFinite() && grad.dot(delta) > 0.0) break;
      }
      ridge = ridge == 0.0 ? 1e-8 : ridge * 10.0;
      delta.resize(0);
    }
    if (delta.size() == 0) {
      fail(ErrorCode::fitting, "Newton direction failed; trace: " + trace.str());
    }

    double step = 1.0;
    double new_ll = 0.0;
    Eigen::VectorXd candidate;
    for (int h = 0; h < 40; ++h) {
      candidate = params + step * delta;
      obj.eval(candidate, &new_ll, nullptr, nullptr);
      if (std::isfinite(new_ll) && new_ll >= ll - 1e-12 * std::abs(ll)) break;
      step *= 0.5;
    }
    params = candidate;
  }
  if (!converged && iter >= opts.max_iterations) {
    fail(ErrorCode::fitting,
         "fit did not converge in " + std::to_string(opts.max_iterations) +
             " iterations; trace: " + trace.str());
  }

  std::vector<double> log_baseline(params.data(),
                                   params.data() + data.cutpoints.size() + 1);
  const double coef =
      obj.include_covariate ? params[p - 1] : 0.0;
  auto model = ConditionalHazardModel::piecewise(data.cutpoints,
                                                 std::move(log_baseline), coef);
  model.fitted = true;
  model.fit_n = data.n;
  model.log_likelihood = ll;
  model.iterations = iter;
  return model;
}

Eigen::VectorXd initial_params(const LikelihoodData& d, bool include_covariate) {
  const std::size_t pieces = d.cutpoints.size() + 1;
  std::vector<double> events(pieces, 0.0), expo(pieces, 0.0);
  for (int i = 0; i < d.n; ++i) {
    if (d.event_piece[static_cast<std::size_t>(i)] >= 0) {
      events[static_cast<std::size_t>(d.event_piece[static_cast<std::size_t>(i)])] += 1.0;
    }
    const auto& e = d.conditional_entry ? d.exposure_q[static_cast<std::size_t>(i)]
                                        : d.exposure[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < pieces; ++k) expo[k] += e[k];
  }
  Eigen::VectorXd params(static_cast<int>(pieces) + (include_covariate ? 1 : 0));
  for (std::size_t k = 0; k < pieces; ++k) {
    params[static_cast<int>(k)] =
        std::log(std::max(events[k], 0.5) / std::max(expo[k], 1e-300));
  }
  if (include_covariate) params[params.size() - 1] = 0.0;
  return params;
}

LikelihoodData build_censoring_data(const std::vector<CensoringObservation>& data,
                                    NuisanceTarget target, const FitOptions& opts) {
  require(!data.empty(), ErrorCode::fitting, "empty sample");
  LikelihoodData d;
  d.n = static_cast<int>(data.size());
  if (opts.cutpoints.has_value()) {
    d.cutpoints = *opts.cutpoints;
  } else {
    std::vector<double> times;
    times.reserve(data.size());
    for (const auto& o : data) times.push_back(o.t_tilde);
    d.cutpoints = default_cutpoints(std::move(times));
  }
  const std::size_t pieces = d.cutpoints.size() + 1;
  d.z.reserve(data.size());
  d.exposure.reserve(data.size());
  d.event_piece.reserve(data.size());
  for (const auto& o : data) {
    d.z.push_back(o.z);
    std::vector<double> e(pieces);
    for (std::size_t k = 0; k < pieces; ++k) {
      e[k] = piece_overlap(d.cutpoints, k, 0.0, o.t_tilde);
    }
    d.exposure.push_back(std::move(e));
    bool is_event;
    if (target == NuisanceTarget::event) {
      is_event = o.delta == 1;
    } else {
      is_event = o.delta == 0 && o.t_tilde < opts.admin_horizon;
    }
    d.event_piece.push_back(
        is_event ? static_cast<int>(piece_of(d.cutpoints, o.t_tilde)) : -1);
  }
  return d;
}

LikelihoodData build_truncation_data(const std::vector<TruncationObservation>& data,
                                     NuisanceTarget target, const FitOptions& opts) {
  require(!data.empty(), ErrorCode::fitting, "empty sample");
  LikelihoodData d;
  d.n = static_cast<int>(data.size());
  if (opts.cutpoints.has_value()) {
    d.cutpoints = *opts.cutpoints;
  } else {
    std::vector<double> times;
    times.reserve(data.size());
    for (const auto& o : data) {
      times.push_back(target == NuisanceTarget::event ? o.t : o.q);
    }
    d.cutpoints = default_cutpoints(std::move(times));
  }
  const std::size_t pieces = d.cutpoints.size() + 1;
  for (const auto& o : data) {
    d.z.push_back(o.z);
    if (target == NuisanceTarget::event) {
      std::vector<double> e(pieces);
      for (std::size_t k = 0; k < pieces; ++k) {
        e[k] = piece_overlap(d.cutpoints, k, o.q, o.t);
      }
      d.exposure.push_back(std::move(e));
      d.event_piece.push_back(static_cast<int>(piece_of(d.cutpoints, o.t)));
    } else {
      std::vector<double> eq(pieces), et(pieces);
      for (std::size_t k = 0; k < pieces; ++k) {
        eq[k] = piece_overlap(d.cutpoints, k, 0.0, o.q);
        et[k] = piece_overlap(d.cutpoints, k, 0.0, o.t);
      }
      d.exposure_q.push_back(std::move(eq));
      d.exposure_t.push_back(std::move(et));
      d.event_piece.push_back(static_cast<int>(piece_of(d.cutpoints, o.q)));
    }
  }
  d.conditional_entry = target == NuisanceTarget::coarsening;
  return d;
}

Eigen::VectorXd params_of_model(const ConditionalHazardModel& m,
                                bool include_covariate) {
  Eigen::VectorXd params(static_cast<int>(m.piece_count()) +
                         (include_covariate ? 1 : 0));
  for (std::size_t k = 0; k < m.piece_count(); ++k) {
    params[static_cast<int>(k)] = m.log_baseline()[k];
  }
  if (include_covariate) params[params.size() - 1] = m.covariate_coefficient();
  return params;
}

}  // namespace

ConditionalHazardModel fit_piecewise_exponential(
    const std::vector<CensoringObservation>& data, NuisanceTarget target,
    const FitOptions& opts) {
  auto d = build_censoring_data(data, target, opts);
  check_pieces_identified(d);
  PoissonObjective obj{d, opts.include_covariate};
  return newton_fit(obj, d, opts, initial_params(d, opts.include_covariate));
}

ConditionalHazardModel fit_piecewise_exponential(
    const std::vector<TruncationObservation>& data, NuisanceTarget target,
    const FitOptions& opts) {
  auto d = build_truncation_data(data, target, opts);
  check_pieces_identified(d);
  if (target == NuisanceTarget::event) {
    PoissonObjective obj{d, opts.include_covariate};
    return newton_fit(obj, d, opts, initial_params(d, opts.include_covariate));
  }
  EntryConditionalObjective obj{d, opts.include_covariate};
  return newton_fit(obj, d, opts, initial_params(d, opts.include_covariate));
}

double score_norm(const std::vector<CensoringObservation>& data,
                  NuisanceTarget target, const ConditionalHazardModel& model,
                  const FitOptions& opts) {
  FitOptions o = opts;
  o.cutpoints = model.cutpoints();
  auto d = build_censoring_data(data, target, o);
  PoissonObjective obj{d, o.include_covariate};
  Eigen::VectorXd grad(obj.dim());
  obj.eval(params_of_model(model, o.include_covariate), nullptr, &grad, nullptr);
  return grad.lpNorm<Eigen::Infinity>();
}

double score_norm(const std::vector<TruncationObservation>& data,
                  NuisanceTarget target, const ConditionalHazardModel& model,
                  const FitOptions& opts) {
  FitOptions o = opts;
  o.cutpoints = model.cutpoints();
  auto d = build_truncation_data(data, target, o);
  Eigen::VectorXd grad;
  if (target == NuisanceTarget::event) {
    PoissonObjective obj{d, o.include_covariate};
    grad.resize(obj.dim());
    obj.eval(params_of_model(model, o.include_covariate), nullptr, &grad, nullptr);
  } else {
    EntryConditionalObjective obj{d, o.include_covariate};
    grad.resize(obj.dim());
    obj.eval(params_of_model(model, o.include_covariate), nullptr, &grad, nullptr);
  }
  return grad.lpNorm<Eigen::Infinity>();
}

std::size_t StratifiedNPEstimate::stratum_index(double z) const {
  auto it = std::upper_bound(boundaries.begin(), boundaries.end(), z);
  return static_cast<std::size_t>(it - boundaries.begin());
}

namespace {

// Generic Nelson-Aalen over (event time, at-risk interval) pairs: the risk
// set at t is {i : entry_i < t <= exit_i}, counted from sorted copies.
StepPath nelson_aalen_from_intervals(const std::vector<double>& entry,
                                     const std::vector<double>& exit,
                                     const std::vector<int>& is_event) {
  std::vector<double> event_times;
  for (std::size_t i = 0; i < exit.size(); ++i) {
    if (is_event[i]) event_times.push_back(exit[i]);
  }
  std::sort(event_times.begin(), event_times.end());

  std::vector<double> sorted_entry = entry;
  std::vector<double> sorted_exit = exit;
  std::sort(sorted_entry.begin(), sorted_entry.end());
  std::sort(sorted_exit.begin(), sorted_exit.end());

  std::vector<double> times, values;
  double acc = 0.0;
  std::size_t i = 0;
  while (i < event_times.size()) {
    const double t = event_times[i];
    std::size_t j = i;
    while (j < event_times.size() && event_times[j] == t) ++j;
    const auto entered =
        std::lower_bound(sorted_entry.begin(), sorted_entry.end(), t) -
        sorted_entry.begin();
    const auto left =
        std::lower_bound(sorted_exit.begin(), sorted_exit.end(), t) -
        sorted_exit.begin();
    const long r = static_cast<long>(entered) - static_cast<long>(left);
    acc += static_cast<double>(j - i) / static_cast<double>(r);
    times.push_back(t);
    values.push_back(acc);
    i = j;
  }
  return StepPath(0.0, std::move(times), std::move(values));
}

}  // namespace

StratifiedNPEstimate nelson_aalen_stratified(
    const std::vector<CensoringObservation>& data, NuisanceTarget target,
    std::vector<double> boundaries, double admin_horizon) {
  std::sort(boundaries.begin(), boundaries.end());
  StratifiedNPEstimate est;
  est.boundaries = std::move(boundaries);
  const std::size_t strata = est.boundaries.size() + 1;
  for (std::size_t s = 0; s < strata; ++s) {
    std::vector<double> entry, exit;
    std::vector<int> is_event;
    for (const auto& o : data) {
      if (est.stratum_index(o.z) != s) continue;
      entry.push_back(0.0);
      exit.push_back(o.t_tilde);
      const bool ev = target == NuisanceTarget::event
                          ? o.delta == 1
                          : (o.delta == 0 && o.t_tilde < admin_horizon);
      is_event.push_back(ev ? 1 : 0);
    }
    require(!entry.empty(), ErrorCode::fitting,
            "stratum " + std::to_string(s) + " is empty");
    est.cumulative_hazards.push_back(
        nelson_aalen_from_intervals(entry, exit, is_event));
  }
  return est;
}

StratifiedNPEstimate nelson_aalen_stratified(
    const std::vector<TruncationObservation>& data,
    std::vector<double> boundaries) {
  std::sort(boundaries.begin(), boundaries.end());
  StratifiedNPEstimate est;
  est.boundaries = std::move(boundaries);
  const std::size_t strata = est.boundaries.size() + 1;
  for (std::size_t s = 0; s < strata; ++s) {
    std::vector<double> entry, exit;
    std::vector<int> is_event;
    for (const auto& o : data) {
      if (est.stratum_index(o.z) != s) continue;
      entry.push_back(o.q);
      exit.push_back(o.t);
      is_event.push_back(1);
    }
    require(!entry.empty(), ErrorCode::fitting,
            "stratum " + std::to_string(s) + " is empty");
    est.cumulative_hazards.push_back(
        nelson_aalen_from_intervals(entry, exit, is_event));
  }
  return est;
}

double ShapeProfile::value(double t) const {
  const double x = std::numbers::pi * t / horizon;
  return (a1 * std::cos(x) + a2 * std::cos(2.0 * x) + a3 * std::cos(3.0 * x)) /
         scale;
}

ShapeProfile make_shape_profile(std::uint64_t shape_seed, double horizon) {
  Rng rng(splitmix64_mix(shape_seed));
  ShapeProfile zeta;
  zeta.horizon = horizon;
  zeta.a1 = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.8 + 0.2 * rng.uniform());
  zeta.a2 = 0.3 * (2.0 * rng.uniform() - 1.0);
  zeta.a3 = 0.15 * (2.0 * rng.uniform() - 1.0);
  // Normalize sup|zeta| to 1: scan a fine grid, then refine the best bracket
  // by golden-section search on |zeta|.
  const int grid = 4096;
  double best_t = 0.0, best = 0.0;
  for (int i = 0; i <= grid; ++i) {
    const double t = horizon * static_cast<double>(i) / grid;
    const double v = std::abs(zeta.value(t));
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - horizon / grid);
  double hi = std::min(horizon, best_t + horizon / grid);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double m1 = hi - gr * (hi - lo);
    const double m2 = lo + gr * (hi - lo);
    if (std::abs(zeta.value(m1)) < std::abs(zeta.value(m2))) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  zeta.scale = std::abs(zeta.value(0.5 * (lo + hi)));
  return zeta;
}

ConditionalHazardModel synthetic_rate(const ConditionalHazardModel& truth,
                                      double alpha, double amplitude, int n,
                                      std::uint64_t shape_seed, double horizon,
                                      int grid_pieces) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::input,
          "synthetic rate exponent must be in (0, 1)");
  require(amplitude >= 0.0, ErrorCode::input, "amplitude must be >= 0");
  require(n >= 1, ErrorCode::input, "n must be >= 1");
  if (amplitude == 0.0) return truth;
  require(truth.kind() == ConditionalHazardModel::Kind::hazard,
          ErrorCode::input, "synthetic_rate needs a hazard-kind truth");

  const ShapeProfile zeta = make_shape_profile(shape_seed, horizon);
  const double eps = amplitude * std::pow(static_cast<double>(n), -alpha);

  // Fine grid on [0, horizon] merged with the truth's own cutpoints, so the
  // base hazard is reproduced exactly and only the smooth factor is sampled
  // at piece midpoints. Beyond the horizon the truth is kept unperturbed.
  std::vector<double> cuts;
  for (int k = 1; k < grid_pieces; ++k) {
    cuts.push_back(horizon * static_cast<double>(k) / grid_pieces);
  }
  for (double c : truth.cutpoints()) {
    if (c > 0.0 && c < horizon) cuts.push_back(c);
  }
  cuts.push_back(horizon);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<double> log_baseline;
  log_baseline.reserve(cuts.size() + 1);
  double lo = 0.0;
  for (double hi : cuts) {
    const double mid = 0.5 * (lo + hi);
    log_baseline.push_back(truth.log_baseline()[truth.piece_index(mid)] +
                           eps * zeta.value(mid));
    lo = hi;
  }
  log_baseline.push_back(
      truth.log_baseline()[truth.piece_index(horizon)]);  // [horizon, inf)

  auto model = ConditionalHazardModel::piecewise(
      std::move(cuts), std::move(log_baseline), truth.covariate_coefficient());
  model.fitted = false;
  return model;
}

}  // namespace ctdr
