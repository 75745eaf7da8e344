#include "ctdr/dgp.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "ctdr/common.hpp"
#include "ctdr/errors.hpp"
#include "ctdr/rng.hpp"

namespace ctdr {

namespace {

double covariate_draw(const CovariateLaw& law, Rng& rng) {
  switch (law.kind) {
    case CovariateLaw::Kind::uniform01:
      return rng.uniform();
    case CovariateLaw::Kind::bernoulli:
      return static_cast<double>(rng.bernoulli(law.p));
  }
  return 0.0;
}

// E_Z[f(Z)] under the covariate law: exact two-point sum for Bernoulli,
// adaptive quadrature for uniform(0,1).
template <class F>
double expect_over_covariate(const CovariateLaw& law, F&& f) {
  switch (law.kind) {
    case CovariateLaw::Kind::bernoulli:
      return (1.0 - law.p) * f(0.0) + law.p * f(1.0);
    case CovariateLaw::Kind::uniform01:
      return adaptive_simpson(f, 0.0, 1.0, 1e-14, 1e-12);
  }
  return 0.0;
}

}  // namespace

void DgpSpec::validate() const {
  require(std::isfinite(event.rate) && event.rate > 0.0, ErrorCode::config,
          "event rate must be > 0");
  require(std::isfinite(event.beta), ErrorCode::config,
          "event beta must be finite");
  require(std::isfinite(coarsening.beta), ErrorCode::config,
          "coarsening beta must be finite");
  require(std::isfinite(t0) && t0 > 0.0, ErrorCode::config, "t0 must be > 0");
  require(std::isfinite(tau_max) && t0 < tau_max, ErrorCode::config,
          "t0 must be below tau_max");
  if (covariate.kind == CovariateLaw::Kind::bernoulli) {
    require(covariate.p > 0.0 && covariate.p < 1.0, ErrorCode::config,
            "Bernoulli covariate parameter must be in (0, 1)");
  }
  if (scenario == Scenario::censoring) {
    require(std::isfinite(coarsening.rate) && coarsening.rate >= 0.0,
            ErrorCode::config, "censoring rate must be >= 0");
  } else {
    require(std::isfinite(coarsening.rate) && coarsening.rate > 0.0,
            ErrorCode::config, "truncation rate must be > 0");
    const double acc = acceptance_probability();
    if (acc < 0.01) {
      fail(ErrorCode::config,
           "truncation too severe: acceptance probability " +
               std::to_string(acc) + " < 0.01");
    }
  }
}

double DgpSpec::acceptance_probability() const {
  require(scenario == Scenario::truncation, ErrorCode::input,
          "acceptance probability is defined for the truncation scenario");
  // For independent exponentials given Z, P(Q <= T | Z) is the rate ratio.
  auto f = [this](double z) {
    const double rq = coarsening.rate * std::exp(coarsening.beta * z);
    const double rt = event.rate * std::exp(event.beta * z);
    return rq / (rq + rt);
  };
  return expect_over_covariate(covariate, f);
}

std::vector<CensoringLatent> generate_censoring_latent(const DgpSpec& spec, int n,
                                                       std::uint64_t seed) {
  require(spec.scenario == Scenario::censoring, ErrorCode::input,
          "censoring generator called with a truncation spec");
  spec.validate();
  require(n >= 1, ErrorCode::input, "sample size must be >= 1");
  Rng rng(seed);
  std::vector<CensoringLatent> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = covariate_draw(spec.covariate, rng);
    const double t = rng.exponential(spec.event.rate * std::exp(spec.event.beta * z));
    const double c =
        spec.coarsening.rate > 0.0
            ? rng.exponential(spec.coarsening.rate *
                              std::exp(spec.coarsening.beta * z))
            : kInfiniteTime;
    CensoringObservation obs;
    obs.z = z;
    obs.t_tilde = std::min({t, c, spec.tau_max});
    obs.delta = (t <= c && t <= spec.tau_max) ? 1 : 0;
    out.push_back({z, t, c, obs});
  }
  return out;
}

std::vector<CensoringObservation> generate_censoring(const DgpSpec& spec, int n,
                                                     std::uint64_t seed) {
  auto latent = generate_censoring_latent(spec, n, seed);
  std::vector<CensoringObservation> out;
  out.reserve(latent.size());
  for (const auto& l : latent) out.push_back(l.observed);
  return out;
}

std::vector<TruncationLatent> generate_truncation_latent(const DgpSpec& spec,
                                                         int n,
                                                         std::uint64_t seed) {
  require(spec.scenario == Scenario::truncation, ErrorCode::input,
          "truncation generator called with a censoring spec");
  spec.validate();
  require(n >= 1, ErrorCode::input, "sample size must be >= 1");
  Rng rng(seed);
  std::vector<TruncationLatent> out;
  out.reserve(static_cast<std::size_t>(n));
  // validate() already bounds the acceptance probability below by 0.01; the
  // draw cap is a hard stop against a misconfigured loop.
  const long max_draws = 2000L * n + 1000L;
  long draws = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++draws > max_draws) {
      fail(ErrorCode::scenario, "rejection sampling exceeded the draw budget");
    }
    const double z = covariate_draw(spec.covariate, rng);
    const double q =
        rng.exponential(spec.coarsening.rate * std::exp(spec.coarsening.beta * z));
    const double t = rng.exponential(spec.event.rate * std::exp(spec.event.beta * z));
    if (q <= t) out.push_back({z, q, t});
  }
  return out;
}

std::vector<TruncationObservation> generate_truncation(const DgpSpec& spec, int n,
                                                       std::uint64_t seed) {
  auto latent = generate_truncation_latent(spec, n, seed);
  std::vector<TruncationObservation> out;
  out.reserve(latent.size());
  for (const auto& l : latent) out.push_back({l.z, l.q, l.t});
  return out;
}

double true_estimand(const DgpSpec& spec) {
  spec.validate();
  auto survival_at_t0 = [&spec](double z) {
    return std::exp(-spec.event.rate * std::exp(spec.event.beta * z) * spec.t0);
  };
  return expect_over_covariate(spec.covariate, survival_at_t0);
}

std::pair<ConditionalHazardModel, ConditionalHazardModel> true_nuisance(
    const DgpSpec& spec) {
  spec.validate();
  auto event_model = ConditionalHazardModel::piecewise(
      {}, {std::log(spec.event.rate)}, spec.event.beta);
  if (spec.scenario == Scenario::censoring && spec.coarsening.rate == 0.0) {
    return {event_model, ConditionalHazardModel::zero_hazard()};
  }
  auto coarsening_model = ConditionalHazardModel::piecewise(
      {}, {std::log(spec.coarsening.rate)}, spec.coarsening.beta);
  return {event_model, coarsening_model};
}

void write_samples_csv(std::ostream& out,
                       const std::vector<CensoringObservation>& sample) {
  out << "z,t_tilde,delta\n";
  for (const auto& o : sample) {
    out << format_double(o.z) << "," << format_double(o.t_tilde) << ","
        << o.delta << "\n";
  }
}

void write_samples_csv(std::ostream& out,
                       const std::vector<TruncationObservation>& sample) {
  out << "z,q,t\n";
  for (const auto& o : sample) {
    out << format_double(o.z) << "," << format_double(o.q) << ","
        << format_double(o.t) << "\n";
  }
}

}  // namespace ctdr
