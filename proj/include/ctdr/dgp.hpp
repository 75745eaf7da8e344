#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "ctdr/hazard_model.hpp"

namespace ctdr {

enum class Scenario { censoring, truncation };

struct CovariateLaw {
  enum class Kind { uniform01, bernoulli };
  Kind kind = Kind::bernoulli;
  double p = 0.5;  // Bernoulli success probability; ignored for uniform
};

struct HazardCoef {
  double rate = 1.0;  // baseline hazard
  double beta = 0.0;  // log-linear covariate coefficient
};

/// Data-generating process with exponential conditional hazards, so every
/// nuisance truth, product-limit and estimand has a closed form.
struct DgpSpec {
  Scenario scenario = Scenario::censoring;
  CovariateLaw covariate;
  HazardCoef event;       // T | Z
  HazardCoef coarsening;  // C | Z (censoring) or Q | Z (truncation)
  double t0 = 0.75;       // estimand horizon for D(T,Z;theta) = 1(T>t0) - theta
  double tau_max = 4.0;   // administrative horizon

  void validate() const;
  /// P(Q <= T) under the population law; truncation scenario only.
  double acceptance_probability() const;
};

struct CensoringObservation {
  double z = 0.0;
  double t_tilde = 0.0;
  int delta = 0;  // 1 = event observed
};

struct TruncationObservation {
  double z = 0.0;
  double q = 0.0;  // truncation (study-entry) time, q <= t
  double t = 0.0;  // event time
};

struct CensoringLatent {
  double z, t, c;  // c is +inf when the coarsening rate is 0
  CensoringObservation observed;
};

struct TruncationLatent {
  double z, q, t;  // accepted draws only (q <= t)
};

std::vector<CensoringObservation> generate_censoring(const DgpSpec& spec, int n,
                                                     std::uint64_t seed);
std::vector<TruncationObservation> generate_truncation(const DgpSpec& spec, int n,
                                                       std::uint64_t seed);
// Debug variants that also expose the latent draws.
std::vector<CensoringLatent> generate_censoring_latent(const DgpSpec& spec, int n,
                                                       std::uint64_t seed);
std::vector<TruncationLatent> generate_truncation_latent(const DgpSpec& spec,
                                                         int n,
                                                         std::uint64_t seed);

/// theta = E_Z[exp(-lambda_T e^{beta_T Z} t0)]; closed form for Bernoulli Z,
/// adaptive quadrature for uniform Z.
double true_estimand(const DgpSpec& spec);

/// Exact generating hazards as model objects: (event model, coarsening model).
std::pair<ConditionalHazardModel, ConditionalHazardModel> true_nuisance(
    const DgpSpec& spec);

void write_samples_csv(std::ostream& out,
                       const std::vector<CensoringObservation>& sample);
void write_samples_csv(std::ostream& out,
                       const std::vector<TruncationObservation>& sample);

}  // namespace ctdr
