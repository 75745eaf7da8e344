#pragma once

#include <string>
#include <vector>

#include "ctdr/step_path.hpp"

namespace ctdr {

/// Piecewise-exponential proportional-hazards model:
///   lambda(t | z) = exp(log_baseline[piece(t)] + covariate_coefficient * z).
/// The cumulative hazard is continuous and piecewise linear in t, so survival,
/// CDF and density all have closed forms.
///
/// Two degenerate kinds cover the no-coarsening limits: `zero_hazard` is the
/// identically-zero hazard (survival == 1), `unit_cdf` is the distribution
/// with all mass at 0 (CDF == 1 on [0, inf)).
class ConditionalHazardModel {
 public:
  enum class Kind { hazard, zero_hazard, unit_cdf };

  ConditionalHazardModel() = default;

  static ConditionalHazardModel piecewise(std::vector<double> cutpoints,
                                          std::vector<double> log_baseline,
                                          double covariate_coefficient);
  static ConditionalHazardModel zero_hazard();
  static ConditionalHazardModel unit_cdf();

  Kind kind() const { return kind_; }
  const std::vector<double>& cutpoints() const { return cutpoints_; }
  const std::vector<double>& log_baseline() const { return log_baseline_; }
  double covariate_coefficient() const { return covariate_coefficient_; }
  std::size_t piece_count() const { return log_baseline_.size(); }

  /// Index of the piece containing t; pieces are [0,c1), [c1,c2), ..., [cK,inf).
  std::size_t piece_index(double t) const;
  /// Start of piece k (0 for the first piece).
  double piece_start(std::size_t k) const;
  /// End of piece k (infinity for the last piece).
  double piece_end(std::size_t k) const;

  double hazard(double t, double z) const;
  double cumulative_hazard(double t, double z) const;
  double survival(double t, double z) const;
  double cdf(double t, double z) const;
  double density(double t, double z) const;  // hazard * survival

  /// Cumulative hazard on [0, horizon] as an exact finite-variation path
  /// (one constant-rate segment per piece).
  FiniteVariationPath cumulative_hazard_path(double z, double horizon) const;

  // Fit metadata, populated by the fitting routines.
  bool fitted = false;
  int fit_n = 0;
  double log_likelihood = 0.0;
  int iterations = 0;

  /// Structured text record (cutpoints, log rates, coefficient); values are
  /// written with 17 significant digits so records round-trip exactly.
  std::string to_record() const;
  static ConditionalHazardModel from_record(const std::string& record);

 private:
  Kind kind_ = Kind::hazard;
  std::vector<double> cutpoints_;     // interior breakpoints, strictly increasing
  std::vector<double> log_baseline_;  // one per piece, cutpoints.size() + 1
  double covariate_coefficient_ = 0.0;
};

}  // namespace ctdr
