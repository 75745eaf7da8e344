#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ctdr/errors.hpp"
#include "ctdr/estimator.hpp"
#include "ctdr/rng.hpp"

namespace ctdr {

/// Balanced random partition of {0, ..., n-1} into L folds (sizes differ by
/// at most one), deterministic given (n, L, seed).
struct FoldAssignment {
  int n = 0;
  int L = 0;
  std::vector<int> assignment;  // fold index in [1, L] per observation
  std::uint64_t seed = 0;
};

FoldAssignment split_folds(int n, int L, std::uint64_t seed);

/// Cross-fit rate-DR estimator: nuisances are fitted on the out-of-fold data
/// and every observation is evaluated against models fitted without it. The
/// pooled linear equation is solved exactly; per-observation values are
/// reduced in original index order, so an oracle fitter reproduces solve_mdr
/// bit for bit.
///
/// `fitter(training)` returns the (event model, coarsening model) pair;
/// `plugin_builder(event, coarsening)` wraps them in the estimating-function
/// plugin for this problem.
template <class Obs, class Fitter, class PluginBuilder>
EstimateResult solve_rdr(const std::vector<Obs>& sample, int L,
                         const Fitter& fitter, const PluginBuilder& plugin_builder,
                         std::uint64_t seed) {
  const int n = static_cast<int>(sample.size());
  const FoldAssignment folds = split_folds(n, L, seed);
  std::vector<AffineXi> xi(sample.size());
  for (int l = 1; l <= L; ++l) {
    std::vector<Obs> training;
    training.reserve(sample.size());
    for (int i = 0; i < n; ++i) {
      if (folds.assignment[static_cast<std::size_t>(i)] != l) {
        training.push_back(sample[static_cast<std::size_t>(i)]);
      }
    }
    auto models = [&]() {
      try {
        return fitter(training);
      } catch (const CtdrError& e) {
        fail(e.code(), "fold " + std::to_string(l) + ": " + e.what());
      }
    }();
    const auto plugin = plugin_builder(models.first, models.second);
    for (int i = 0; i < n; ++i) {
      if (folds.assignment[static_cast<std::size_t>(i)] != l) continue;
      try {
        xi[static_cast<std::size_t>(i)] = plugin.affine(sample[static_cast<std::size_t>(i)]);
      } catch (const CtdrError& e) {
        fail(e.code(), "fold " + std::to_string(l) + ": " + e.what());
      }
    }
  }
  return solve_affine(xi);
}

}  // namespace ctdr
