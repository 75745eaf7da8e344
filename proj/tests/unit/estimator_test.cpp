#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctdr/dgp.hpp"
#include "ctdr/errors.hpp"
#include "ctdr/estimator.hpp"
#include "ctdr/rng.hpp"

using namespace ctdr;

namespace {

DgpSpec censoring_spec() {
  DgpSpec spec;
  spec.scenario = Scenario::censoring;
  spec.covariate = {CovariateLaw::Kind::bernoulli, 0.5};
  spec.event = {1.0, 1.0};
  spec.coarsening = {0.5, 0.5};
  spec.t0 = 0.75;
  spec.tau_max = 4.0;
  return spec;
}

DgpSpec truncation_spec() {
  DgpSpec spec;
  spec.scenario = Scenario::truncation;
  spec.covariate = {CovariateLaw::Kind::bernoulli, 0.5};
  spec.event = {1.0, 1.0};
  spec.coarsening = {1.2, 1.0};
  spec.t0 = 0.75;
  spec.tau_max = 4.0;
  return spec;
}

// A bounded wrong model, for the population double-robustness checks.
ConditionalHazardModel wrong_model() {
  return ConditionalHazardModel::piecewise({0.7}, {std::log(0.8), std::log(1.6)},
                                           -0.4);
}

// Midpoint Riemann sum of f over [lo, hi] split at the given breakpoints.
template <class F>
double grid_integral(F&& f, double lo, double hi, std::vector<double> breaks,
                     double dt) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = std::max(breaks[k], lo);
    const double b = std::min(breaks[k + 1], hi);
    if (b <= a) continue;
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a) / dt)));
    const double h = (b - a) / steps;
    for (int i = 0; i < steps; ++i) {
      acc += f(a + (i + 0.5) * h) * h;
    }
  }
  return acc;
}

double sample_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace

TEST_CASE("no censoring reduces the estimating function to D") {
  const DgpSpec spec = [] {
    DgpSpec s = censoring_spec();
    s.coarsening.rate = 0.0;
    return s;
  }();
  const auto [event_model, censor_model] = true_nuisance(spec);
  const CensoringPlugin plugin(event_model, censor_model, spec.t0);
  const auto sample = generate_censoring(spec, 3000, 17);
  for (const auto& obs : sample) {
    const AffineXi xi = plugin.affine(obs);
    CHECK(xi.a == (obs.t_tilde > spec.t0 ? 1.0 : 0.0));
    CHECK(xi.b == 1.0);
  }
}

TEST_CASE("conditional residual mean at the time origin") {
  const DgpSpec spec = censoring_spec();
  const auto [event_model, censor_model] = true_nuisance(spec);
  const CensoringPlugin plugin(event_model, censor_model, spec.t0);
  for (double z : {0.0, 1.0}) {
    for (double theta : {0.0, 0.3, 0.9}) {
      CHECK(plugin.conditional_residual_mean(0.0, z, theta) ==
            doctest::Approx(event_model.survival(spec.t0, z) - theta)
                .epsilon(1e-14));
    }
  }
}

TEST_CASE("hand-built censoring observation against a grid oracle") {
  const auto event_model = ConditionalHazardModel::piecewise(
      {0.8}, {std::log(0.9), std::log(1.4)}, 0.6);
  const auto censor_model = ConditionalHazardModel::piecewise(
      {0.5, 1.2}, {std::log(0.4), std::log(0.7), std::log(0.3)}, 0.5);
  const double t0 = 0.75;
  const CensoringPlugin plugin(event_model, censor_model, t0);

  for (int delta : {0, 1}) {
    const CensoringObservation obs{0.8, 1.7, delta};
    const AffineXi xi = plugin.affine(obs);

    const double z = obs.z;
    const auto h_a = [&](double t) {
      return event_model.survival(std::max(t, t0), z) / event_model.survival(t, z);
    };
    const auto weight = [&](double t) { return 1.0 / censor_model.survival(t, z); };
    std::vector<double> breaks = {0.5, 0.75, 0.8, 1.2};
    const double dt = 1e-5;
    double a_oracle = grid_integral(
        [&](double t) { return -h_a(t) * weight(t) * censor_model.hazard(t, z); },
        0.0, obs.t_tilde, breaks, dt);
    double b_oracle = grid_integral(
        [&](double t) { return -weight(t) * censor_model.hazard(t, z); }, 0.0,
        obs.t_tilde, breaks, dt);
    const double K_end = censor_model.survival(obs.t_tilde, z);
    if (delta == 1) {
      a_oracle += (obs.t_tilde > t0 ? 1.0 : 0.0) / K_end;
      b_oracle += 1.0 / K_end;
    } else {
      a_oracle += h_a(obs.t_tilde) / K_end;
      b_oracle += 1.0 / K_end;
    }
    CHECK(xi.a == doctest::Approx(a_oracle).epsilon(1e-6));
    CHECK(xi.b == doctest::Approx(b_oracle).epsilon(1e-6));
    CHECK(xi.b == doctest::Approx(1.0).epsilon(1e-12));  // exact pathwise slope
  }
}

TEST_CASE("hand-built truncation observation against a grid oracle") {
  const auto f_model = ConditionalHazardModel::piecewise(
      {0.9}, {std::log(1.1), std::log(0.8)}, 0.7);
  const auto g_model = ConditionalHazardModel::piecewise(
      {0.4, 1.5}, {std::log(1.3), std::log(0.9), std::log(1.8)}, 0.4);
  const double t0 = 0.75;
  const TruncationPlugin plugin(f_model, g_model, t0);

  const TruncationObservation obs{0.6, 0.35, 2.1};
  const AffineXi xi = plugin.affine(obs);

  const double z = obs.z;
  const auto m_a = [&](double u) {
    return u > t0 ? f_model.cdf(u, z) - f_model.cdf(t0, z) : 0.0;
  };
  const auto m_b = [&](double u) { return f_model.cdf(u, z); };
  const auto weight = [&](double u) {
    return 1.0 / (f_model.survival(u, z) * g_model.cdf(u, z));
  };
  const auto reverse_rate = [&](double u) {
    return g_model.density(u, z) / g_model.cdf(u, z);
  };
  std::vector<double> breaks = {0.4, 0.75, 0.9, 1.5};
  const double dt = 1e-5;
  const double a_oracle =
      (obs.t > t0 ? 1.0 : 0.0) / g_model.cdf(obs.t, z) +
      m_a(obs.q) * weight(obs.q) -
      grid_integral(
          [&](double u) { return m_a(u) * weight(u) * reverse_rate(u); }, obs.q,
          obs.t, breaks, dt);
  const double b_oracle =
      1.0 / g_model.cdf(obs.t, z) + m_b(obs.q) * weight(obs.q) -
      grid_integral(
          [&](double u) { return m_b(u) * weight(u) * reverse_rate(u); }, obs.q,
          obs.t, breaks, dt);
  CHECK(xi.a == doctest::Approx(a_oracle).epsilon(1e-6));
  CHECK(xi.b == doctest::Approx(b_oracle).epsilon(1e-6));
}

TEST_CASE("closed-form and path-assembled routes agree") {
  const DgpSpec cspec = censoring_spec();
  Rng rng(321);
  {
    const auto truth = true_nuisance(cspec);
    const CensoringPlugin oracle_plugin(truth.first, truth.second, cspec.t0);
    const CensoringPlugin wrong_plugin(wrong_model(), wrong_model(), cspec.t0);
    const auto sample = generate_censoring(cspec, 300, rng.next_u64());
    for (const auto& obs : sample) {
      for (const auto* plugin : {&oracle_plugin, &wrong_plugin}) {
        const AffineXi closed = plugin->affine(obs);
        const AffineXi generic = plugin->affine_via_paths(obs);
        CHECK(std::abs(closed.a - generic.a) <= 1e-10);
        CHECK(std::abs(closed.b - generic.b) <= 1e-10);
      }
    }
  }
  const DgpSpec tspec = truncation_spec();
  {
    const auto truth = true_nuisance(tspec);
    const TruncationPlugin oracle_plugin(truth.first, truth.second, tspec.t0);
    const TruncationPlugin wrong_plugin(wrong_model(), wrong_model(), tspec.t0);
    const auto sample = generate_truncation(tspec, 300, rng.next_u64());
    for (const auto& obs : sample) {
      for (const auto* plugin : {&oracle_plugin, &wrong_plugin}) {
        const AffineXi closed = plugin->affine(obs);
        const AffineXi generic = plugin->affine_via_paths(obs);
        CHECK(std::abs(closed.a - generic.a) <= 1e-10);
        CHECK(std::abs(closed.b - generic.b) <= 1e-10);
      }
    }
  }
}

TEST_CASE("population double robustness of the censoring function") {
  const DgpSpec spec = censoring_spec();
  const double theta = true_estimand(spec);
  const auto truth = true_nuisance(spec);
  const int n = 1000000;
  const auto sample = generate_censoring(spec, n, 888);

  // wrong event model, correct censoring model
  {
    const CensoringPlugin plugin(wrong_model(), truth.second, spec.t0);
    std::vector<double> xi(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      xi[i] = plugin.xi(sample[i], theta);
    }
    const double mcse = sample_sd(xi) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sample_mean(xi)) <= 3.0 * mcse);
  }
  // correct event model, wrong censoring model
  {
    const CensoringPlugin plugin(truth.first, wrong_model(), spec.t0);
    std::vector<double> xi(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      xi[i] = plugin.xi(sample[i], theta);
    }
    const double mcse = sample_sd(xi) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sample_mean(xi)) <= 3.0 * mcse);
  }
}

TEST_CASE("population double robustness of the truncation function") {
  const DgpSpec spec = truncation_spec();
  const double theta = true_estimand(spec);
  const auto truth = true_nuisance(spec);
  const int n = 1000000;
  const auto sample = generate_truncation(spec, n, 889);

  // wrong event distribution, correct truncation distribution
  {
    const TruncationPlugin plugin(wrong_model(), truth.second, spec.t0);
    std::vector<double> xi(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      xi[i] = plugin.xi(sample[i], theta);
    }
    const double mcse = sample_sd(xi) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sample_mean(xi)) <= 3.0 * mcse);
  }
  // correct event distribution, wrong truncation distribution
  {
    const TruncationPlugin plugin(truth.first, wrong_model(), spec.t0);
    std::vector<double> xi(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      xi[i] = plugin.xi(sample[i], theta);
    }
    const double mcse = sample_sd(xi) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sample_mean(xi)) <= 3.0 * mcse);
  }
  // zero event part: pure inverse weighting stays mean zero with correct G
  {
    const TruncationPlugin plugin(ConditionalHazardModel::zero_hazard(),
                                  truth.second, spec.t0);
    std::vector<double> xi(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const AffineXi v = plugin.affine(sample[i]);
      xi[i] = v.at(theta);
    }
    const double mcse = sample_sd(xi) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sample_mean(xi)) <= 3.0 * mcse);
  }
}

TEST_CASE("solver reduces to the empirical survival fraction") {
  DgpSpec spec = censoring_spec();
  spec.coarsening.rate = 0.0;
  const auto truth = true_nuisance(spec);
  const CensoringPlugin plugin(truth.first, truth.second, spec.t0);
  const auto sample = generate_censoring(spec, 5000, 71);
  const EstimateResult res = solve_mdr(sample, plugin);
  int above = 0;
  for (const auto& o : sample) {
    if (o.t_tilde > spec.t0) ++above;
  }
  const double empirical = static_cast<double>(above) / 5000.0;
  CHECK(std::abs(res.theta_hat - empirical) <= 1e-12);
  CHECK(res.equation_residual == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("degenerate constant estimating function") {
  std::vector<AffineXi> xi(100, AffineXi{1.0, 1.0});
  const EstimateResult res = solve_affine(xi);
  CHECK(res.theta_hat == 1.0);
  CHECK(res.se == 0.0);
  CHECK(res.ci_low == 1.0);
  CHECK(res.ci_high == 1.0);
}

TEST_CASE("large-sample oracle run lands near the truth") {
  const DgpSpec spec = censoring_spec();
  const auto truth = true_nuisance(spec);
  const CensoringPlugin plugin(truth.first, truth.second, spec.t0);
  const auto sample = generate_censoring(spec, 100000, 929);
  const EstimateResult res = solve_mdr(sample, plugin);
  CHECK(std::abs(res.theta_hat - true_estimand(spec)) <= 4.0 * res.se);
  CHECK(res.ci_low <= res.theta_hat);
  CHECK(res.theta_hat <= res.ci_high);
}

TEST_CASE("positive rescaling leaves the root unchanged") {
  const DgpSpec spec = censoring_spec();
  const auto truth = true_nuisance(spec);
  const CensoringPlugin plugin(truth.first, truth.second, spec.t0);
  const auto sample = generate_censoring(spec, 2000, 31);
  const auto xi = affine_values(sample, plugin);
  const double theta = solve_affine(xi).theta_hat;

  std::vector<AffineXi> doubled(xi);
  for (auto& v : doubled) {
    v.a *= 4.0;  // power of two: bit-exact invariance
    v.b *= 4.0;
  }
  CHECK(solve_affine(doubled).theta_hat == theta);

  std::vector<AffineXi> scaled(xi);
  for (auto& v : scaled) {
    v.a *= 3.7;
    v.b *= 3.7;
  }
  CHECK(solve_affine(scaled).theta_hat ==
        doctest::Approx(theta).epsilon(1e-14));
}

TEST_CASE("equation residual contract on random inputs") {
  Rng rng(4711);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 10 + static_cast<int>(rng.next_u64() % 5000);
    std::vector<AffineXi> xi(static_cast<std::size_t>(n));
    for (auto& v : xi) {
      v.a = 4.0 * rng.uniform() - 2.0;
      v.b = 0.2 + rng.uniform();
    }
    const EstimateResult res = solve_affine(xi);
    CHECK(std::abs(res.equation_residual) <=
          std::min(1e-8, 1.0 / static_cast<double>(n)));
  }
}

TEST_CASE("analytic slope matches a finite difference") {
  const DgpSpec spec = censoring_spec();
  const auto truth = true_nuisance(spec);
  const CensoringPlugin plugin(truth.first, truth.second, spec.t0);
  const auto sample = generate_censoring(spec, 4000, 555);
  const auto xi = affine_values(sample, plugin);
  const EstimateResult res = solve_affine(xi);

  const auto mean_at = [&](double theta) {
    double s = 0.0;
    for (const auto& v : xi) s += v.at(theta);
    return s / static_cast<double>(xi.size());
  };
  const double h = 1e-5;
  const double fd = (mean_at(res.theta_hat + h) - mean_at(res.theta_hat - h)) /
                    (2.0 * h);
  CHECK(res.slope == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("positivity violations raise tagged errors") {
  const auto event_model = true_nuisance(censoring_spec()).first;
  const auto harsh = ConditionalHazardModel::piecewise({}, {std::log(40.0)}, 0.0);
  const CensoringPlugin plugin(event_model, harsh, 0.75);
  const CensoringObservation obs{0.5, 1.0, 1};  // K = exp(-40)
  try {
    plugin.affine(obs);
    CHECK(false);
  } catch (const CtdrError& e) {
    CHECK(e.code() == ErrorCode::positivity);
  }
}

TEST_CASE("nonpositive slope sum is a solver error") {
  std::vector<AffineXi> xi(10, AffineXi{0.5, -1.0});
  CHECK_THROWS_AS(solve_affine(xi), CtdrError);
}

TEST_CASE("bracketed bisection fallback") {
  const int n = 1000;
  const auto mean_xi = [](double theta) { return std::exp(-theta) - 0.5; };
  const auto mean_xi_sq = [&](double theta) {
    const double m = mean_xi(theta);
    return m * m + 0.04;
  };
  const EstimateResult res =
      solve_bisection(mean_xi, mean_xi_sq, SearchInterval{0.0, 2.0}, n);
  CHECK(res.theta_hat == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(std::abs(res.equation_residual) <= std::min(1e-8, 1.0 / n));
  CHECK(res.se > 0.0);

  CHECK_THROWS_AS(
      solve_bisection(mean_xi, mean_xi_sq, SearchInterval{2.0, 3.0}, n),
      CtdrError);
}

TEST_CASE("truncation slope is positive on average") {
  const DgpSpec spec = truncation_spec();
  const auto truth = true_nuisance(spec);
  const TruncationPlugin plugin(truth.first, truth.second, spec.t0);
  const auto sample = generate_truncation(spec, 20000, 4242);
  const auto xi = affine_values(sample, plugin);
  double mean_b = 0.0;
  for (const auto& v : xi) mean_b += v.b;
  mean_b /= static_cast<double>(xi.size());
  const double expected = 1.0 / spec.acceptance_probability();
  CHECK(mean_b == doctest::Approx(expected).epsilon(0.05));
}
