#include "ctdr/hazard_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctdr/common.hpp"
#include "ctdr/errors.hpp"

namespace ctdr {

ConditionalHazardModel ConditionalHazardModel::piecewise(
    std::vector<double> cutpoints, std::vector<double> log_baseline,
    double covariate_coefficient) {
  require(log_baseline.size() == cutpoints.size() + 1, ErrorCode::invariant,
          "piecewise model needs cutpoints.size() + 1 baseline values");
  for (std::size_t k = 0; k < cutpoints.size(); ++k) {
    require(std::isfinite(cutpoints[k]) && cutpoints[k] > 0.0,
            ErrorCode::invariant, "cutpoints must be positive and finite");
    if (k > 0) {
      require(cutpoints[k] > cutpoints[k - 1], ErrorCode::invariant,
              "cutpoints must be strictly increasing");
    }
  }
  for (double lb : log_baseline) {
    require(std::isfinite(lb), ErrorCode::invariant,
            "log baseline values must be finite");
  }
  require(std::isfinite(covariate_coefficient), ErrorCode::invariant,
          "covariate coefficient must be finite");
  ConditionalHazardModel m;
  m.kind_ = Kind::hazard;
  m.cutpoints_ = std::move(cutpoints);
  m.log_baseline_ = std::move(log_baseline);
  m.covariate_coefficient_ = covariate_coefficient;
  return m;
}

ConditionalHazardModel ConditionalHazardModel::zero_hazard() {
  ConditionalHazardModel m;
  m.kind_ = Kind::zero_hazard;
  return m;
}

ConditionalHazardModel ConditionalHazardModel::unit_cdf() {
  ConditionalHazardModel m;
  m.kind_ = Kind::unit_cdf;
  return m;
}

std::size_t ConditionalHazardModel::piece_index(double t) const {
  auto it = std::upper_bound(cutpoints_.begin(), cutpoints_.end(), t);
  return static_cast<std::size_t>(it - cutpoints_.begin());
}

double ConditionalHazardModel::piece_start(std::size_t k) const {
  return k == 0 ? 0.0 : cutpoints_[k - 1];
}

double ConditionalHazardModel::piece_end(std::size_t k) const {
  return k < cutpoints_.size() ? cutpoints_[k] : kInfiniteTime;
}

double ConditionalHazardModel::hazard(double t, double z) const {
  switch (kind_) {
    case Kind::zero_hazard:
      return 0.0;
    case Kind::unit_cdf:
      fail(ErrorCode::domain, "unit_cdf model has no hazard");
    case Kind::hazard:
      break;
  }
  return std::exp(log_baseline_[piece_index(t)] + covariate_coefficient_ * z);
}

double ConditionalHazardModel::cumulative_hazard(double t, double z) const {
  switch (kind_) {
    case Kind::zero_hazard:
      return 0.0;
    case Kind::unit_cdf:
      fail(ErrorCode::domain, "unit_cdf model has no cumulative hazard");
    case Kind::hazard:
      break;
  }
  require(std::isfinite(t) && t >= 0.0, ErrorCode::input,
          "cumulative hazard needs a finite t >= 0");
  const double zscale = std::exp(covariate_coefficient_ * z);
  double acc = 0.0;
  for (std::size_t k = 0; k < log_baseline_.size(); ++k) {
    const double lo = piece_start(k);
    if (lo >= t) break;
    const double hi = std::min(piece_end(k), t);
    acc += std::exp(log_baseline_[k]) * (hi - lo);
  }
  return acc * zscale;
}

double ConditionalHazardModel::survival(double t, double z) const {
  if (kind_ == Kind::unit_cdf) return 0.0;
  if (kind_ == Kind::zero_hazard) return 1.0;
  return std::exp(-cumulative_hazard(t, z));
}

double ConditionalHazardModel::cdf(double t, double z) const {
  if (kind_ == Kind::unit_cdf) return 1.0;
  return 1.0 - survival(t, z);
}

double ConditionalHazardModel::density(double t, double z) const {
  if (kind_ == Kind::unit_cdf || kind_ == Kind::zero_hazard) return 0.0;
  return hazard(t, z) * survival(t, z);
}

FiniteVariationPath ConditionalHazardModel::cumulative_hazard_path(
    double z, double horizon) const {
  require(std::isfinite(horizon) && horizon > 0.0, ErrorCode::input,
          "cumulative_hazard_path needs a finite horizon > 0");
  if (kind_ == Kind::zero_hazard) return FiniteVariationPath{};
  require(kind_ == Kind::hazard, ErrorCode::domain,
          "unit_cdf model has no cumulative hazard path");
  const double zscale = std::exp(covariate_coefficient_ * z);
  std::vector<DensitySegment> segments;
  for (std::size_t k = 0; k < log_baseline_.size(); ++k) {
    const double lo = piece_start(k);
    if (lo >= horizon) break;
    const double hi = std::min(piece_end(k), horizon);
    segments.push_back({lo, hi, std::exp(log_baseline_[k]) * zscale});
  }
  return FiniteVariationPath(0.0, {}, std::move(segments));
}

std::string ConditionalHazardModel::to_record() const {
  std::ostringstream out;
  out << "piecewise_exponential v1\n";
  switch (kind_) {
    case Kind::hazard:
      out << "kind=hazard\n";
      break;
    case Kind::zero_hazard:
      out << "kind=zero_hazard\n";
      break;
    case Kind::unit_cdf:
      out << "kind=unit_cdf\n";
      break;
  }
  out << "cutpoints=";
  for (std::size_t k = 0; k < cutpoints_.size(); ++k) {
    if (k) out << ",";
    out << format_double(cutpoints_[k]);
  }
  out << "\nlog_baseline=";
  for (std::size_t k = 0; k < log_baseline_.size(); ++k) {
    if (k) out << ",";
    out << format_double(log_baseline_[k]);
  }
  out << "\ncoefficient=" << format_double(covariate_coefficient_) << "\n";
  out << "fitted=" << (fitted ? 1 : 0) << " n=" << fit_n
      << " loglik=" << format_double(log_likelihood)
      << " iterations=" << iterations << "\n";
  return out.str();
}

namespace {

std::vector<double> parse_csv_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

}  // namespace

ConditionalHazardModel ConditionalHazardModel::from_record(
    const std::string& record) {
  std::istringstream in(record);
  std::string line;
  require(std::getline(in, line) && line == "piecewise_exponential v1",
          ErrorCode::input, "unrecognized model record header");
  std::string kind_str;
  std::vector<double> cutpoints, log_baseline;
  double coefficient = 0.0;
  bool fitted = false;
  int fit_n = 0, iterations = 0;
  double loglik = 0.0;
  while (std::getline(in, line)) {
    if (line.rfind("kind=", 0) == 0) {
      kind_str = line.substr(5);
    } else if (line.rfind("cutpoints=", 0) == 0) {
      cutpoints = parse_csv_doubles(line.substr(10));
    } else if (line.rfind("log_baseline=", 0) == 0) {
      log_baseline = parse_csv_doubles(line.substr(13));
    } else if (line.rfind("coefficient=", 0) == 0) {
      coefficient = std::stod(line.substr(12));
    } else if (line.rfind("fitted=", 0) == 0) {
      std::istringstream meta(line);
      std::string field;
      while (meta >> field) {
        if (field.rfind("fitted=", 0) == 0) fitted = field.substr(7) == "1";
        if (field.rfind("n=", 0) == 0) fit_n = std::stoi(field.substr(2));
        if (field.rfind("loglik=", 0) == 0) loglik = std::stod(field.substr(7));
        if (field.rfind("iterations=", 0) == 0)
          iterations = std::stoi(field.substr(11));
      }
    }
  }
  ConditionalHazardModel m;
  if (kind_str == "zero_hazard") {
    m = zero_hazard();
  } else if (kind_str == "unit_cdf") {
    m = unit_cdf();
  } else if (kind_str == "hazard") {
    m = piecewise(std::move(cutpoints), std::move(log_baseline), coefficient);
  } else {
    fail(ErrorCode::input, "unrecognized model kind '" + kind_str + "'");
  }
  m.fitted = fitted;
  m.fit_n = fit_n;
  m.log_likelihood = loglik;
  m.iterations = iterations;
  return m;
}

}  // namespace ctdr
