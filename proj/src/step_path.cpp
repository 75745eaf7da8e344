#include "ctdr/step_path.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctdr/common.hpp"
#include "ctdr/errors.hpp"

namespace ctdr {

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    fail(ErrorCode::invariant, std::string(what) + " must be finite, got " +
                                   std::to_string(v));
  }
}

void check_time_arg(double t) {
  if (std::isnan(t) || t < 0.0) {
    fail(ErrorCode::input,
         "evaluation time must be >= 0 and not NaN, got " + std::to_string(t));
  }
}

}  // namespace

StepPath::StepPath(double initial, std::vector<double> times,
                   std::vector<double> values)
    : initial_value(initial),
      jump_times(std::move(times)),
      post_jump_values(std::move(values)) {
  check_finite(initial_value, "StepPath initial value");
  require(jump_times.size() == post_jump_values.size(), ErrorCode::invariant,
          "StepPath needs one post-jump value per jump time");
  for (std::size_t k = 0; k < jump_times.size(); ++k) {
    check_finite(jump_times[k], "StepPath jump time");
    check_finite(post_jump_values[k], "StepPath value");
    require(jump_times[k] >= 0.0, ErrorCode::invariant,
            "StepPath jump times must be nonnegative");
    if (k > 0) {
      require(jump_times[k] > jump_times[k - 1], ErrorCode::invariant,
              "StepPath jump times must be strictly increasing");
    }
  }
}

double StepPath::value_at(double t) const {
  check_time_arg(t);
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_value;
  return post_jump_values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double StepPath::left_limit_at(double t) const {
  check_time_arg(t);
  auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_value;
  return post_jump_values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double StepPath::final_value() const {
  return post_jump_values.empty() ? initial_value : post_jump_values.back();
}

bool StepPath::has_jump_at(double t) const {
  return std::binary_search(jump_times.begin(), jump_times.end(), t);
}

FiniteVariationPath::FiniteVariationPath(double initial, std::vector<Jump> j,
                                         std::vector<DensitySegment> s)
    : initial_value(initial), jumps(std::move(j)), segments(std::move(s)) {
  check_finite(initial_value, "FiniteVariationPath initial value");
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    check_finite(jumps[k].time, "jump time");
    check_finite(jumps[k].size, "jump size");
    require(jumps[k].time >= 0.0, ErrorCode::invariant,
            "jump times must be nonnegative");
    if (k > 0) {
      require(jumps[k].time > jumps[k - 1].time, ErrorCode::invariant,
              "jump times must be strictly increasing");
    }
  }
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& seg = segments[k];
    check_finite(seg.start, "segment start");
    check_finite(seg.end, "segment end");
    check_finite(seg.rate, "segment rate");
    require(seg.start >= 0.0, ErrorCode::invariant,
            "segment start must be nonnegative");
    require(seg.end > seg.start, ErrorCode::invariant,
            "segment must have end > start");
    if (k > 0) {
      require(seg.start >= segments[k - 1].end, ErrorCode::invariant,
              "segments must be ordered and disjoint");
    }
  }
}

double FiniteVariationPath::value_at(double t) const {
  check_time_arg(t);
  double v = initial_value;
  for (const auto& j : jumps) {
    if (j.time > t) break;
    v += j.size;
  }
  for (const auto& s : segments) {
    if (s.start >= t) break;
    v += s.rate * (std::min(s.end, t) - s.start);
  }
  return v;
}

double FiniteVariationPath::left_limit_at(double t) const {
  check_time_arg(t);
  double v = initial_value;
  for (const auto& j : jumps) {
    if (j.time >= t) break;
    v += j.size;
  }
  for (const auto& s : segments) {
    if (s.start >= t) break;
    v += s.rate * (std::min(s.end, t) - s.start);
  }
  return v;
}

double FiniteVariationPath::final_value() const {
  double v = initial_value;
  for (const auto& j : jumps) v += j.size;
  for (const auto& s : segments) v += s.rate * (s.end - s.start);
  return v;
}

FiniteVariationPath to_finite_variation(const StepPath& p) {
  std::vector<Jump> jumps;
  jumps.reserve(p.jump_times.size());
  double prev = p.initial_value;
  for (std::size_t k = 0; k < p.jump_times.size(); ++k) {
    jumps.push_back({p.jump_times[k], p.post_jump_values[k] - prev});
    prev = p.post_jump_values[k];
  }
  return FiniteVariationPath(p.initial_value, std::move(jumps), {});
}

StepPath ecdf_path(std::vector<double> sample) {
  require(!sample.empty(), ErrorCode::input, "ecdf_path needs a nonempty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  std::vector<double> times;
  std::vector<double> values;
  std::size_t i = 0;
  while (i < sample.size()) {
    std::size_t j = i;
    while (j < sample.size() && sample[j] == sample[i]) ++j;
    times.push_back(sample[i]);
    values.push_back(static_cast<double>(j) / n);
    i = j;
  }
  return StepPath(0.0, std::move(times), std::move(values));
}

// ---------------------------------------------------------------------------
// Canonical signed-measure representation used by the exact norm algorithms.

namespace {

struct PathRepr {
  double initial = 0.0;
  std::vector<Jump> jumps;               // strictly increasing
  std::vector<DensitySegment> segments;  // ordered, disjoint
};

PathRepr repr_of(const StepPath& p) {
  PathRepr r;
  r.initial = p.initial_value;
  double prev = p.initial_value;
  r.jumps.reserve(p.jump_times.size());
  for (std::size_t k = 0; k < p.jump_times.size(); ++k) {
    r.jumps.push_back({p.jump_times[k], p.post_jump_values[k] - prev});
    prev = p.post_jump_values[k];
  }
  return r;
}

PathRepr repr_of(const FiniteVariationPath& p) {
  return PathRepr{p.initial_value, p.jumps, p.segments};
}

// Representation of a - b: jumps merged by time, density refined at all
// segment breakpoints of both paths.
PathRepr difference(const PathRepr& a, const PathRepr& b) {
  PathRepr d;
  d.initial = a.initial - b.initial;

  std::size_t ia = 0, ib = 0;
  while (ia < a.jumps.size() || ib < b.jumps.size()) {
    const double ta = ia < a.jumps.size() ? a.jumps[ia].time : kInfiniteTime;
    const double tb = ib < b.jumps.size() ? b.jumps[ib].time : kInfiniteTime;
    const double t = std::min(ta, tb);
    double size = 0.0;
    if (ta == t) size += a.jumps[ia++].size;
    if (tb == t) size -= b.jumps[ib++].size;
    d.jumps.push_back({t, size});
  }

  // Sweep over segment boundaries; the active rate on a refined interval is
  // rate_a - rate_b with absent segments contributing zero.
  std::vector<double> bounds;
  for (const auto& s : a.segments) {
    bounds.push_back(s.start);
    bounds.push_back(s.end);
  }
  for (const auto& s : b.segments) {
    bounds.push_back(s.start);
    bounds.push_back(s.end);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  auto rate_at = [](const std::vector<DensitySegment>& segs, double lo) {
    for (const auto& s : segs) {
      if (s.start <= lo && lo < s.end) return s.rate;
      if (s.start > lo) break;
    }
    return 0.0;
  };
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const double lo = bounds[k];
    const double hi = bounds[k + 1];
    const double r = rate_at(a.segments, lo) - rate_at(b.segments, lo);
    if (r != 0.0) d.segments.push_back({lo, hi, r});
  }
  return d;
}

// f(0) folds in any atom exactly at t == 0.
double value_at_zero(const PathRepr& r) {
  double v = r.initial;
  for (const auto& j : r.jumps) {
    if (j.time > 0.0) break;
    v += j.size;
  }
  return v;
}

double tv_of(const PathRepr& r, TvOptions opts) {
  double tv = 0.0;
  for (const auto& j : r.jumps) {
    if (j.time > 0.0) tv += std::abs(j.size);
  }
  for (const auto& s : r.segments) tv += std::abs(s.rate) * (s.end - s.start);
  if (opts.include_initial) tv += std::abs(value_at_zero(r));
  return tv;
}

// Exact sup of |f|: f is linear between breakpoints, so the supremum is
// attained at a breakpoint, a left limit, or t == 0.
double sup_of(const PathRepr& r) {
  std::vector<double> points;
  points.reserve(r.jumps.size() + 2 * r.segments.size() + 1);
  points.push_back(0.0);
  for (const auto& j : r.jumps) points.push_back(j.time);
  for (const auto& s : r.segments) {
    points.push_back(s.start);
    points.push_back(s.end);
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  auto rate_at = [&](double lo) {
    for (const auto& s : r.segments) {
      if (s.start <= lo && lo < s.end) return s.rate;
      if (s.start > lo) break;
    }
    return 0.0;
  };

  double best = 0.0;
  double v = r.initial;
  std::size_t ij = 0;
  double prev_t = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double t = points[k];
    if (k > 0) {
      v += rate_at(prev_t) * (t - prev_t);  // left limit at t
      best = std::max(best, std::abs(v));
    }
    while (ij < r.jumps.size() && r.jumps[ij].time == t) v += r.jumps[ij++].size;
    best = std::max(best, std::abs(v));
    prev_t = t;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Riemann-Stieltjes integration

namespace {

void check_upper(double upper) {
  if (std::isnan(upper) || upper < 0.0) {
    fail(ErrorCode::input, "integration upper limit must be >= 0");
  }
}

// Exact integral of a step integrand against one constant-rate segment:
// sum of (piece value) * rate * (piece length) over the integrand's pieces.
double step_against_segment(const StepPath& f, const DensitySegment& seg,
                            double upper) {
  const double lo = seg.start;
  const double hi = std::min(seg.end, upper);
  if (hi <= lo) return 0.0;
  double acc = 0.0;
  double cur = lo;
  auto it = std::upper_bound(f.jump_times.begin(), f.jump_times.end(), lo);
  while (cur < hi) {
    double next = hi;
    if (it != f.jump_times.end() && *it < hi) next = *it;
    acc += f.value_at(cur) * (next - cur);
    cur = next;
    if (it != f.jump_times.end() && *it == cur) ++it;
  }
  return acc * seg.rate;
}

}  // namespace

double rs_integrate(const StepPath& integrand, const FiniteVariationPath& integrator,
                    double upper, RsOptions opts) {
  check_upper(upper);
  double acc = 0.0;
  for (const auto& j : integrator.jumps) {
    if (j.time > upper) break;
    if (j.time == 0.0) continue;  // atoms at 0 belong to the initial condition
    double fv;
    if (opts.use_left_limits) {
      fv = integrand.left_limit_at(j.time);
    } else {
      if (integrand.has_jump_at(j.time)) {
        fail(ErrorCode::invariant,
             "integrand and integrator share a jump at t=" +
                 std::to_string(j.time) +
                 "; pass use_left_limits to fix the convention");
      }
      fv = integrand.value_at(j.time);
    }
    acc += fv * j.size;
  }
  for (const auto& seg : integrator.segments) {
    acc += step_against_segment(integrand, seg, upper);
  }
  return acc;
}

double rs_integrate(const std::function<double(double)>& integrand,
                    const FiniteVariationPath& integrator, double upper,
                    RsOptions opts) {
  check_upper(upper);
  double acc = 0.0;
  for (const auto& j : integrator.jumps) {
    if (j.time > upper) break;
    if (j.time == 0.0) continue;
    acc += integrand(j.time) * j.size;  // a callable has no jumps to collide with
  }
  for (const auto& seg : integrator.segments) {
    const double hi = std::min(seg.end, upper);
    if (hi <= seg.start || seg.rate == 0.0) continue;
    acc += seg.rate * adaptive_simpson(integrand, seg.start, hi,
                                       opts.quad_abs_tol, opts.quad_rel_tol);
  }
  return acc;
}

double product_limit(const FiniteVariationPath& cumulative_hazard, double t) {
  check_time_arg(t);
  double cont = 0.0;
  for (const auto& s : cumulative_hazard.segments) {
    require(s.rate >= 0.0, ErrorCode::invariant,
            "product_limit requires a nondecreasing cumulative hazard");
    if (s.start >= t) break;
    cont += s.rate * (std::min(s.end, t) - s.start);
  }
  double disc = 1.0;
  for (const auto& j : cumulative_hazard.jumps) {
    require(j.size >= 0.0, ErrorCode::invariant,
            "product_limit requires a nondecreasing cumulative hazard");
    if (j.time > t) break;
    if (j.size > 1.0) {
      fail(ErrorCode::domain, "cumulative hazard jump of size " +
                                  std::to_string(j.size) +
                                  " > 1 gives a negative survival");
    }
    disc *= 1.0 - j.size;
  }
  return std::exp(-cont) * disc;
}

double total_variation(const StepPath& f, TvOptions opts) {
  return tv_of(repr_of(f), opts);
}

double total_variation(const FiniteVariationPath& f, TvOptions opts) {
  return tv_of(repr_of(f), opts);
}

double total_variation(const StepPath& a, const StepPath& b, TvOptions opts) {
  return tv_of(difference(repr_of(a), repr_of(b)), opts);
}

double total_variation(const StepPath& a, const FiniteVariationPath& b,
                       TvOptions opts) {
  return tv_of(difference(repr_of(a), repr_of(b)), opts);
}

double total_variation(const FiniteVariationPath& a, const FiniteVariationPath& b,
                       TvOptions opts) {
  return tv_of(difference(repr_of(a), repr_of(b)), opts);
}

double sup_distance(const StepPath& a, const StepPath& b) {
  return sup_of(difference(repr_of(a), repr_of(b)));
}

double sup_distance(const StepPath& a, const FiniteVariationPath& b) {
  return sup_of(difference(repr_of(a), repr_of(b)));
}

double sup_distance(const FiniteVariationPath& a, const FiniteVariationPath& b) {
  return sup_of(difference(repr_of(a), repr_of(b)));
}

}  // namespace ctdr
