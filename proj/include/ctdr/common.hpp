#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ctdr {

inline constexpr double kZ975 = 1.959964;  // nominal-95% CI half-width multiplier
inline constexpr double kPositivityFloor = 1e-12;

// Index-ordered pairwise summation: deterministic for a given input order and
// independent of thread count, with O(log n) rounding growth.
inline double pairwise_sum(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

inline double pairwise_mean(std::span<const double> x) {
  return x.empty() ? 0.0 : pairwise_sum(x) / static_cast<double>(x.size());
}

namespace detail {

template <class F>
double adaptive_simpson_impl(F& f, double a, double m, double b, double fa,
                             double fm, double fb, double whole, double tol,
                             int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_impl(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_impl(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction. The tolerance is absolute;
// callers convert a relative target using their own scale estimate.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-14,
                        double rel_tol = 1e-12, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(abs_tol, rel_tol * std::abs(whole));
  return detail::adaptive_simpson_impl(f, a, m, b, fa, fm, fb, whole, tol,
                                       max_depth);
}

// 15-point Gauss-Legendre on [a, b]; near machine precision for analytic
// integrands with moderate variation across the panel.
template <class F>
double gauss_legendre_15(F&& f, double a, double b) {
  static constexpr double nodes[8] = {
      0.0,
      0.2011940939974345,
      0.3941513470775634,
      0.5709721726085388,
      0.7244177313601701,
      0.8482065834104272,
      0.9372733924007060,
      0.9879925180204854,
  };
  static constexpr double weights[8] = {
      0.2025782419255613, 0.1984314853271116, 0.1861610000155622,
      0.1662692058169939, 0.1395706779261543, 0.1071592204671719,
      0.0703660474881081, 0.0307532419961173,
  };
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = weights[0] * f(mid);
  for (int i = 1; i < 8; ++i) {
    const double dx = half * nodes[i];
    acc += weights[i] * (f(mid + dx) + f(mid - dx));
  }
  return acc * half;
}

// 17 significant digits: doubles round-trip exactly through the CSV files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// FNV-1a, used for the config digest.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ctdr
