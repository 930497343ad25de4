#pragma once

// Difference ratios (divided differences) of scalar- or matrix-valued
// functions of an energy-like variable, with confluent limits at repeated
// points:
//   f[x0, x]        = (f(x) - f(x0)) / (x - x0)
//   f[x0, x, x']    = (f[x0, x'] - f[x0, x]) / (x' - x)
//   f[x, x, ..., x] = f^(n)(x) / n!        (n + 1 equal points)

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "bsbloch/errors.hpp"
#include "bsbloch/numerics.hpp"

namespace bsbloch {

/// Taylor coefficients f^(k)(x)/k!, k = 0..order.
template <typename Value>
using Jet = std::vector<Value>;

namespace detail {

template <typename Point>
bool point_less(const Point& a, const Point& b) {
  if constexpr (is_complex_v<Point>) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  } else {
    return a < b;
  }
}

}  // namespace detail

/// f[x_0, ..., x_n] for a function known through its Taylor jets.
///
/// `jet(x, order)` must return at least `order + 1` coefficients. Points that
/// compare equal are treated as coincident; every other pair is divided
/// directly, so nearly coincident points lose accuracy like (eps / spread^n).
template <typename Point, typename Value, typename JetFn>
Value divided_difference(std::vector<Point> points, JetFn&& jet) {
  if (points.empty()) throw Error(ErrorKind::Invalid, "divided_difference: no points");
  std::sort(points.begin(), points.end(), detail::point_less<Point>);
  const std::size_t n = points.size();

  // Jets at each distinct point, up to its multiplicity - 1.
  std::vector<Jet<Value>> jets(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && points[j + 1] == points[i]) ++j;
    Jet<Value> local = jet(points[i], static_cast<int>(j - i));
    if (local.size() < j - i + 1)
      throw Error(ErrorKind::Invalid, "divided_difference: jet too short");
    for (std::size_t k = i; k <= j; ++k) jets[k] = local;
    i = j + 1;
  }

  // Neville-style table, column by column.
  std::vector<Value> level;
  level.reserve(n);
  for (std::size_t i = 0; i < n; ++i) level.push_back(jets[i][0]);
  for (std::size_t len = 1; len < n; ++len) {
    for (std::size_t i = 0; i + len < n; ++i) {
      const Point& lo = points[i];
      const Point& hi = points[i + len];
      if (lo == hi)
        level[i] = jets[i][len];
      else
        level[i] = (level[i + 1] - level[i]) / (hi - lo);
    }
  }
  return level[0];
}

/// A function with an optional analytic derivative channel.
template <typename Value, typename Point>
struct DifferentiableFunction {
  std::function<Value(Point)> value;
  /// f^(n)(x) for n >= 1; may be left empty.
  std::function<Value(Point, int)> derivative;

  Jet<Value> jet(Point x, int order) const {
    Jet<Value> out{value(x)};
    if (order > 0 && !derivative)
      throw Error(ErrorKind::CoincidentWithoutDerivative,
                  "difference ratio at repeated points needs a derivative channel");
    Point factorial(1);
    for (int k = 1; k <= order; ++k) {
      factorial *= Point(k);
      out.push_back(derivative(x, k) / factorial);
    }
    return out;
  }
};

/// The first `order` points after the anchor are used: (x0; x, x', x'', ...).
template <typename Point>
struct SamplePoints {
  Point anchor;
  std::vector<Point> points;
};

inline constexpr int kMaxDiffRatioOrder = 4;

/// n-th order difference ratio, n in 1..4.
template <typename Value, typename Point>
Value diff_ratio(const DifferentiableFunction<Value, Point>& f, const SamplePoints<Point>& pts,
                 int order) {
  if (order < 1 || order > kMaxDiffRatioOrder)
    throw Error(ErrorKind::Invalid, "diff_ratio: order must be in 1..4");
  if (pts.points.size() < static_cast<std::size_t>(order))
    throw Error(ErrorKind::Invalid, "diff_ratio: not enough sample points");
  std::vector<Point> all{pts.anchor};
  all.insert(all.end(), pts.points.begin(), pts.points.begin() + order);
  return divided_difference<Point, Value>(std::move(all),
                                          [&](Point x, int k) { return f.jet(x, k); });
}

namespace detail {

template <typename T>
auto abs_max(const T& v) {
  if constexpr (requires { v.cwiseAbs(); })
    return max_abs(v);
  else {
    using std::abs;
    return abs(v);
  }
}

}  // namespace detail

/// |f[x0, x0+h, ..., x0+n h] - f^(n)(x0)/n!|, the distance of the n-th
/// difference ratio from its derivative limit at spread h. Matrix-valued f
/// reports the largest entry.
template <typename Value, typename Point>
auto taylor_limit_check(const DifferentiableFunction<Value, Point>& f, Point x0, int n, Point h) {
  if (!f.derivative) throw Error(ErrorKind::Invalid, "taylor_limit_check: f needs derivatives");
  SamplePoints<Point> pts{x0, {}};
  for (int k = 1; k <= n; ++k) pts.points.push_back(x0 + Point(k) * h);
  const Value ratio = diff_ratio(f, pts, n);
  const Value limit = f.jet(x0, n)[static_cast<std::size_t>(n)];
  return detail::abs_max(Value(ratio - limit));
}

}  // namespace bsbloch
