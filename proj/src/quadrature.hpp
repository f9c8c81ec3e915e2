#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "advsparse/errors.hpp"

namespace advsparse::detail {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

// 15-point Kronrod rule with its embedded 7-point Gauss rule on [a, b];
// error is |K15 - G7|.
template <typename F>
QuadratureResult gk15(F& f, double a, double b) {
  static constexpr std::array<double, 8> kNodes = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static constexpr std::array<double, 8> kKronrod = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> kGauss = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = kKronrod[7] * fc;
  double gauss = kGauss[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kNodes[static_cast<std::size_t>(i)];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrod[static_cast<std::size_t>(i)] * pair;
    if (i % 2 == 1) gauss += kGauss[static_cast<std::size_t>(i / 2)] * pair;
  }
  return {kronrod * half, std::fabs((kronrod - gauss) * half)};
}

/// Globally adaptive Gauss-Kronrod: repeatedly bisects the interval with the
/// largest error estimate until the summed estimate is below abs_tolerance.
template <typename F>
QuadratureResult gauss_kronrod(F& f, double a, double b, double abs_tolerance, std::size_t max_intervals = 4000) {
  if (!(b > a)) return {};
  struct Panel {
    double a, b;
    QuadratureResult r;
    bool operator<(const Panel& o) const { return r.error < o.r.error; }
  };
  std::priority_queue<Panel> panels;
  QuadratureResult total = gk15(f, a, b);
  panels.push({a, b, total});
  while (total.error > abs_tolerance && panels.size() < max_intervals) {
    const Panel worst = panels.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;
    panels.pop();
    const Panel left{worst.a, mid, gk15(f, worst.a, mid)};
    const Panel right{mid, worst.b, gk15(f, mid, worst.b)};
    total.value += left.r.value + right.r.value - worst.r.value;
    total.error += left.r.error + right.r.error - worst.r.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  total = {};
  while (!panels.empty()) {
    total.value += panels.top().r.value;
    total.error += panels.top().r.error;
    panels.pop();
  }
  return total;
}

inline double checked(const QuadratureResult& r, double abs_tolerance) {
  if (!std::isfinite(r.value) || r.error > abs_tolerance) {
    throw NumericError("quadrature did not converge: achieved error " + std::to_string(r.error) + " > " +
                       std::to_string(abs_tolerance));
  }
  return r.value;
}

/// Adaptive integral of f over [a, b]. Throws NumericError when the error
/// estimate exceeds abs_tolerance.
template <typename F>
double integrate(F&& f, double a, double b, double abs_tolerance = 1e-8) {
  return checked(gauss_kronrod(f, a, b, abs_tolerance), abs_tolerance);
}

/// Integral over [a, b] split into panels that shrink geometrically toward a,
/// so that integrands concentrated in a thin layer at a are still resolved.
template <typename F>
double integrate_graded(F&& f, double a, double b, double abs_tolerance = 1e-8, int levels = 50) {
  QuadratureResult total;
  double hi = b;
  const double panel_tolerance = abs_tolerance / (levels + 1);
  for (int j = 0; j <= levels; ++j) {
    const double lo = j == levels ? a : a + 0.5 * (hi - a);
    const auto panel = gauss_kronrod(f, lo, hi, panel_tolerance);
    total.value += panel.value;
    total.error += panel.error;
    hi = lo;
  }
  return checked(total, abs_tolerance);
}

}  // namespace advsparse::detail
