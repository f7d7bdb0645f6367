#pragma once

// Test-side oracles kept independent of the library code they check:
// central finite differences, plain composite trapezoid quadrature,
// and exhaustive enumeration helpers.

#include <cmath>
#include <functional>
#include <vector>

namespace testing_oracles {

// Central finite difference of a scalar function of one coordinate of
// a parameter vector.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> params, size_t i,
                           double h = 1e-5) {
  params[i] += h;
  const double up = f(params);
  params[i] -= 2.0 * h;
  const double dn = f(params);
  return (up - dn) / (2.0 * h);
}

// Composite trapezoid on a fixed uniform grid.
inline double trapezoid(const std::function<double(double)>& f, double lo,
                        double hi, long n) {
  double acc = 0.5 * (f(lo) + f(hi));
  for (long i = 1; i < n; ++i) {
    acc += f(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n));
  }
  return acc * (hi - lo) / static_cast<double>(n);
}

// Composite Simpson (n must be even) for high-accuracy smooth oracles.
inline double simpson(const std::function<double(double)>& f, double lo,
                      double hi, long n) {
  if (n % 2 != 0) ++n;
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = f(lo) + f(hi);
  for (long i = 1; i < n; ++i) {
    acc += f(lo + h * static_cast<double>(i)) * (i % 2 == 0 ? 2.0 : 4.0);
  }
  return acc * h / 3.0;
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
  long n = 0;
};

inline MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar mv;
  mv.n = static_cast<long>(xs.size());
  for (double x : xs) mv.mean += x;
  mv.mean /= static_cast<double>(mv.n);
  for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
  mv.var /= static_cast<double>(mv.n);
  return mv;
}

inline double std_error(const MeanVar& mv) {
  return std::sqrt(mv.var / static_cast<double>(mv.n));
}

}  // namespace testing_oracles
