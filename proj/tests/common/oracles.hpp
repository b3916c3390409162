#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "mdaircomp/common.hpp"

namespace oracle {

using mdaircomp::cd;

struct Moments {
  cd mean;
  double var;
  double pi;
};

// log of int exp(-(x-m1)^2/v1 - (x-m2)^2/v2) dx by the trapezoid rule on a
// grid fine and wide enough for both factors.
inline double log_gauss_product_integral(double m1, double v1, double m2, double v2,
                                         double* first_moment, double* second_moment) {
  const double s_min = std::sqrt(std::min(v1, v2));
  const double s_max = std::sqrt(std::max(v1, v2));
  const double lo = std::min(m1, m2) - 14.0 * s_max;
  const double hi = std::max(m1, m2) + 14.0 * s_max;
  const double h = s_min / 12.0;
  const auto n = static_cast<long>(std::ceil((hi - lo) / h));
  auto f = [&](double x) { return -(x - m1) * (x - m1) / v1 - (x - m2) * (x - m2) / v2; };
  double top = -INFINITY;
  for (long i = 0; i <= n; ++i) top = std::max(top, f(lo + i * h));
  long double s0 = 0, s1 = 0, s2 = 0;
  for (long i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const long double w = std::exp(static_cast<long double>(f(x) - top)) * ((i == 0 || i == n) ? 0.5L : 1.0L);
    s0 += w;
    s1 += w * x;
    s2 += w * x * x;
  }
  *first_moment = static_cast<double>(s1 / s0);
  *second_moment = static_cast<double>(s2 / s0);
  return top + std::log(static_cast<double>(s0) * h);
}

/// Posterior of x under (1-a) delta(x) + a CN(x; mu0, tau0) given
/// r = x + CN(0, phi), by quadrature of the unnormalized density over the
/// complex plane (re and im factorize for circular Gaussians).
inline Moments bernoulli_gauss(cd r, double phi, double a, cd mu0, double tau0) {
  double re1, re2, im1, im2;
  const double log_re =
      log_gauss_product_integral(mu0.real(), tau0, r.real(), phi, &re1, &re2);
  const double log_im =
      log_gauss_product_integral(mu0.imag(), tau0, r.imag(), phi, &im1, &im2);
  const double pi_const = std::numbers::pi;
  // slab: a * int CN(x; mu0, tau0) CN(r; x, phi) dx
  const double log_slab = std::log(a) + log_re + log_im - 2.0 * std::log(pi_const) -
                          std::log(tau0) - std::log(phi);
  // spike: (1 - a) CN(r; 0, phi)
  const double log_spike = std::log1p(-a) - std::log(pi_const * phi) - std::norm(r) / phi;
  const double pi = 1.0 / (1.0 + std::exp(log_spike - log_slab));
  const cd slab_mean(re1, im1);
  const double slab_m2 = re2 + im2;
  Moments m;
  m.pi = pi;
  m.mean = pi * slab_mean;
  m.var = pi * slab_m2 - std::norm(m.mean);
  return m;
}

/// Posterior mean/variance of x in {0..ka} under
/// (1-a) delta_0 + (a/ka) sum_s delta_s given r = x + CN(0, phi), by
/// explicit normalization in extended precision.
inline Moments count_prior(cd r, double phi, double a, int ka) {
  long double z = 0, m1 = 0, m2 = 0, active = 0;
  const long double norm = 1.0L / (std::numbers::pi_v<long double> * phi);
  for (int s = 0; s <= ka; ++s) {
    const long double prior = s == 0 ? 1.0L - a : static_cast<long double>(a) / ka;
    const long double d = std::norm(r - cd(s, 0.0));
    const long double w = prior * norm * std::exp(-d / phi);
    z += w;
    m1 += w * s;
    m2 += w * s * s;
    if (s > 0) active += w;
  }
  Moments m;
  m.mean = cd(static_cast<double>(m1 / z), 0.0);
  m.var = static_cast<double>(m2 / z - (m1 / z) * (m1 / z));
  m.pi = static_cast<double>(active / z);
  return m;
}

}  // namespace oracle
