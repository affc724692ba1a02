#pragma once

// Convergence rate of the delayed differential inequality
//   D+u <= -sigma_bar u(t) + sigma_under sup_{[t - tau, t]} u + c,
// i.e. the positive root of  lambda - sigma_bar + sigma_under e^{lambda tau_max} = 0.

#include <cmath>
#include <string>

#include "mplex/errors.hpp"

namespace mplex::halanay {

struct HalanayParams {
  double sigma_bar = 0.0;    // delay-free contraction rate, 1/s
  double sigma_under = 0.0;  // gain of the delayed sup term, 1/s
  double tau_max = 0.0;      // delay bound, s

  void validate() const {
    if (!std::isfinite(sigma_bar) || !std::isfinite(sigma_under) || !std::isfinite(tau_max)) {
      throw DomainError("halanay: parameters must be finite");
    }
    if (tau_max < 0.0) throw DomainError("halanay: tau_max must be >= 0");
    if (sigma_under < 0.0) throw DomainError("halanay: sigma_under must be >= 0");
    if (!(sigma_bar > sigma_under)) {
      throw InfeasibleRateError("halanay: sigma_bar (" + std::to_string(sigma_bar) +
                                ") must exceed sigma_under (" + std::to_string(sigma_under) + ")");
    }
  }
};

/// Left-hand side of the rate equation; strictly increasing in lambda.
inline double rate_residual(const HalanayParams& p, double lambda) {
  return lambda - p.sigma_bar + p.sigma_under * std::exp(lambda * p.tau_max);
}

/// Unique root in (0, sigma_bar]. Closed forms are used when sigma_under = 0
/// (root sigma_bar) or tau_max = 0 (root sigma_bar - sigma_under); otherwise
/// bisection on [0, sigma_bar] (at most 60 halvings, which exhausts
/// double precision on that bracket).
inline double solve_rate(const HalanayParams& p) {
  p.validate();
  if (p.sigma_under == 0.0) return p.sigma_bar;
  if (p.tau_max == 0.0) return p.sigma_bar - p.sigma_under;

  double lo = 0.0;          // residual(lo) = sigma_under - sigma_bar < 0
  double hi = p.sigma_bar;  // residual(hi) = sigma_under e^{...} >= 0
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double r = rate_residual(p, mid);
    if (r == 0.0) return mid;
    (r < 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * p.sigma_bar) break;
  }
  // Return whichever bracket end has the smaller residual.
  return std::abs(rate_residual(p, lo)) <= std::abs(rate_residual(p, hi)) ? lo : hi;
}

/// u0 e^{-lambda t} + c / (sigma_bar - sigma_under), with t the elapsed time.
inline double decay_envelope(const HalanayParams& p, double u0, double c, double t) {
  if (u0 < 0.0 || c < 0.0 || t < 0.0) {
    throw DomainError("decay_envelope: u0, c and t must be >= 0");
  }
  const double lambda = solve_rate(p);
  return u0 * std::exp(-lambda * t) + c / (p.sigma_bar - p.sigma_under);
}

}  // namespace mplex::halanay
