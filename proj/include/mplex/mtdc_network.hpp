#pragma once

// Ring of DC terminals, c v_i' = -sum_j (v_i - v_j)/R + u_i + d_i, with the
// two-layer integral controller
//
//   u_i   = -k0 v_i - sum_j k0t (v_i - v_j)(t - tau_ij) + r_i1
//   r_i1' = -k1 v_i - sum_j k1t (v_i - v_j)(t - tau_ij) + r_i2
//   r_i2' = -k2 v_i - sum_j k2t (v_i - v_j)(t - tau_ij)
//
// The network is stored divided through by c (model coordinates): states
// r~ = r/c, input u~ = u/c, disturbance d~ = d/c, gains k/c. Physical input
// is recovered with input_scale = c. See docs/mtdc_jacobian.md.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mplex/errors.hpp"
#include "mplex/linalg.hpp"
#include "mplex/netmodel.hpp"

namespace mplex::mtdc {

struct GainVector {
  double k0 = 0.0, k1 = 0.0, k2 = 0.0;     // delay-free layer gains
  double k0t = 0.0, k1t = 0.0, k2t = 0.0;  // delayed layer gains

  double delayed_sum() const noexcept { return k0t + k1t + k2t; }
  double delay_free(std::size_t k) const { return k == 0 ? k0 : k == 1 ? k1 : k2; }
  double delayed(std::size_t k) const { return k == 0 ? k0t : k == 1 ? k1t : k2t; }

  GainVector with_delayed(double a, double b, double c) const {
    GainVector g = *this;
    g.k0t = a;
    g.k1t = b;
    g.k2t = c;
    return g;
  }

  bool operator==(const GainVector&) const = default;
};

// Gains reported for the 30-terminal ring.
inline constexpr GainVector kReportedGains{0.7445, 1.3399, 0.5052, 0.00057, 0.00076, 0.00048};

struct TransformParams {
  double alpha = -0.5;
  double beta = -1.0;

  Matrix block() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta)) throw DomainError("transform parameters must be finite");
    return Matrix{{1.0, alpha, 0.0}, {0.0, 1.0, beta}, {0.0, 0.0, 1.0}};
  }
};

struct MtdcParams {
  std::size_t terminals = 30;
  double capacitance = 1e-3;        // F, used by the simulated plant
  double design_capacitance = 1.0;  // F, used for certification and synthesis
  double resistance = 20.0;         // Ohm
  std::size_t disturbed_agent = 0;  // 0-based
  double delay_base = 0.1;          // s
  double delay_amplitude = 0.1;     // s
  bool disturbance = true;
  double horizon = 40.0;  // s
  double dt = 1e-3;       // s
  std::uint64_t seed = 1;

  void validate() const {
    if (terminals < 3) throw ConfigError("MTDC ring needs at least 3 terminals");
    if (!(capacitance > 0.0) || !(design_capacitance > 0.0) || !(resistance > 0.0)) {
      throw ConfigError("capacitance and resistance must be > 0");
    }
    if (disturbed_agent >= terminals) throw ConfigError("disturbed agent out of range");
    if (delay_amplitude < 0.0 || delay_base < delay_amplitude) {
      throw ConfigError("delay schedule must satisfy base >= amplitude >= 0");
    }
    if (!(delay_base + delay_amplitude > 0.0)) throw ConfigError("tau_max must be > 0");
    if (!(horizon > 0.0) || !(dt > 0.0)) throw ConfigError("horizon and dt must be > 0");
  }

  double tau_max() const noexcept { return delay_base + delay_amplitude; }
};

inline void validate_gains(const GainVector& g) {
  const double all[] = {g.k0, g.k1, g.k2, g.k0t, g.k1t, g.k2t};
  for (double v : all)
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("MTDC gains must be finite and >= 0");
}

// d_1(t) = 3 + t + e^{-0.2 t} sin t, split into polynomial and residual parts.
inline constexpr double kDisturbanceD0 = 3.0;
inline constexpr double kDisturbanceD1 = 1.0;
inline double disturbance_residual(double t) { return std::exp(-0.2 * t) * std::sin(t); }
inline double disturbance_total(double t) { return kDisturbanceD0 + kDisturbanceD1 * t + disturbance_residual(t); }

/// Channel index of the directed edge (i <- neighbor), side 0 = i-1, side 1 = i+1.
inline std::size_t channel_index(std::size_t i, std::size_t side) { return 2 * i + side; }

/// Builds the ring with capacitance `c` (pass params.design_capacitance for
/// the design model).
inline MultiplexNetwork build_mtdc(const MtdcParams& p, const GainVector& g, double c) {
  p.validate();
  validate_gains(g);
  if (!(c > 0.0)) throw ConfigError("capacitance must be > 0");
  const std::size_t N = p.terminals;
  const double line = 1.0 / (c * p.resistance);

  MultiplexNetwork net;
  net.state_dim = 1;
  net.integral_layers = 2;
  net.agents.assign(N, AgentDynamics{});
  net.input_scale.assign(N, c);
  net.delays.tau_max = p.tau_max();

  auto s = [](double v) { return Matrix{{v}}; };
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t left = (i + N - 1) % N;
    const std::size_t right = (i + 1) % N;
    // Line currents and the delay-free droop share layer 0.
    net.terms.push_back(linear_term(i, 0, {i, left, right}, {s(-g.k0 / c - 2.0 * line), s(line), s(line)}));
    net.terms.push_back(linear_term(i, 1, {i}, {s(-g.k1 / c)}));
    net.terms.push_back(linear_term(i, 2, {i}, {s(-g.k2 / c)}));

    const double phase = static_cast<double>(i + 1);
    const double base = p.delay_base, amp = p.delay_amplitude;
    for (std::size_t side = 0; side < 2; ++side) {
      const std::size_t j = side == 0 ? left : right;
      const std::size_t ch = net.delays.count();
      net.delays.channels.push_back(
          DelayChannel{i, j, [base, amp, phase](double t) { return base + amp * std::sin(t + phase); }});
      for (std::size_t k = 0; k < 3; ++k) {
        const double kt = g.delayed(k) / c;
        if (kt == 0.0) continue;
        net.terms.push_back(linear_term(i, k, {i, j}, {s(-kt), s(kt)}, ch));
      }
    }
  }

  if (p.disturbance) {
    const std::size_t a = p.disturbed_agent;
    net.disturbance.poly.assign(N, {});
    net.disturbance.poly[a] = {Vector{kDisturbanceD0 / c}, Vector{kDisturbanceD1 / c}};
    net.disturbance.residual.assign(N, nullptr);
    net.disturbance.residual[a] = [c](double t, std::span<double> out) { out[0] = disturbance_residual(t) / c; };
    net.disturbance.residual_bound.assign(N, 0.0);
    net.disturbance.residual_bound[a] = 1.0 / c;
  }
  return net;
}

}  // namespace mplex::mtdc
