#pragma once

// Fixed-step RK4 for the closed loop
//
//   x' = f(x, t) + u + d(t),   r_k' = h_k + h^tau_k + r_{k+1},
//
// with delayed arguments read from a cubic Hermite history of the mesh
// values and derivatives. A delayed time that falls past the last completed
// mesh interval is served by extrapolating that interval's cubic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mplex/certify.hpp"
#include "mplex/errors.hpp"
#include "mplex/linalg.hpp"
#include "mplex/netmodel.hpp"

namespace mplex {

/// N(0, 1) draws by Box-Muller on mt19937_64, so sequences are identical
/// across standard libraries.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(two_pi * u2);
    cached_ = true;
    return radius * std::cos(two_pi * u2);
  }

 private:
  // 53 random bits in [0, 1).
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool cached_ = false;
};

using AgentHistoryFn = std::function<void(std::size_t agent, double s, std::span<double> out)>;
// layer is 1-based
using LayerHistoryFn = std::function<void(std::size_t layer, std::size_t agent, double s, std::span<double> out)>;

struct SimConfig {
  double t0 = 0.0;
  double horizon = 1.0;
  double dt = 1e-3;
  Vector initial_state;  // N * n; empty: N(0,1) draws if random_initial, else zeros
  bool random_initial = false;
  std::uint64_t seed = 1;
  AgentHistoryFn x_history;  // on [t0 - tau_max, t0); empty: constant at x(t0)
  LayerHistoryFn r_history;  // empty: r = 0
  std::size_t guard_samples = 4001;  // delay samples per channel for the dt guard

  void validate() const {
    if (!std::isfinite(t0)) throw ConfigError("t0 must be finite");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
    if (dt > horizon) throw ConfigError("dt exceeds the horizon");
    if (guard_samples < 2) throw ConfigError("guard_samples must be >= 2");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }
};

/// Ring buffer of mesh values x_p and derivatives x'_p at t0 + p dt.
class HermiteHistory {
 public:
  HermiteHistory(std::size_t width, double t0, double dt, double tau_max, AgentHistoryFn pre, std::size_t agent_dim)
      : width_(width), agent_dim_(agent_dim), t0_(t0), dt_(dt), tau_max_(tau_max), pre_(std::move(pre)) {
    capacity_ = static_cast<std::size_t>(std::ceil(std::max(tau_max, dt) / dt)) + 4;
    values_.assign(capacity_ * width_, 0.0);
    derivs_.assign(capacity_ * width_, 0.0);
  }

  std::size_t count() const noexcept { return count_; }
  double time(std::size_t p) const noexcept { return t0_ + static_cast<double>(p) * dt_; }

  void push(std::span<const double> x) {
    std::copy(x.begin(), x.end(), values_.begin() + static_cast<std::ptrdiff_t>(slot(count_) * width_));
    ++count_;
    has_deriv_ = false;
  }

  /// Derivative at the most recently pushed point.
  void set_derivative(std::span<const double> dx) {
    std::copy(dx.begin(), dx.end(), derivs_.begin() + static_cast<std::ptrdiff_t>(slot(count_ - 1) * width_));
    has_deriv_ = true;
  }

  /// Components [agent * agent_dim, (agent + 1) * agent_dim) at time s.
  void lookup(std::size_t agent, double s, std::span<double> out) const {
    const std::size_t off = agent * agent_dim_;
    if (s < t0_) {
      if (s < t0_ - tau_max_ - 1e-9 * std::max(1.0, std::abs(t0_))) {
        throw HistoryUnderflowError("lookup at t=" + std::to_string(s) + " precedes the initial history window");
      }
      if (pre_) {
        pre_(agent, s, out);
      } else {
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(slot(0) * width_ + off), agent_dim_, out.begin());
      }
      return;
    }
    if (count_ == 0) throw HistoryUnderflowError("history is empty");
    const double u = (s - t0_) / dt_;
    const std::size_t last = count_ - 1;
    std::size_t p = static_cast<std::size_t>(std::floor(u));
    if (u == std::floor(u) && p <= last) {  // exact mesh point
      check_available(p);
      copy_value(p, off, out);
      return;
    }
    // Completed intervals end at the last point with a derivative.
    const std::size_t complete = has_deriv_ ? last : (last == 0 ? 0 : last - 1);
    if (complete == 0) {
      if (!has_deriv_ && last == 0) {
        copy_value(0, off, out);
        return;
      }
      const double* x0 = &values_[slot(0) * width_ + off];
      const double* d0 = &derivs_[slot(0) * width_ + off];
      const double h = s - t0_;
      for (std::size_t d = 0; d < agent_dim_; ++d) out[d] = x0[d] + h * d0[d];
      return;
    }
    p = std::min(p, complete - 1);
    check_available(p);
    const double theta = u - static_cast<double>(p);
    const double t2 = theta * theta, t3 = t2 * theta;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + theta, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    const double* xa = &values_[slot(p) * width_ + off];
    const double* xb = &values_[slot(p + 1) * width_ + off];
    const double* da = &derivs_[slot(p) * width_ + off];
    const double* db = &derivs_[slot(p + 1) * width_ + off];
    for (std::size_t d = 0; d < agent_dim_; ++d)
      out[d] = h00 * xa[d] + h10 * dt_ * da[d] + h01 * xb[d] + h11 * dt_ * db[d];
  }

 private:
  std::size_t slot(std::size_t p) const noexcept { return p % capacity_; }

  void check_available(std::size_t p) const {
    if (count_ > capacity_ && p < count_ - capacity_) {
      throw HistoryUnderflowError("lookup reaches before the stored history");
    }
  }

  void copy_value(std::size_t p, std::size_t off, std::span<double> out) const {
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(slot(p) * width_ + off), agent_dim_, out.begin());
  }

  std::size_t width_;
  std::size_t agent_dim_;
  double t0_, dt_, tau_max_;
  AgentHistoryFn pre_;
  std::size_t capacity_ = 0;
  std::size_t count_ = 0;
  bool has_deriv_ = false;
  Vector values_, derivs_;
};

/// Uniform-mesh record of a run. x, r, u, y are row-major per mesh point.
/// u is the physical input (input_scale times the model input).
struct Trace {
  std::size_t agents = 0, state_dim = 0, layers = 0, output_dim = 0;
  Vector times;
  Vector x, r, u, y;
  Vector error;  // ||y - y*||_cmpst

  std::size_t size() const noexcept { return times.size(); }
  std::size_t x_width() const noexcept { return agents * state_dim; }
  std::size_t r_width() const noexcept { return layers * agents * state_dim; }
  std::size_t y_width() const noexcept { return agents * output_dim; }

  std::span<const double> x_at(std::size_t k) const { return {x.data() + k * x_width(), x_width()}; }
  std::span<const double> r_at(std::size_t k) const { return {r.data() + k * r_width(), r_width()}; }
  std::span<const double> u_at(std::size_t k) const { return {u.data() + k * x_width(), x_width()}; }
  std::span<const double> y_at(std::size_t k) const { return {y.data() + k * y_width(), y_width()}; }

  /// r_{i,k} (k 1-based) at mesh point `row`.
  std::span<const double> layer(std::size_t row, std::size_t k, std::size_t i) const {
    return r_at(row).subspan(((k - 1) * agents + i) * state_dim, state_dim);
  }
};

struct DelayGuard {
  double median = 0.0;
  double minimum = 0.0;
  double maximum = 0.0;
};

/// Samples every channel over the horizon; throws ScheduleError if a sample
/// exceeds tau_max and ConfigError if dt > median / 10.
inline DelayGuard check_delay_guard(const MultiplexNetwork& net, const SimConfig& cfg) {
  DelayGuard g;
  if (net.delays.count() == 0) return g;
  Vector taus;
  taus.reserve(net.delays.count() * cfg.guard_samples);
  const double step = cfg.horizon / static_cast<double>(cfg.guard_samples - 1);
  for (std::size_t k = 0; k < net.delays.count(); ++k)
    for (std::size_t s = 0; s < cfg.guard_samples; ++s)
      taus.push_back(net.delays.delay(k, cfg.t0 + static_cast<double>(s) * step));
  g.minimum = *std::min_element(taus.begin(), taus.end());
  g.maximum = *std::max_element(taus.begin(), taus.end());
  auto mid = taus.begin() + static_cast<std::ptrdiff_t>(taus.size() / 2);
  std::nth_element(taus.begin(), mid, taus.end());
  g.median = *mid;
  if (!(g.median > 0.0) || cfg.dt > g.median / 10.0) {
    throw ConfigError("dt=" + std::to_string(cfg.dt) + " violates the delay guard dt <= median(tau)/10 = " +
                      std::to_string(g.median / 10.0));
  }
  return g;
}

namespace detail {

inline Vector initial_state(const MultiplexNetwork& net, const SimConfig& cfg) {
  const std::size_t width = net.size() * net.state_dim;
  if (!cfg.initial_state.empty()) {
    if (cfg.initial_state.size() != width) throw ConfigError("initial state has wrong dimension");
    return cfg.initial_state;
  }
  Vector x(width, 0.0);
  if (cfg.random_initial) {
    NormalSampler normal(cfg.seed);
    for (double& v : x) v = normal();
  }
  return x;
}

inline void output_error(const MultiplexNetwork& net, std::span<const double> x, double t, std::span<double> y,
                         Vector& scratch_desired, Vector& scratch_y, Vector& err) {
  const std::size_t n = net.state_dim;
  std::size_t yoff = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const std::size_t r = net.output_dim(i);
    net.output(i, x.subspan(i * n, n), y.subspan(yoff, r));
    scratch_desired = net.desired_state(i, t);
    scratch_y.assign(r, 0.0);
    net.output(i, scratch_desired, scratch_y);
    for (std::size_t d = 0; d < r; ++d) err[yoff + d] = y[yoff + d] - scratch_y[d];
    yoff += r;
  }
}

}  // namespace detail

/// Integrates the closed loop and records every mesh point.
inline Trace simulate(const MultiplexNetwork& net, const SimConfig& cfg, const NormSpec& spec) {
  cfg.validate();
  net.validate();
  spec.validate(net.size());
  check_delay_guard(net, cfg);

  const std::size_t N = net.size();
  const std::size_t n = net.state_dim;
  const std::size_t m = net.integral_layers;
  const std::size_t nx = N * n, nr = m * N * n, ny_agent = net.output_dim(0);
  for (std::size_t i = 0; i < N; ++i)
    if (net.output_dim(i) != ny_agent) throw ModelError("simulate: all agents must share the output dimension");
  const BlockPartition ypart = BlockPartition::uniform(N, ny_agent);

  Vector state(nx + nr, 0.0);
  const Vector x0 = detail::initial_state(net, cfg);
  std::copy(x0.begin(), x0.end(), state.begin());
  if (cfg.r_history) {
    for (std::size_t k = 1; k <= m; ++k)
      for (std::size_t i = 0; i < N; ++i)
        cfg.r_history(k, i, cfg.t0,
                      std::span<double>(state).subspan(nx + ((k - 1) * N + i) * n, n));
  }

  HermiteHistory hist(nx, cfg.t0, cfg.dt, net.delays.tau_max, cfg.x_history, n);
  ControlEvaluator control(net);
  const HistoryFn lookup = [&hist](std::size_t agent, double s, std::span<double> out) {
    hist.lookup(agent, s, out);
  };

  Vector u(nx), rdot(nr), fi(n), d(n);
  // y' = F(t, y); u receives the model input.
  auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
    const auto x = y.subspan(0, nx);
    const auto r = y.subspan(nx, nr);
    control.evaluate(x, r, lookup, t, u, rdot);
    for (std::size_t i = 0; i < N; ++i) {
      std::fill(d.begin(), d.end(), 0.0);
      net.disturbance.add_total(i, t, d);
      if (net.agents[i].field) {
        net.agents[i].field(x.subspan(i * n, n), t, fi);
      } else {
        std::fill(fi.begin(), fi.end(), 0.0);
      }
      for (std::size_t c = 0; c < n; ++c) dy[i * n + c] = fi[c] + u[i * n + c] + d[c];
    }
    std::copy(rdot.begin(), rdot.end(), dy.begin() + static_cast<std::ptrdiff_t>(nx));
  };

  const std::size_t steps = cfg.steps();
  Trace tr;
  tr.agents = N;
  tr.state_dim = n;
  tr.layers = m;
  tr.output_dim = ny_agent;
  tr.times.reserve(steps + 1);
  tr.x.reserve((steps + 1) * nx);
  tr.r.reserve((steps + 1) * nr);
  tr.u.reserve((steps + 1) * nx);
  tr.y.reserve((steps + 1) * N * ny_agent);
  tr.error.reserve(steps + 1);

  Vector ybuf(N * ny_agent), err(N * ny_agent), sd, sy;
  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.x.insert(tr.x.end(), state.begin(), state.begin() + static_cast<std::ptrdiff_t>(nx));
    tr.r.insert(tr.r.end(), state.begin() + static_cast<std::ptrdiff_t>(nx), state.end());
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < n; ++c) tr.u.push_back(net.input_scale_for(i) * u[i * n + c]);
    detail::output_error(net, std::span<const double>(state).subspan(0, nx), t, ybuf, sd, sy, err);
    tr.y.insert(tr.y.end(), ybuf.begin(), ybuf.end());
    tr.error.push_back(composite_vector_norm(err, ypart, spec));
  };

  const std::size_t dim = nx + nr;
  Vector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  const double h = cfg.dt;
  for (std::size_t s = 0;; ++s) {
    const double t = cfg.t0 + static_cast<double>(s) * h;
    hist.push(std::span<const double>(state).subspan(0, nx));
    rhs(t, state, k1);
    hist.set_derivative(std::span<const double>(k1).subspan(0, nx));
    record(t);
    if (s == steps) break;

    for (std::size_t c = 0; c < dim; ++c) tmp[c] = state[c] + 0.5 * h * k1[c];
    rhs(t + 0.5 * h, tmp, k2);
    for (std::size_t c = 0; c < dim; ++c) tmp[c] = state[c] + 0.5 * h * k2[c];
    rhs(t + 0.5 * h, tmp, k3);
    for (std::size_t c = 0; c < dim; ++c) tmp[c] = state[c] + h * k3[c];
    rhs(t + h, tmp, k4);
    for (std::size_t c = 0; c < dim; ++c) state[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    for (double v : state)
      if (!std::isfinite(v)) throw DomainError("simulation diverged at t=" + std::to_string(t + h));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Metrics

/// zeta_{i,k}(t) = r_{i,k}(t) + zeta_offset(m, k, dbar_i, t).
inline Vector zeta_at(const Trace& tr, const MultiplexNetwork& net, std::size_t row, std::size_t i, std::size_t k) {
  const auto r = tr.layer(row, k, i);
  static const std::vector<Vector> none;
  const auto& dbar = i < net.disturbance.poly.size() ? net.disturbance.poly[i] : none;
  Vector z = zeta_offset(net.integral_layers, k, dbar, tr.times[row], net.state_dim);
  for (std::size_t d = 0; d < z.size(); ++d) z[d] += r[d];
  return z;
}

struct MetricsConfig {
  double tail_window = 5.0;  // s, measured back from the final time
  double threshold = 1e-3;
};

struct ErrorMetrics {
  double sup = 0.0;
  double tail_sup = 0.0;
  double final_error = 0.0;
  std::optional<double> time_to_threshold;  // error stays below threshold from here on
  Vector zeta_tail_sup;                       // per layer: tail sup of ||zeta_k||_cmpst
};

inline ErrorMetrics error_metrics(const Trace& tr, const MultiplexNetwork& net, const NormSpec& spec,
                                  const MetricsConfig& mc = {}) {
  ErrorMetrics em;
  if (tr.size() == 0) return em;
  spec.validate(net.size());
  const double t_end = tr.times.back();
  const double t_tail = t_end - mc.tail_window;
  const BlockPartition xpart = BlockPartition::uniform(net.size(), net.state_dim);
  em.zeta_tail_sup.assign(net.integral_layers, 0.0);
  Vector zk(net.size() * net.state_dim);
  for (std::size_t row = 0; row < tr.size(); ++row) {
    const double e = tr.error[row];
    em.sup = std::max(em.sup, e);
    if (tr.times[row] < t_tail - 1e-12) continue;
    em.tail_sup = std::max(em.tail_sup, e);
    for (std::size_t k = 1; k <= net.integral_layers; ++k) {
      for (std::size_t i = 0; i < net.size(); ++i) {
        const Vector z = zeta_at(tr, net, row, i, k);
        std::copy(z.begin(), z.end(), zk.begin() + static_cast<std::ptrdiff_t>(i * net.state_dim));
      }
      em.zeta_tail_sup[k - 1] = std::max(em.zeta_tail_sup[k - 1], composite_vector_norm(zk, xpart, spec));
    }
  }
  em.final_error = tr.error.back();
  std::size_t first_ok = tr.size();
  while (first_ok > 0 && tr.error[first_ok - 1] < mc.threshold) --first_ok;
  if (first_ok < tr.size()) em.time_to_threshold = tr.times[first_ok];
  return em;
}

/// Sup terms of the initial history window for the ISS envelope, sampled on
/// `samples` points of [t0 - tau_max, t0]. x0 is the state at t0.
inline HistorySups history_sups(const MultiplexNetwork& net, const SimConfig& cfg, const NormSpec& spec,
                                std::span<const double> x0, std::size_t samples = 201) {
  spec.validate(net.size());
  const std::size_t N = net.size(), n = net.state_dim, m = net.integral_layers;
  const BlockPartition part = BlockPartition::uniform(N, n);
  HistorySups sups;
  sups.zeta.assign(m, 0.0);
  sups.w = declared_w_sup(net, spec);
  const double tau = net.delays.tau_max;
  Vector e(N * n), z(N * n), buf(n);
  static const std::vector<Vector> none;
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = samples == 1 ? cfg.t0
                                  : cfg.t0 - tau + tau * static_cast<double>(s) / static_cast<double>(samples - 1);
    for (std::size_t i = 0; i < N; ++i) {
      if (cfg.x_history && t < cfg.t0) {
        cfg.x_history(i, t, buf);
      } else {
        std::copy_n(x0.begin() + static_cast<std::ptrdiff_t>(i * n), n, buf.begin());
      }
      const Vector xs = net.desired_state(i, t);
      for (std::size_t d = 0; d < n; ++d) e[i * n + d] = buf[d] - xs[d];
    }
    sups.state = std::max(sups.state, composite_vector_norm(e, part, spec));
    for (std::size_t k = 1; k <= m; ++k) {
      for (std::size_t i = 0; i < N; ++i) {
        std::fill(buf.begin(), buf.end(), 0.0);
        if (cfg.r_history) cfg.r_history(k, i, t, buf);
        const auto& dbar = i < net.disturbance.poly.size() ? net.disturbance.poly[i] : none;
        const Vector off = zeta_offset(m, k, dbar, t, n);
        for (std::size_t d = 0; d < n; ++d) z[i * n + d] = buf[d] + off[d];
      }
      sups.zeta[k - 1] = std::max(sups.zeta[k - 1], composite_vector_norm(z, part, spec));
    }
  }
  return sups;
}

/// First mesh point where error exceeds envelope + tol, or nullopt.
inline std::optional<std::size_t> envelope_violation(const Trace& tr, const IssEnvelope& env, double tol = 1e-9) {
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (tr.error[k] > env(tr.times[k]) + tol) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header row then every `stride`-th mesh point (the last point is always
/// written): t, x<i>_<d>, r<k>_<i>_<d>, u<i>_<d>, y_err.
inline void write_trace_csv(std::ostream& os, const Trace& tr, std::size_t stride = 1) {
  if (stride == 0) throw ConfigError("trace stride must be >= 1");
  const std::size_t N = tr.agents, n = tr.state_dim;
  os << "t";
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t d = 0; d < n; ++d) os << ",x" << i << '_' << d;
  for (std::size_t k = 1; k <= tr.layers; ++k)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t d = 0; d < n; ++d) os << ",r" << k << '_' << i << '_' << d;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t d = 0; d < n; ++d) os << ",u" << i << '_' << d;
  os << ",y_err\n";
  std::string line;
  for (std::size_t row = 0; row < tr.size(); ++row) {
    if (row % stride != 0 && row + 1 != tr.size()) continue;
    line = format_g17(tr.times[row]);
    for (double v : tr.x_at(row)) line += ',' + format_g17(v);
    for (double v : tr.r_at(row)) line += ',' + format_g17(v);
    for (double v : tr.u_at(row)) line += ',' + format_g17(v);
    line += ',' + format_g17(tr.error[row]);
    line += '\n';
    os << line;
  }
}

}  // namespace mplex
