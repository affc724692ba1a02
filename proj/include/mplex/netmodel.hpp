#pragma once

// Network model: agents x_i' = f_i(x_i, t) + u_i + d_i with a stack of m
// integral layers
//
//   u_i      = h_{i,0} + h^tau_{i,0} + r_{i,1}
//   r_{i,k}' = h_{i,k} + h^tau_{i,k} + r_{i,k+1}      (r_{i,m+1} = 0)
//
// Coupling functions are sums of CouplingTerm objects. A delayed term is
// bound to one delay channel; every state it reads (including the receiver's
// own) is evaluated at t - tau_channel(t). Channels are the relabeled delays
// tau_1..tau_q of the certificate.
//
// State layout used throughout: x is agent-major (N * n values), r is
// layer-major then agent-major (m * N * n values, layer 1 first).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mplex/errors.hpp"
#include "mplex/linalg.hpp"

namespace mplex {

struct AgentDynamics {
  // Intrinsic field f_i(x_i, t); empty means f_i = 0.
  std::function<void(std::span<const double> x, double t, std::span<double> out)> field;
  // df_i/dx_i; required whenever `field` is set.
  std::function<Matrix(std::span<const double> x, double t)> jacobian;
  // Output map g_i; empty means identity.
  std::function<void(std::span<const double> x, std::span<double> out)> output;
  std::size_t output_dim = 0;  // 0: same as the state dimension
  double output_lipschitz = 1.0;
};

/// Arguments of a coupling term: the states it reads, in the order of
/// CouplingTerm::sources, plus the leader signal (empty if not read).
struct TermArgs {
  std::span<const std::span<const double>> sources;
  std::span<const double> leader;
  double t = 0.0;
};

struct CouplingTerm {
  std::size_t agent = 0;  // receiver i
  std::size_t layer = 0;  // k in [0, m]
  std::vector<std::size_t> sources;
  std::optional<std::size_t> channel;  // set for delayed terms
  bool reads_leader = false;
  // out += h(args)
  std::function<void(const TermArgs&, std::span<double> out)> accumulate;
  // One n x n block per source: dh/dx_{sources[s]}.
  std::function<std::vector<Matrix>(const TermArgs&)> jacobian;

  bool delayed() const noexcept { return channel.has_value(); }
};

/// h = sum_s G_s x_{sources[s]} (+ G_l x_l). Constant Jacobians.
inline CouplingTerm linear_term(std::size_t agent, std::size_t layer, std::vector<std::size_t> sources,
                                std::vector<Matrix> gains, std::optional<std::size_t> channel = std::nullopt,
                                std::optional<Matrix> leader_gain = std::nullopt) {
  if (sources.size() != gains.size()) {
    throw ModelError("linear_term: one gain matrix per source required");
  }
  CouplingTerm term;
  term.agent = agent;
  term.layer = layer;
  term.sources = std::move(sources);
  term.channel = channel;
  term.reads_leader = leader_gain.has_value();
  term.accumulate = [gains, leader_gain](const TermArgs& a, std::span<double> out) {
    for (std::size_t s = 0; s < gains.size(); ++s) {
      const Matrix& g = gains[s];
      const auto xs = a.sources[s];
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) acc += g(r, c) * xs[c];
        out[r] += acc;
      }
    }
    if (leader_gain) {
      const Matrix& g = *leader_gain;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) out[r] += g(r, c) * a.leader[c];
    }
  };
  term.jacobian = [gains](const TermArgs&) { return gains; };
  return term;
}

struct DelayChannel {
  std::size_t receiver = 0;
  std::optional<std::size_t> sender;  // empty: leader link
  std::function<double(double)> tau;
};

struct DelaySchedule {
  std::vector<DelayChannel> channels;
  double tau_max = 0.0;

  std::size_t count() const noexcept { return channels.size(); }

  /// tau_k(t), checked against [0, tau_max]. Isolated zeros are admitted.
  double delay(std::size_t k, double t) const {
    const double tau = channels.at(k).tau(t);
    if (!(tau >= 0.0) || tau > tau_max * (1.0 + 1e-12) + 1e-15) {
      throw ScheduleError("delay channel " + std::to_string(k) + " returned tau=" + std::to_string(tau) +
                          " at t=" + std::to_string(t) + " outside [0, tau_max=" + std::to_string(tau_max) + "]");
    }
    return tau;
  }
};

struct DisturbanceModel {
  // poly[i][k]: coefficient vector of t^k for agent i, k < m. An empty outer
  // vector means no polynomial part for any agent.
  std::vector<std::vector<Vector>> poly;
  // Residual w_i(t); empty entries (or an empty vector) mean zero.
  std::vector<std::function<void(double t, std::span<double> out)>> residual;
  // Declared bound on sup_t ||w_i(t)||_1 (which dominates every local p-norm).
  Vector residual_bound;

  double residual_bound_for(std::size_t i) const {
    return i < residual_bound.size() ? residual_bound[i] : 0.0;
  }

  void add_polynomial(std::size_t i, double t, std::span<double> out) const {
    if (i >= poly.size()) return;
    double tk = 1.0;
    for (const Vector& c : poly[i]) {
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += c[d] * tk;
      tk *= t;
    }
  }

  void add_residual(std::size_t i, double t, std::span<double> out) const {
    if (i < residual.size() && residual[i]) {
      Vector w(out.size(), 0.0);
      residual[i](t, w);
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += w[d];
    }
  }

  void add_total(std::size_t i, double t, std::span<double> out) const {
    add_polynomial(i, t, out);
    add_residual(i, t, out);
  }
};

struct MultiplexNetwork {
  std::size_t state_dim = 1;        // n
  std::size_t integral_layers = 0;  // m
  std::vector<AgentDynamics> agents;
  std::vector<CouplingTerm> terms;
  DelaySchedule delays;
  DisturbanceModel disturbance;
  // Exogenous reference x_l(t); required when a term reads the leader.
  std::function<Vector(double t)> leader;
  // Desired solution x*_i(t); empty means x* = 0.
  std::function<Vector(std::size_t i, double t)> desired;
  // physical input = input_scale[i] * model input (reporting only; empty = 1).
  Vector input_scale;

  std::size_t size() const noexcept { return agents.size(); }
  std::size_t augmented_dim() const noexcept { return (integral_layers + 1) * state_dim; }
  std::size_t output_dim(std::size_t i) const {
    return agents[i].output_dim ? agents[i].output_dim : state_dim;
  }
  double input_scale_for(std::size_t i) const { return i < input_scale.size() ? input_scale[i] : 1.0; }

  Vector desired_state(std::size_t i, double t) const {
    if (!desired) return Vector(state_dim, 0.0);
    Vector v = desired(i, t);
    if (v.size() != state_dim) throw ModelError("desired solution has wrong dimension");
    return v;
  }

  void output(std::size_t i, std::span<const double> x, std::span<double> y) const {
    if (agents[i].output) {
      agents[i].output(x, y);
    } else {
      std::copy(x.begin(), x.end(), y.begin());
    }
  }

  double max_output_lipschitz() const {
    double best = 0.0;
    for (const auto& a : agents) best = std::max(best, a.output_lipschitz);
    return best;
  }

  void validate() const {
    if (agents.empty()) throw ModelError("network has no agents");
    if (state_dim == 0) throw ModelError("state dimension must be >= 1");
    const std::size_t n_agents = agents.size();
    for (std::size_t i = 0; i < n_agents; ++i) {
      const auto& a = agents[i];
      if (a.field && !a.jacobian) {
        throw ModelError("agent " + std::to_string(i) + ": field without Jacobian");
      }
      if (a.output_lipschitz < 0.0) throw ModelError("output Lipschitz constant must be >= 0");
      if (a.output && a.output_dim == 0) throw ModelError("custom output map needs output_dim");
    }
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const auto& term = terms[t];
      const std::string who = "coupling term " + std::to_string(t);
      if (term.agent >= n_agents) throw ModelError(who + ": receiver out of range");
      if (term.layer > integral_layers) throw ModelError(who + ": layer exceeds integral layer count");
      if (!term.accumulate) throw ModelError(who + ": missing evaluation function");
      if (!term.jacobian) throw ModelError(who + ": missing Jacobian supplier");
      for (std::size_t s : term.sources)
        if (s >= n_agents) throw ModelError(who + ": source out of range");
      if (term.reads_leader && !leader) throw ModelError(who + ": reads the leader but none is set");
      if (term.channel) {
        if (*term.channel >= delays.count()) throw ModelError(who + ": delay channel out of range");
        if (delays.channels[*term.channel].receiver != term.agent) {
          throw ModelError(who + ": delay channel belongs to another receiver");
        }
      }
    }
    for (std::size_t k = 0; k < delays.count(); ++k) {
      const auto& ch = delays.channels[k];
      if (!ch.tau) throw ModelError("delay channel " + std::to_string(k) + " has no schedule");
      if (ch.receiver >= n_agents || (ch.sender && *ch.sender >= n_agents)) {
        throw ModelError("delay channel " + std::to_string(k) + ": agent out of range");
      }
    }
    if (delays.count() > 0 && !(delays.tau_max > 0.0)) throw ModelError("tau_max must be > 0");
    if (delays.count() > n_agents * n_agents) {
      throw ModelError("more delay channels than ordered agent pairs");
    }
    const auto& d = disturbance;
    if (!d.poly.empty()) {
      if (d.poly.size() != n_agents) throw ModelError("disturbance: one polynomial per agent required");
      for (const auto& pi : d.poly) {
        if (pi.size() > integral_layers) {
          throw ModelError("disturbance polynomial order exceeds the number of integral layers");
        }
        for (const auto& c : pi)
          if (c.size() != state_dim) throw ModelError("disturbance coefficient has wrong dimension");
      }
    }
    if (!d.residual.empty() && d.residual.size() != n_agents) {
      throw ModelError("disturbance: one residual per agent required");
    }
  }
};

// ---------------------------------------------------------------------------
// Control evaluation

/// x_agent(time) for time <= current time, written to `out`.
using HistoryFn = std::function<void(std::size_t agent, double time, std::span<double> out)>;

/// Evaluates u and the layer derivatives r'. Precomputes, per delayed term,
/// which (channel, source) lookup slot feeds each argument so each delayed
/// state is fetched once per call. Not thread-safe (owns scratch buffers).
class ControlEvaluator {
 public:
  explicit ControlEvaluator(const MultiplexNetwork& net) : net_(&net) {
    net.validate();
    const std::size_t n = net.state_dim;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> slot_of;
    constexpr std::size_t kLeader = static_cast<std::size_t>(-1);
    plans_.resize(net.terms.size());
    std::size_t max_sources = 0;
    for (std::size_t t = 0; t < net.terms.size(); ++t) {
      const auto& term = net.terms[t];
      auto& plan = plans_[t];
      max_sources = std::max(max_sources, term.sources.size());
      if (!term.delayed()) continue;
      auto slot_for = [&](std::size_t source) {
        auto key = std::make_pair(*term.channel, source);
        auto it = slot_of.find(key);
        if (it != slot_of.end()) return it->second;
        const std::size_t id = slots_.size();
        slots_.push_back({*term.channel, source});
        slot_of.emplace(key, id);
        return id;
      };
      for (std::size_t s : term.sources) plan.source_slots.push_back(slot_for(s));
      if (term.reads_leader) plan.leader_slot = slot_for(kLeader);
    }
    slot_offsets_.reserve(slots_.size() + 1);
    slot_offsets_.push_back(0);
    for (const auto& s : slots_) {
      const std::size_t width = s.source == kLeader ? leader_dim() : n;
      slot_offsets_.push_back(slot_offsets_.back() + width);
    }
    slot_values_.assign(slot_offsets_.back(), 0.0);
    source_spans_.resize(max_sources);
  }

  void evaluate(std::span<const double> x, std::span<const double> r, const HistoryFn& history, double t,
                std::span<double> u, std::span<double> rdot) {
    const auto& net = *net_;
    const std::size_t n = net.state_dim;
    const std::size_t N = net.size();
    const std::size_t m = net.integral_layers;
    if (x.size() != N * n || r.size() != m * N * n || u.size() != N * n || rdot.size() != m * N * n) {
      throw DimensionError("ControlEvaluator: state/output sizes do not match the network");
    }
    std::fill(u.begin(), u.end(), 0.0);
    std::fill(rdot.begin(), rdot.end(), 0.0);

    Vector leader_now;
    if (net.leader) leader_now = net.leader(t);

    constexpr std::size_t kLeader = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      const auto& s = slots_[k];
      const double when = t - net.delays.delay(s.channel, t);
      std::span<double> out(slot_values_.data() + slot_offsets_[k], slot_offsets_[k + 1] - slot_offsets_[k]);
      if (s.source == kLeader) {
        const Vector l = net.leader(when);
        std::copy(l.begin(), l.end(), out.begin());
      } else {
        if (!history) throw HistoryUnderflowError("delayed term evaluated without history");
        history(s.source, when, out);
      }
    }

    for (std::size_t ti = 0; ti < net.terms.size(); ++ti) {
      const auto& term = net.terms[ti];
      const auto& plan = plans_[ti];
      for (std::size_t s = 0; s < term.sources.size(); ++s) {
        if (term.delayed()) {
          const std::size_t k = plan.source_slots[s];
          source_spans_[s] = std::span<const double>(slot_values_.data() + slot_offsets_[k], n);
        } else {
          source_spans_[s] = x.subspan(term.sources[s] * n, n);
        }
      }
      std::span<const double> leader;
      if (term.reads_leader) {
        if (term.delayed()) {
          const std::size_t k = *plan.leader_slot;
          leader = std::span<const double>(slot_values_.data() + slot_offsets_[k],
                                           slot_offsets_[k + 1] - slot_offsets_[k]);
        } else {
          leader = leader_now;
        }
      }
      TermArgs args{std::span<const std::span<const double>>(source_spans_.data(), term.sources.size()), leader, t};
      std::span<double> target = term.layer == 0 ? u.subspan(term.agent * n, n)
                                                 : rdot.subspan(((term.layer - 1) * N + term.agent) * n, n);
      term.accumulate(args, target);
    }

    if (m > 0) {
      for (std::size_t idx = 0; idx < N * n; ++idx) u[idx] += r[idx];
      for (std::size_t k = 0; k + 1 < m; ++k)
        for (std::size_t idx = 0; idx < N * n; ++idx) rdot[k * N * n + idx] += r[(k + 1) * N * n + idx];
    }
  }

 private:
  struct Slot {
    std::size_t channel;
    std::size_t source;
  };
  struct Plan {
    std::vector<std::size_t> source_slots;
    std::optional<std::size_t> leader_slot;
  };

  std::size_t leader_dim() const { return net_->leader ? net_->leader(0.0).size() : 0; }

  const MultiplexNetwork* net_;
  std::vector<Slot> slots_;
  std::vector<std::size_t> slot_offsets_;
  Vector slot_values_;
  std::vector<Plan> plans_;
  std::vector<std::span<const double>> source_spans_;
};

struct ControlOutput {
  Vector u;     // N * n
  Vector rdot;  // m * N * n
};

/// u_i(t) and r'_{i,k}(t) given current states and a history of x.
inline ControlOutput control_input(const MultiplexNetwork& net, std::span<const double> x,
                                   std::span<const double> r, const HistoryFn& history, double t) {
  ControlEvaluator eval(net);
  ControlOutput out{Vector(net.size() * net.state_dim), Vector(net.integral_layers * net.size() * net.state_dim)};
  eval.evaluate(x, r, history, t, out.u, out.rdot);
  return out;
}

// ---------------------------------------------------------------------------
// zeta coordinates

/// sum_{b=0}^{m-k} ((m-1-b)! / (m-k-b)!) dbar_{m-1-b} t^{m-k-b}, for 1 <= k <= m.
/// zeta_{i,k} = r_{i,k} + zeta_offset(m, k, dbar_i, t).
inline Vector zeta_offset(std::size_t m, std::size_t k, std::span<const Vector> dbar, double t,
                          std::size_t dim = 0) {
  if (k < 1 || k > m) throw DomainError("zeta_offset: layer index must lie in [1, m]");
  if (dbar.size() > m) throw DimensionError("zeta_offset: more coefficients than layers");
  if (dim == 0) dim = dbar.empty() ? 1 : dbar.front().size();
  Vector out(dim, 0.0);
  for (std::size_t b = 0; b <= m - k; ++b) {
    const std::size_t coeff = m - 1 - b;
    if (coeff >= dbar.size()) continue;  // missing high-order coefficients are zero
    const std::size_t power = m - k - b;
    double ratio = 1.0;  // (m-1-b)! / (m-k-b)!
    for (std::size_t f = power + 1; f <= m - 1 - b; ++f) ratio *= static_cast<double>(f);
    const double scale = ratio * std::pow(t, static_cast<double>(power));
    for (std::size_t d = 0; d < dim; ++d) out[d] += scale * dbar[coeff][d];
  }
  return out;
}

struct ZetaCheck {
  bool passed = false;
  double symbolic_error = 0.0;  // max |d/dt offset_k - offset_{k+1}| on coefficients
  double numeric_error = 0.0;   // max central-difference mismatch (relative)
};

/// Verifies d/dt offset_k = offset_{k+1} (k < m) and d/dt offset_m = 0, both on
/// the polynomial coefficients and by central differences.
inline ZetaCheck zeta_derivative_check(std::size_t m, std::span<const Vector> dbar) {
  ZetaCheck result;
  if (m == 0) {
    result.passed = true;
    return result;
  }
  const std::size_t dim = dbar.empty() ? 1 : dbar.front().size();

  // Coefficients of offset_k by power of t: coeffs[k][power][d].
  std::vector<std::vector<Vector>> coeffs(m + 2);
  for (std::size_t k = 1; k <= m; ++k) {
    coeffs[k].assign(m + 1, Vector(dim, 0.0));
    for (std::size_t b = 0; b <= m - k; ++b) {
      const std::size_t c = m - 1 - b;
      if (c >= dbar.size()) continue;
      const std::size_t power = m - k - b;
      double ratio = 1.0;
      for (std::size_t f = power + 1; f <= m - 1 - b; ++f) ratio *= static_cast<double>(f);
      for (std::size_t d = 0; d < dim; ++d) coeffs[k][power][d] += ratio * dbar[c][d];
    }
  }
  coeffs[m + 1].assign(m + 1, Vector(dim, 0.0));
  for (std::size_t k = 1; k <= m; ++k) {
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double deriv = static_cast<double>(p + 1) * coeffs[k][p + 1][d];
        result.symbolic_error = std::max(result.symbolic_error, std::abs(deriv - coeffs[k + 1][p][d]));
      }
    }
  }

  const double h = 1e-5;
  for (double t : {-1.3, 0.0, 0.4, 2.1}) {
    for (std::size_t k = 1; k <= m; ++k) {
      const Vector plus = zeta_offset(m, k, dbar, t + h, dim);
      const Vector minus = zeta_offset(m, k, dbar, t - h, dim);
      const Vector next = k < m ? zeta_offset(m, k + 1, dbar, t, dim) : Vector(dim, 0.0);
      for (std::size_t d = 0; d < dim; ++d) {
        const double fd = (plus[d] - minus[d]) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(plus[d]), std::abs(minus[d]), std::abs(next[d])});
        result.numeric_error = std::max(result.numeric_error, std::abs(fd - next[d]) / scale);
      }
    }
  }
  result.passed = result.symbolic_error == 0.0 && result.numeric_error <= 1e-8;
  return result;
}

// ---------------------------------------------------------------------------
// Jacobian blocks of the augmented error dynamics

struct SamplePoint {
  Vector x;       // N * n; empty means the desired solution at t
  Vector leader;  // empty means leader(t)
  double t = 0.0;
};

struct BlockEntry {
  std::size_t row = 0;  // receiver i
  std::size_t col = 0;  // source j
  Matrix block;
};

struct JacobianBlocks {
  std::vector<Matrix> diagonal;                   // A~_ii, (m+1)n square
  std::vector<BlockEntry> off_diagonal;           // A~_ij, i != j
  std::vector<std::vector<BlockEntry>> delayed;   // per channel k: (B~_k)_ij, including i == j
};

namespace detail {

inline Vector sample_state(const MultiplexNetwork& net, const SamplePoint& p) {
  const std::size_t N = net.size();
  const std::size_t n = net.state_dim;
  if (!p.x.empty()) {
    if (p.x.size() != N * n) throw DimensionError("sample point has wrong state dimension");
    return p.x;
  }
  Vector x(N * n);
  for (std::size_t i = 0; i < N; ++i) {
    const Vector xi = net.desired_state(i, p.t);
    std::copy(xi.begin(), xi.end(), x.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return x;
}

inline Vector sample_leader(const MultiplexNetwork& net, const SamplePoint& p) {
  if (!p.leader.empty()) return p.leader;
  return net.leader ? net.leader(p.t) : Vector{};
}

inline std::vector<BlockEntry> flatten(std::map<std::pair<std::size_t, std::size_t>, Matrix>&& m) {
  std::vector<BlockEntry> out;
  out.reserve(m.size());
  for (auto& [key, block] : m) out.push_back({key.first, key.second, std::move(block)});
  return out;
}

}  // namespace detail

/// Assembles A~_ii, A~_ij and (B~_k)_ij at one sample point. Delayed terms
/// are linearized at the sample state as well (their arguments coincide with
/// the current state along the desired solution).
inline JacobianBlocks assemble_jacobian_blocks(const MultiplexNetwork& net, const SamplePoint& p) {
  net.validate();
  const std::size_t N = net.size();
  const std::size_t n = net.state_dim;
  const std::size_t m = net.integral_layers;
  const std::size_t dim = net.augmented_dim();
  const Vector x = detail::sample_state(net, p);
  const Vector leader = detail::sample_leader(net, p);

  JacobianBlocks out;
  out.diagonal.assign(N, Matrix(dim, dim));
  for (std::size_t i = 0; i < N; ++i) {
    Matrix& a = out.diagonal[i];
    const auto& agent = net.agents[i];
    if (agent.field) {
      const Matrix jf = agent.jacobian(std::span<const double>(x).subspan(i * n, n), p.t);
      if (jf.rows() != n || jf.cols() != n) throw ModelError("agent Jacobian has wrong shape");
      a.add_block(0, 0, jf);
    }
    for (std::size_t k = 0; k < m; ++k) a.add_block(k * n, (k + 1) * n, Matrix::identity(n));
  }

  std::map<std::pair<std::size_t, std::size_t>, Matrix> off;
  std::vector<std::map<std::pair<std::size_t, std::size_t>, Matrix>> delayed(net.delays.count());
  std::vector<std::span<const double>> spans;
  for (const auto& term : net.terms) {
    spans.clear();
    for (std::size_t s : term.sources) spans.push_back(std::span<const double>(x).subspan(s * n, n));
    TermArgs args{spans, leader, p.t};
    const std::vector<Matrix> jac = term.jacobian(args);
    if (jac.size() != term.sources.size()) throw ModelError("Jacobian supplier returned wrong block count");
    for (std::size_t s = 0; s < term.sources.size(); ++s) {
      const Matrix& js = jac[s];
      if (js.rows() != n || js.cols() != n) throw ModelError("coupling Jacobian block has wrong shape");
      const std::size_t j = term.sources[s];
      Matrix contribution(dim, dim);
      contribution.set_block(term.layer * n, 0, js);
      if (term.delayed()) {
        auto& target = delayed[*term.channel];
        auto [it, inserted] = target.try_emplace({term.agent, j}, contribution);
        if (!inserted) it->second += contribution;
      } else if (j == term.agent) {
        out.diagonal[term.agent] += contribution;
      } else {
        auto [it, inserted] = off.try_emplace({term.agent, j}, contribution);
        if (!inserted) it->second += contribution;
      }
    }
  }
  out.off_diagonal = detail::flatten(std::move(off));
  out.delayed.reserve(delayed.size());
  for (auto& d : delayed) out.delayed.push_back(detail::flatten(std::move(d)));
  return out;
}

// ---------------------------------------------------------------------------
// Model checks

struct C1Report {
  double max_residual = 0.0;
  bool passed = false;
  std::size_t worst_agent = 0;
  std::size_t worst_layer = 0;
};

/// max over sample times of ||h_{i,k}(x*)||_inf and ||h^tau_{i,k}(x*)||_inf, all
/// arguments at the desired solution. Passes iff <= 1e-10.
inline C1Report verify_c1(const MultiplexNetwork& net, std::span<const double> times) {
  net.validate();
  const std::size_t n = net.state_dim;
  C1Report rep;
  std::vector<std::span<const double>> spans;
  for (double t : times) {
    const Vector x = detail::sample_state(net, SamplePoint{{}, {}, t});
    const Vector leader = net.leader ? net.leader(t) : Vector{};
    for (const auto& term : net.terms) {
      spans.clear();
      for (std::size_t s : term.sources) spans.push_back(std::span<const double>(x).subspan(s * n, n));
      Vector h(n, 0.0);
      term.accumulate(TermArgs{spans, leader, t}, h);
      const double r = vector_norm(h, NormKind::Inf);
      if (r > rep.max_residual) {
        rep.max_residual = r;
        rep.worst_agent = term.agent;
        rep.worst_layer = term.layer;
      }
    }
  }
  rep.passed = rep.max_residual <= 1e-10;
  return rep;
}

struct JacobianCheck {
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares every supplied Jacobian (agent fields and coupling terms) with
/// central finite differences at the given sample points.
inline JacobianCheck check_jacobians(const MultiplexNetwork& net, std::span<const SamplePoint> samples,
                                     double rel_tol = 1e-5, double h = 1e-6) {
  net.validate();
  const std::size_t n = net.state_dim;
  JacobianCheck out;
  auto record = [&](double analytic, double numeric) {
    const double scale = std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
    out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic - numeric) / scale);
  };
  for (const auto& p : samples) {
    const Vector x = detail::sample_state(net, p);
    const Vector leader = detail::sample_leader(net, p);
    for (std::size_t i = 0; i < net.size(); ++i) {
      const auto& agent = net.agents[i];
      if (!agent.field) continue;
      Vector xi(x.begin() + static_cast<std::ptrdiff_t>(i * n), x.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      const Matrix jac = agent.jacobian(xi, p.t);
      for (std::size_t c = 0; c < n; ++c) {
        Vector xp = xi, xm = xi, fp(n), fm(n);
        xp[c] += h;
        xm[c] -= h;
        agent.field(xp, p.t, fp);
        agent.field(xm, p.t, fm);
        for (std::size_t r = 0; r < n; ++r) record(jac(r, c), (fp[r] - fm[r]) / (2.0 * h));
      }
    }
    for (const auto& term : net.terms) {
      std::vector<Vector> src;
      for (std::size_t s : term.sources)
        src.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(s * n), x.begin() + static_cast<std::ptrdiff_t>((s + 1) * n));
      auto eval = [&](const std::vector<Vector>& args) {
        std::vector<std::span<const double>> spans(args.begin(), args.end());
        Vector out(n, 0.0);
        term.accumulate(TermArgs{spans, leader, p.t}, out);
        return out;
      };
      std::vector<std::span<const double>> spans(src.begin(), src.end());
      const auto jac = term.jacobian(TermArgs{spans, leader, p.t});
      for (std::size_t s = 0; s < src.size(); ++s) {
        for (std::size_t c = 0; c < n; ++c) {
          auto plus = src, minus = src;
          plus[s][c] += h;
          minus[s][c] -= h;
          const Vector fp = eval(plus), fm = eval(minus);
          for (std::size_t r = 0; r < n; ++r) record(jac[s](r, c), (fp[r] - fm[r]) / (2.0 * h));
        }
      }
    }
  }
  out.passed = out.max_relative_error <= rel_tol;
  return out;
}

/// max_i ||d/dt x*_i - f_i(x*_i, t)||_inf over the sample times (central differences).
inline double desired_solution_defect(const MultiplexNetwork& net, std::span<const double> times, double h = 1e-6) {
  const std::size_t n = net.state_dim;
  double worst = 0.0;
  for (double t : times) {
    for (std::size_t i = 0; i < net.size(); ++i) {
      const Vector xp = net.desired_state(i, t + h), xm = net.desired_state(i, t - h);
      const Vector x = net.desired_state(i, t);
      Vector f(n, 0.0);
      if (net.agents[i].field) net.agents[i].field(x, t, f);
      for (std::size_t d = 0; d < n; ++d) worst = std::max(worst, std::abs((xp[d] - xm[d]) / (2.0 * h) - f[d]));
    }
  }
  return worst;
}

}  // namespace mplex
