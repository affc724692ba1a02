#pragma once

// Contraction certificate for the augmented error dynamics: row conditions
// on the transformed Jacobian blocks (delay-free and delayed), the resulting
// margins sigma_bar / sigma_under, the Halanay rate and the ISS envelope.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mplex/errors.hpp"
#include "mplex/halanay.hpp"
#include "mplex/linalg.hpp"
#include "mplex/netmodel.hpp"
#include "mplex/parallel.hpp"

namespace mplex {

/// Block-diagonal coordinate change T = diag(T_1, ..., T_N).
class Transformation {
 public:
  static constexpr double kMaxCondition = 1e12;

  Transformation() = default;

  explicit Transformation(std::vector<Matrix> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw TransformError("transformation has no blocks");
    inverses_.reserve(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Matrix& t = blocks_[i];
      if (!t.is_square()) throw TransformError("T_" + std::to_string(i) + " is not square");
      if (!t.all_finite()) throw TransformError("T_" + std::to_string(i) + " has non-finite entries");
      Matrix inv;
      try {
        inv = inverse(t);
      } catch (const DomainError&) {
        throw TransformError("T_" + std::to_string(i) + " is singular");
      }
      const double cond = induced_norm(t, NormKind::Two) * induced_norm(inv, NormKind::Two);
      if (!std::isfinite(cond) || cond > kMaxCondition) {
        throw TransformError("T_" + std::to_string(i) + " is ill-conditioned (cond_2 = " + std::to_string(cond) + ")");
      }
      inverses_.push_back(std::move(inv));
    }
  }

  static Transformation identity(std::size_t agents, std::size_t dim) {
    return uniform(agents, Matrix::identity(dim));
  }

  static Transformation uniform(std::size_t agents, const Matrix& block) {
    return Transformation(std::vector<Matrix>(agents, block));
  }

  std::size_t size() const noexcept { return blocks_.size(); }
  const Matrix& block(std::size_t i) const { return blocks_.at(i); }
  const Matrix& inverse_block(std::size_t i) const { return inverses_.at(i); }
  const std::vector<Matrix>& blocks() const noexcept { return blocks_; }

  /// ||T||_cmpst ||T^-1||_cmpst. For block-diagonal T the weights cancel and
  /// each factor reduces to the largest local induced norm.
  double condition(NormKind p) const {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      a = std::max(a, induced_norm(blocks_[i], p));
      b = std::max(b, induced_norm(inverses_[i], p));
    }
    return a * b;
  }

  void require_conformal(std::size_t agents, std::size_t dim) const {
    if (blocks_.size() != agents) {
      throw DimensionError("transformation has " + std::to_string(blocks_.size()) + " blocks, network has " +
                           std::to_string(agents) + " agents");
    }
    for (const auto& t : blocks_)
      if (t.rows() != dim) throw DimensionError("transformation block size does not match the augmented state");
  }

 private:
  std::vector<Matrix> blocks_;
  std::vector<Matrix> inverses_;
};

struct RowReport {
  Vector rows;  // per agent, worst over samples
  double max = -std::numeric_limits<double>::infinity();
  std::size_t argmax = 0;

  void finalize() {
    max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i] > max) {
        max = rows[i];
        argmax = i;
      }
  }

  void merge(const RowReport& other) {
    if (rows.empty()) {
      *this = other;
      return;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = std::max(rows[i], other.rows[i]);
    finalize();
  }
};

namespace detail {

inline Matrix similarity(const Transformation& t, std::size_t i, const Matrix& a, std::size_t j) {
  return t.block(i) * a * t.inverse_block(j);
}

inline void check_spec(const Transformation& t, const NormSpec& spec, std::size_t agents, std::size_t dim) {
  t.require_conformal(agents, dim);
  spec.validate(agents);
}

}  // namespace detail

/// Row i: mu_p(T_i A_ii T_i^-1) + sum_{j != i} (eta_j/eta_i) ||T_i A_ij T_j^-1||_p.
inline RowReport check_c2(const JacobianBlocks& blocks, const Transformation& t, const NormSpec& spec) {
  const std::size_t N = blocks.diagonal.size();
  if (N == 0) throw DimensionError("check_c2: no agents");
  detail::check_spec(t, spec, N, blocks.diagonal.front().rows());
  RowReport rep;
  rep.rows.resize(N);
  for (std::size_t i = 0; i < N; ++i)
    rep.rows[i] = matrix_measure(detail::similarity(t, i, blocks.diagonal[i], i), spec.local_p);
  for (const auto& e : blocks.off_diagonal)
    rep.rows[e.row] += spec.eta[e.col] / spec.eta[e.row] *
                       induced_norm(detail::similarity(t, e.row, e.block, e.col), spec.local_p);
  rep.finalize();
  return rep;
}

/// Row i: sum_k sum_j (eta_j/eta_i) ||T_i (B_k)_ij T_j^-1||_p over the delays present.
inline RowReport check_c3(const JacobianBlocks& blocks, const Transformation& t, const NormSpec& spec) {
  const std::size_t N = blocks.diagonal.size();
  if (N == 0) throw DimensionError("check_c3: no agents");
  detail::check_spec(t, spec, N, blocks.diagonal.front().rows());
  RowReport rep;
  rep.rows.assign(N, 0.0);
  for (const auto& channel : blocks.delayed)
    for (const auto& e : channel)
      rep.rows[e.row] += spec.eta[e.col] / spec.eta[e.row] *
                         induced_norm(detail::similarity(t, e.row, e.block, e.col), spec.local_p);
  rep.finalize();
  return rep;
}

struct Certificate {
  double sigma_bar = 0.0;
  double sigma_under = 0.0;
  double lambda = 0.0;
  bool feasible = false;
  std::string reason;  // empty when feasible
  RowReport c2;
  RowReport c3;
  C1Report c1;
  NormSpec norm_spec;
  Transformation transform;
  double cond_T = 1.0;
  double tau_max = 0.0;
  double output_lipschitz = 1.0;
  std::size_t samples = 0;
  std::size_t delay_count = 0;

  double margin() const noexcept { return sigma_bar - sigma_under; }
};

/// Evaluates C1 (at the sample times), then C2/C3 over every sample point and
/// takes the worst row per agent. Infeasibility is reported in the result.
inline Certificate certify(const MultiplexNetwork& net, const Transformation& t, const NormSpec& spec,
                           std::span<const SamplePoint> samples) {
  net.validate();
  if (samples.empty()) throw ConfigError("certify: at least one sample point is required");
  detail::check_spec(t, spec, net.size(), net.augmented_dim());

  Certificate cert;
  cert.norm_spec = spec;
  cert.transform = t;
  cert.cond_T = t.condition(spec.local_p);
  cert.tau_max = net.delays.tau_max;
  cert.output_lipschitz = net.max_output_lipschitz();
  cert.samples = samples.size();
  cert.delay_count = net.delays.count();

  std::vector<double> times;
  times.reserve(samples.size());
  for (const auto& s : samples) times.push_back(s.t);
  cert.c1 = verify_c1(net, times);

  std::vector<RowReport> c2(samples.size()), c3(samples.size());
  detail::parallel_for(samples.size(), [&](std::size_t k) {
    const JacobianBlocks blocks = assemble_jacobian_blocks(net, samples[k]);
    c2[k] = check_c2(blocks, t, spec);
    c3[k] = check_c3(blocks, t, spec);
  });
  for (std::size_t k = 0; k < samples.size(); ++k) {
    cert.c2.merge(c2[k]);
    cert.c3.merge(c3[k]);
  }

  cert.sigma_bar = -cert.c2.max;
  cert.sigma_under = std::max(0.0, cert.c3.max);
  if (!cert.c1.passed) {
    cert.reason = "C1 violated: coupling residual " + std::to_string(cert.c1.max_residual) + " at agent " +
                  std::to_string(cert.c1.worst_agent) + ", layer " + std::to_string(cert.c1.worst_layer);
  } else if (!(cert.sigma_bar > 0.0)) {
    cert.reason = "C2 violated: worst row " + std::to_string(cert.c2.max) + " at agent " +
                  std::to_string(cert.c2.argmax) + " is not negative";
  } else if (!(cert.sigma_bar > cert.sigma_under)) {
    cert.reason = "C3 violated: delayed row sum " + std::to_string(cert.sigma_under) + " at agent " +
                  std::to_string(cert.c3.argmax) + " is not below sigma_bar " + std::to_string(cert.sigma_bar);
  }
  cert.feasible = cert.reason.empty();
  if (cert.feasible) cert.lambda = halanay::solve_rate({cert.sigma_bar, cert.sigma_under, cert.tau_max});
  return cert;
}

inline Certificate certify(const MultiplexNetwork& net, const Transformation& t, const NormSpec& spec,
                           const std::vector<SamplePoint>& samples) {
  return certify(net, t, spec, std::span<const SamplePoint>(samples));
}

/// Sups over the initial history window [t0 - tau_max, t0], composite norms.
struct HistorySups {
  double state = 0.0;  // sup ||x - x*||_cmpst
  Vector zeta;         // per layer k = 1..m: sup ||zeta_k||_cmpst
  double w = 0.0;      // sup_t ||w(t)||_cmpst over the horizon

  double zeta_total() const {
    double s = 0.0;
    for (double z : zeta) s += z;
    return s;
  }
};

/// t -> L_g cond_T (e^{-lambda (t - t0)} (state + sum_k zeta_k) + w / (sigma_bar - sigma_under)).
class IssEnvelope {
 public:
  IssEnvelope(const Certificate& cert, HistorySups sups, double t0) : sups_(std::move(sups)), t0_(t0) {
    if (!cert.feasible) throw EnvelopeError("ISS envelope requested from an infeasible certificate");
    if (sups_.state < 0.0 || sups_.w < 0.0) throw DomainError("ISS envelope: sup terms must be >= 0");
    for (double z : sups_.zeta)
      if (z < 0.0) throw DomainError("ISS envelope: sup terms must be >= 0");
    gain_ = cert.output_lipschitz * cert.cond_T;
    lambda_ = cert.lambda;
    offset_ = sups_.w / cert.margin();
  }

  double operator()(double t) const {
    const double elapsed = std::max(0.0, t - t0_);
    return gain_ * (std::exp(-lambda_ * elapsed) * (sups_.state + sups_.zeta_total()) + offset_);
  }

  /// Asymptotic level L_g cond_T w / (sigma_bar - sigma_under).
  double floor() const { return gain_ * offset_; }
  const HistorySups& sups() const noexcept { return sups_; }

 private:
  HistorySups sups_;
  double t0_ = 0.0;
  double gain_ = 1.0;
  double lambda_ = 0.0;
  double offset_ = 0.0;
};

inline IssEnvelope iss_envelope(const Certificate& cert, HistorySups sups, double t0 = 0.0) {
  return IssEnvelope(cert, std::move(sups), t0);
}

/// sup_t ||w(t)||_cmpst bounded by the declared per-agent l1 bounds.
inline double declared_w_sup(const MultiplexNetwork& net, const NormSpec& spec) {
  spec.validate(net.size());
  double best = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i)
    best = std::max(best, net.disturbance.residual_bound_for(i) / spec.eta[i]);
  return best;
}

}  // namespace mplex
