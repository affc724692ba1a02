#pragma once

// Gain design for the MTDC-form controller. For fixed (alpha, beta) and eta
// the tightest auxiliaries b1..b5 of the LMI constraints are computed
// directly:
//
//   b1 = -mu_2(T A_ii T^-1)                  (so [T A_ii T^-1]_s <= -b1 I)
//   b3 = max (eta_j/eta_i) ||T A_ij T^-1||_2 (equivalently [[b3 I, M'], [M, b3 I]] >= 0)
//   b4 = ||T B_ii T^-1||_2,  b5 = max (eta_j/eta_i) ||T B_ij T^-1||_2
//   b2 = degree * b3,  sigma_bar = b1 - b2,  sigma_under = q (b4 + b5)
//
// and the delayed-gain sum is maximized by coordinate search over the
// delay-free gains with bisection on a common delayed-gain scale.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mplex/certify.hpp"
#include "mplex/errors.hpp"
#include "mplex/linalg.hpp"
#include "mplex/mtdc_network.hpp"
#include "mplex/parallel.hpp"

namespace mplex::synthesis {

using mtdc::GainVector;
using mtdc::TransformParams;

struct PlantParams {
  std::size_t terminals = 30;
  double capacitance = 1.0;  // design capacitance
  double resistance = 20.0;
  std::size_t degree = 2;  // neighbours per terminal (ring)

  void validate() const {
    if (terminals < 3) throw ConfigError("plant needs at least 3 terminals");
    if (!(capacitance > 0.0) || !(resistance > 0.0)) throw ConfigError("capacitance and resistance must be > 0");
    if (degree == 0) throw ConfigError("plant degree must be >= 1");
  }
};

/// The four distinct 3x3 Jacobian blocks of the ring (constant in t and x).
struct PlantBlocks {
  Matrix a_ii;  // delay-free diagonal block
  Matrix a_ij;  // delay-free neighbour block (line current)
  Matrix b_ii;  // delayed self block, per channel
  Matrix b_ij;  // delayed neighbour block, per channel
};

inline PlantBlocks plant_blocks(const GainVector& g, const PlantParams& p) {
  const double c = p.capacitance;
  const double line = 1.0 / (c * p.resistance);
  const double deg = static_cast<double>(p.degree);
  PlantBlocks b;
  b.a_ii = Matrix{{-(deg * line + g.k0 / c), 1.0, 0.0}, {-g.k1 / c, 0.0, 1.0}, {-g.k2 / c, 0.0, 0.0}};
  b.a_ij = Matrix{{line, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  b.b_ii = Matrix{{-g.k0t / c, 0.0, 0.0}, {-g.k1t / c, 0.0, 0.0}, {-g.k2t / c, 0.0, 0.0}};
  b.b_ij = Matrix{{g.k0t / c, 0.0, 0.0}, {g.k1t / c, 0.0, 0.0}, {g.k2t / c, 0.0, 0.0}};
  return b;
}

/// Largest eta_j / eta_i over directed ring edges.
inline double ring_eta_ratio(const Vector& eta) {
  const std::size_t N = eta.size();
  if (N < 3) throw DimensionError("eta must have one weight per terminal");
  mplex::detail::require_positive_weights(eta);
  double r = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    r = std::max(r, eta[(i + N - 1) % N] / eta[i]);
    r = std::max(r, eta[(i + 1) % N] / eta[i]);
  }
  return r;
}

struct Auxiliaries {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 0.0, b5 = 0.0;
  double sigma_bar = 0.0;
  double sigma_under = 0.0;
};

struct LmiSystem {
  // Must be PSD: -[T A_ii T^-1]_s - b1 I, and [[b I, M'], [M, b I]] for b3, b4, b5.
  std::vector<std::pair<std::string, Matrix>> matrices;
  // Must be >= 0: b2 - degree*b3, -sigma_bar - (b2 - b1), sigma_under - q (b4 + b5).
  std::vector<std::pair<std::string, double>> scalars;

  bool satisfied(double tol = 1e-9) const {
    for (const auto& [name, m] : matrices)
      if (!is_positive_semidefinite(m, tol)) return false;
    for (const auto& [name, v] : scalars)
      if (v < -tol) return false;
    return true;
  }
};

/// [[b I, M'], [M, b I]].
inline Matrix norm_lmi(const Matrix& m, double b) {
  if (m.rows() != m.cols()) throw DimensionError("norm_lmi expects a square block");
  const std::size_t n = m.rows();
  Matrix out(2 * n, 2 * n);
  out.set_block(0, 0, b * Matrix::identity(n));
  out.set_block(n, n, b * Matrix::identity(n));
  out.set_block(0, n, m.transpose());
  out.set_block(n, 0, m);
  return out;
}

struct TransformedBlocks {
  Matrix a_ii, a_ij, b_ii, b_ij;
};

inline TransformedBlocks transform_blocks(const PlantBlocks& b, const TransformParams& tp, double eta_ratio) {
  const Matrix t = tp.block();
  const Matrix ti = inverse(t);
  return {t * b.a_ii * ti, eta_ratio * (t * b.a_ij * ti), t * b.b_ii * ti, eta_ratio * (t * b.b_ij * ti)};
}

inline Auxiliaries tightest_auxiliaries(const TransformedBlocks& m, const PlantParams& p, std::size_t q) {
  Auxiliaries a;
  a.b1 = -matrix_measure(m.a_ii, NormKind::Two);
  a.b3 = spectral_norm(m.a_ij);
  a.b2 = static_cast<double>(p.degree) * a.b3;
  a.b4 = spectral_norm(m.b_ii);
  a.b5 = spectral_norm(m.b_ij);
  a.sigma_bar = a.b1 - a.b2;
  a.sigma_under = static_cast<double>(q) * (a.b4 + a.b5);
  return a;
}

/// Constraint matrices and scalar margins for given auxiliaries.
inline LmiSystem lmi_blocks(const GainVector& g, const TransformParams& tp, const Vector& eta, const PlantParams& p,
                            std::size_t q, const Auxiliaries& aux) {
  p.validate();
  const TransformedBlocks m = transform_blocks(plant_blocks(g, p), tp, ring_eta_ratio(eta));
  LmiSystem sys;
  sys.matrices.emplace_back("diagonal", -1.0 * symmetric_part(m.a_ii) - aux.b1 * Matrix::identity(3));
  sys.matrices.emplace_back("neighbour", norm_lmi(m.a_ij, aux.b3));
  sys.matrices.emplace_back("delayed_self", norm_lmi(m.b_ii, aux.b4));
  sys.matrices.emplace_back("delayed_neighbour", norm_lmi(m.b_ij, aux.b5));
  sys.scalars.emplace_back("degree", aux.b2 - static_cast<double>(p.degree) * aux.b3);
  sys.scalars.emplace_back("sigma_bar", -aux.sigma_bar - (aux.b2 - aux.b1));
  sys.scalars.emplace_back("sigma_under", aux.sigma_under - static_cast<double>(q) * (aux.b4 + aux.b5));
  return sys;
}

struct Verdict {
  bool feasible = false;
  Auxiliaries aux;
  std::vector<std::string> violations;

  double margin() const noexcept { return aux.sigma_bar - aux.sigma_under; }
};

inline void check_signs(const GainVector& g, std::vector<std::string>& violations) {
  const double all[] = {g.k0, g.k1, g.k2, g.k0t, g.k1t, g.k2t};
  for (double v : all)
    if (!std::isfinite(v) || v < 0.0) {
      violations.emplace_back("gains must be finite and >= 0");
      break;
    }
  for (std::size_t k = 0; k < 3; ++k)
    if (!(g.delay_free(k) + g.delayed(k) > 0.0)) {
      violations.emplace_back("k" + std::to_string(k) + " + k" + std::to_string(k) + "t must be > 0");
    }
}

inline void check_margins(const Auxiliaries& a, std::vector<std::string>& violations) {
  if (!(a.sigma_bar > 0.0)) violations.emplace_back("sigma_bar = " + std::to_string(a.sigma_bar) + " is not > 0");
  if (!(a.sigma_under >= 0.0)) violations.emplace_back("sigma_under is negative");
  if (!(a.sigma_bar > a.sigma_under)) {
    violations.emplace_back("sigma_bar - sigma_under = " + std::to_string(a.sigma_bar - a.sigma_under) +
                            " is not > 0");
  }
}

inline Verdict feasibility(const GainVector& g, const TransformParams& tp, const Vector& eta, const PlantParams& p,
                           std::size_t q) {
  p.validate();
  Verdict v;
  check_signs(g, v.violations);
  if (!v.violations.empty() && v.violations.front().rfind("gains", 0) == 0) return v;
  v.aux = tightest_auxiliaries(transform_blocks(plant_blocks(g, p), tp, ring_eta_ratio(eta)), p, q);
  check_margins(v.aux, v.violations);
  v.feasible = v.violations.empty();
  return v;
}

// ---------------------------------------------------------------------------
// Search

struct SearchConfig {
  Vector alpha_grid{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0};
  Vector beta_grid{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0};
  Vector eta;                   // empty: uniform
  std::vector<Vector> eta_grid;  // tried in order when eta yields nothing feasible
  std::size_t q = 60;
  PlantParams plant;
  double delay_free_max = 5.0;  // cap on each of k0, k1, k2
  double delayed_max = 1.0;     // cap on k0t + k1t + k2t
  Vector start_grid{0.25, 0.5, 1.0, 2.0};
  double initial_step = 0.25;
  double min_step = 1.0 / 64.0;
  std::size_t ratio_resolution = 4;
  int bisection_iterations = 40;
  std::size_t threads = 0;  // 0: hardware concurrency

  Vector primary_eta() const { return eta.empty() ? Vector(plant.terminals, 1.0) : eta; }

  void validate() const {
    plant.validate();
    if (alpha_grid.empty() || beta_grid.empty()) throw ConfigError("alpha/beta grids must be nonempty");
    for (double v : alpha_grid)
      if (!std::isfinite(v)) throw ConfigError("alpha grid must be finite");
    for (double v : beta_grid)
      if (!std::isfinite(v)) throw ConfigError("beta grid must be finite");
    auto check_eta = [&](const Vector& e) {
      if (e.size() != plant.terminals) throw ConfigError("eta must have one weight per terminal");
      for (double w : e)
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("eta weights must be finite and > 0");
    };
    if (!eta.empty()) check_eta(eta);
    for (const auto& e : eta_grid) check_eta(e);
    if (!(delay_free_max > 0.0) || !(delayed_max > 0.0)) throw ConfigError("gain caps must be > 0");
    if (start_grid.empty()) throw ConfigError("start grid must be nonempty");
    for (double v : start_grid)
      if (v < 0.0 || v > delay_free_max) throw ConfigError("start grid values must lie in [0, delay_free_max]");
    if (!(initial_step > 0.0) || !(min_step > 0.0) || min_step > initial_step) {
      throw ConfigError("coordinate steps must satisfy 0 < min_step <= initial_step");
    }
    if (ratio_resolution == 0) throw ConfigError("ratio resolution must be >= 1");
    if (bisection_iterations < 1) throw ConfigError("bisection iterations must be >= 1");
  }
};

/// Nonnegative (a, b, c) with a + b + c = 1 on a lattice of the given
/// resolution, in lexicographic order.
inline std::vector<std::array<double, 3>> ratio_simplex(std::size_t resolution) {
  std::vector<std::array<double, 3>> out;
  const double r = static_cast<double>(resolution);
  for (std::size_t a = 0; a <= resolution; ++a)
    for (std::size_t b = 0; a + b <= resolution; ++b) {
      const std::size_t c = resolution - a - b;
      out.push_back({static_cast<double>(a) / r, static_cast<double>(b) / r, static_cast<double>(c) / r});
    }
  return out;
}

struct NodeResult {
  TransformParams transform;
  bool feasible = false;
  GainVector gains;
  double cost = 0.0;  // delayed-gain sum
  double cond_T = 0.0;
  bool cap_bound = false;
  Auxiliaries aux;
};

struct SynthesisResult {
  bool feasible = false;
  GainVector gains;
  TransformParams transform;
  Vector eta;
  std::optional<std::size_t> eta_grid_index;  // set when a fallback eta was used
  double cost = 0.0;
  double cond_T = 0.0;
  bool cap_bound = false;
  Auxiliaries aux;
  std::vector<NodeResult> nodes;  // grid nodes for the eta that was used
  std::size_t grid_index = 0;
  Certificate certificate;  // cross-check on the design network
  bool certified = false;
  std::string diagnostics;
};

namespace detail {

struct NodeSearch {
  const SearchConfig& cfg;
  const TransformParams tp;
  const double eta_ratio;
  const Matrix t, ti;
  const std::vector<std::array<double, 3>>& ratios;
  std::vector<double> delayed_unit;  // b4 + b5 per ratio at unit scale

  NodeSearch(const SearchConfig& c, TransformParams p, double ratio, const std::vector<std::array<double, 3>>& r)
      : cfg(c), tp(p), eta_ratio(ratio), t(p.block()), ti(inverse(t)), ratios(r) {}

  struct Best {
    double scale = -1.0;  // < 0: infeasible
    std::size_t ratio = 0;
    bool cap_bound = false;
  };

  // Bisection on the delayed scale s for each ratio, against the feasibility
  // oracle. The delay-free part of the oracle does not depend on s, so it is
  // evaluated once per k.
  Best best_delayed(const GainVector& k) const {
    Best best;
    const PlantBlocks pb = plant_blocks(k, cfg.plant);
    const Matrix aii = t * pb.a_ii * ti;
    const Matrix aij = eta_ratio * (t * pb.a_ij * ti);
    const double sigma_bar = -matrix_measure(aii, NormKind::Two) -
                             static_cast<double>(cfg.plant.degree) * spectral_norm(aij);
    if (!(sigma_bar > 0.0)) return best;
    const double q = static_cast<double>(cfg.q);
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
      const auto& r = ratios[ri];
      // k_j + k_jt > 0 must hold for every layer.
      bool covered = true;
      for (std::size_t j = 0; j < 3; ++j) covered = covered && (k.delay_free(j) > 0.0 || r[j] > 0.0);
      if (!covered) continue;
      auto feasible = [&](double s) { return sigma_bar > q * delayed_unit[ri] * s; };
      double lo = 0.0, hi = cfg.delayed_max;
      bool cap = false;
      if (feasible(hi)) {
        lo = hi;
        cap = true;
      } else {
        for (int it = 0; it < cfg.bisection_iterations; ++it) {
          const double mid = 0.5 * (lo + hi);
          (feasible(mid) ? lo : hi) = mid;
        }
      }
      // s = 0 needs every layer to carry a delay-free gain.
      if (lo == 0.0 && !(k.k0 > 0.0 && k.k1 > 0.0 && k.k2 > 0.0)) continue;
      if (lo > best.scale) best = {lo, ri, cap};
    }
    return best;
  }

  void prepare() {
    delayed_unit.resize(ratios.size());
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
      const auto& r = ratios[ri];
      GainVector unit{0, 0, 0, r[0], r[1], r[2]};
      const PlantBlocks pb = plant_blocks(unit, cfg.plant);
      delayed_unit[ri] = spectral_norm(t * pb.b_ii * ti) + eta_ratio * spectral_norm(t * pb.b_ij * ti);
    }
  }

  NodeResult run() {
    prepare();
    NodeResult out;
    out.transform = tp;
    out.cond_T = induced_norm(t, NormKind::Two) * induced_norm(ti, NormKind::Two);

    GainVector k;
    Best best;
    for (double a : cfg.start_grid)
      for (double b : cfg.start_grid)
        for (double c : cfg.start_grid) {
          const GainVector cand{a, b, c, 0, 0, 0};
          const Best r = best_delayed(cand);
          if (r.scale > best.scale) {
            best = r;
            k = cand;
          }
        }
    if (best.scale < 0.0) return out;

    for (double step = cfg.initial_step; step >= cfg.min_step; step *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::size_t j = 0; j < 3; ++j) {
          for (double sign : {1.0, -1.0}) {
            GainVector cand = k;
            double& v = j == 0 ? cand.k0 : j == 1 ? cand.k1 : cand.k2;
            v = std::clamp(v + sign * step, 0.0, cfg.delay_free_max);
            if (v == (j == 0 ? k.k0 : j == 1 ? k.k1 : k.k2)) continue;
            const Best r = best_delayed(cand);
            if (r.scale > best.scale * (1.0 + 1e-12)) {
              best = r;
              k = cand;
              improved = true;
            }
          }
        }
      }
    }

    const auto& r = ratios[best.ratio];
    out.gains = k.with_delayed(best.scale * r[0], best.scale * r[1], best.scale * r[2]);
    out.cost = out.gains.delayed_sum();
    out.cap_bound = best.cap_bound;
    out.feasible = true;  // confirmed by the caller against the full oracle
    return out;
  }
};

}  // namespace detail

/// Grid search for one eta. Nodes are evaluated in parallel; the reduction
/// orders by (cost desc, cond_T asc, grid index asc).
inline std::vector<NodeResult> search_grid(const SearchConfig& cfg, const Vector& eta) {
  const double ratio = ring_eta_ratio(eta);
  const auto ratios = ratio_simplex(cfg.ratio_resolution);
  const std::size_t nb = cfg.beta_grid.size();
  std::vector<NodeResult> nodes(cfg.alpha_grid.size() * nb);
  mplex::detail::parallel_for(
      nodes.size(),
      [&](std::size_t idx) {
        const TransformParams tp{cfg.alpha_grid[idx / nb], cfg.beta_grid[idx % nb]};
        detail::NodeSearch search(cfg, tp, ratio, ratios);
        NodeResult node = search.run();
        if (node.feasible) {
          const Verdict v = feasibility(node.gains, tp, eta, cfg.plant, cfg.q);
          node.feasible = v.feasible;
          node.aux = v.aux;
        }
        nodes[idx] = node;
      },
      cfg.threads);
  return nodes;
}

/// Builds the design network for the given gains (constant blocks, one sample).
inline Certificate certify_design(const PlantParams& plant, const GainVector& g, const TransformParams& tp,
                                  const Vector& eta) {
  mtdc::MtdcParams p;
  p.terminals = plant.terminals;
  p.resistance = plant.resistance;
  p.design_capacitance = plant.capacitance;
  const MultiplexNetwork net = mtdc::build_mtdc(p, g, plant.capacitance);
  const Transformation t = Transformation::uniform(plant.terminals, tp.block());
  const std::vector<SamplePoint> samples{SamplePoint{{}, {}, 0.0}};
  return certify(net, t, NormSpec{NormKind::Two, eta}, samples);
}

inline SynthesisResult synthesize(const SearchConfig& cfg) {
  cfg.validate();
  SynthesisResult result;
  std::vector<Vector> etas{cfg.primary_eta()};
  for (const auto& e : cfg.eta_grid) etas.push_back(e);

  for (std::size_t e = 0; e < etas.size(); ++e) {
    std::vector<NodeResult> nodes = search_grid(cfg, etas[e]);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].feasible) continue;
      if (!best) {
        best = i;
        continue;
      }
      const NodeResult& b = nodes[*best];
      const double tol = 1e-12 * std::max(1.0, b.cost);
      if (nodes[i].cost > b.cost + tol || (std::abs(nodes[i].cost - b.cost) <= tol && nodes[i].cond_T < b.cond_T)) {
        best = i;
      }
    }
    if (!best) {
      result.diagnostics += "eta candidate " + std::to_string(e) + ": no feasible grid node; ";
      continue;
    }
    const NodeResult& b = nodes[*best];
    result.feasible = true;
    result.gains = b.gains;
    result.transform = b.transform;
    result.eta = etas[e];
    if (e > 0) result.eta_grid_index = e - 1;
    result.cost = b.cost;
    result.cond_T = b.cond_T;
    result.cap_bound = b.cap_bound;
    result.aux = b.aux;
    result.grid_index = *best;
    result.nodes = std::move(nodes);
    result.certificate = certify_design(cfg.plant, result.gains, result.transform, result.eta);
    result.certified = result.certificate.feasible;
    if (!result.certified) result.diagnostics += "cross-certification failed: " + result.certificate.reason;
    if (result.cap_bound) result.diagnostics += "delayed-gain cap binds; ";
    return result;
  }
  result.diagnostics += "synthesis failed on every grid node";
  return result;
}

/// eta candidates for the ring: uniform, then smooth bumps centred on `centre`.
inline std::vector<Vector> default_eta_grid(std::size_t terminals, std::size_t centre = 0) {
  std::vector<Vector> out;
  out.emplace_back(terminals, 1.0);
  const double pi = std::acos(-1.0);
  for (double amp : {0.05, 0.1, 0.25}) {
    for (double sign : {1.0, -1.0}) {
      Vector e(terminals);
      for (std::size_t i = 0; i < terminals; ++i) {
        const double phase = 2.0 * pi * static_cast<double>((i + terminals - centre) % terminals) /
                             static_cast<double>(terminals);
        e[i] = 1.0 + sign * amp * std::cos(phase);
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace mplex::synthesis
