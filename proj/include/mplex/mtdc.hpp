#pragma once

// MTDC ring case study: gains (given or synthesized), certificate on the
// design model, simulation of the physical plant, and the acceptance checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mplex/certify.hpp"
#include "mplex/mtdc_network.hpp"
#include "mplex/simulator.hpp"
#include "mplex/synthesis.hpp"

namespace mplex::mtdc {

struct CaseStudyConfig {
  MtdcParams params;
  std::optional<GainVector> gains;  // skip synthesis when set
  TransformParams transform;        // used with given gains
  synthesis::SearchConfig search;   // plant fields are overwritten from params
  double tail_window = 5.0;
  bool eta_fallback = true;  // try the default eta grid if uniform eta fails
};

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

struct CaseStudyReport {
  MtdcParams params;
  GainVector gains;
  TransformParams transform;
  Vector eta;
  std::optional<std::size_t> eta_grid_index;
  std::optional<synthesis::SynthesisResult> synthesis;
  Certificate design_certificate;    // capacitance = params.design_capacitance
  Certificate physical_certificate;  // capacitance = params.capacitance
  Trace trace;
  ErrorMetrics metrics;
  HistorySups sups;
  double max_v0 = 0.0;
  double tail_max_v = 0.0;
  double tail_max_u_plus_d = 0.0;
  double w_tail_envelope = 0.0;
  double zeta12_tail = 0.0;  // physical units
  double zeta_band = 0.0;
  std::optional<std::size_t> envelope_violation_row;
  double envelope_min_slack = 0.0;
  double synthesis_seconds = 0.0;
  double simulation_seconds = 0.0;
  std::vector<Check> checks;

  bool passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

inline synthesis::PlantParams design_plant(const MtdcParams& p) {
  synthesis::PlantParams plant;
  plant.terminals = p.terminals;
  plant.capacitance = p.design_capacitance;
  plant.resistance = p.resistance;
  plant.degree = 2;
  return plant;
}

inline Certificate certify_ring(const MtdcParams& p, const GainVector& g, const TransformParams& tp, const Vector& eta,
                                double capacitance) {
  const MultiplexNetwork net = build_mtdc(p, g, capacitance);
  const Transformation t = Transformation::uniform(p.terminals, tp.block());
  const std::vector<SamplePoint> samples{SamplePoint{{}, {}, 0.0}};
  return certify(net, t, NormSpec{NormKind::Two, eta}, samples);
}

inline CaseStudyReport run_case_study(const CaseStudyConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const MtdcParams& p = cfg.params;
  p.validate();
  if (!(cfg.tail_window > 0.0) || cfg.tail_window > p.horizon) throw ConfigError("tail window must lie in (0, horizon]");

  CaseStudyReport rep;
  rep.params = p;

  const auto t_synth = clock::now();
  if (cfg.gains) {
    validate_gains(*cfg.gains);
    rep.gains = *cfg.gains;
    rep.transform = cfg.transform;
    rep.eta.assign(p.terminals, 1.0);
    rep.design_certificate = certify_ring(p, rep.gains, rep.transform, rep.eta, p.design_capacitance);
    if (!rep.design_certificate.feasible && cfg.eta_fallback) {
      const auto grid = synthesis::default_eta_grid(p.terminals, p.disturbed_agent);
      for (std::size_t k = 1; k < grid.size(); ++k) {
        Certificate c = certify_ring(p, rep.gains, rep.transform, grid[k], p.design_capacitance);
        if (c.feasible) {
          rep.eta = grid[k];
          rep.eta_grid_index = k;
          rep.design_certificate = std::move(c);
          break;
        }
      }
    }
  } else {
    synthesis::SearchConfig search = cfg.search;
    search.plant = design_plant(p);
    if (!search.eta.empty() && search.eta.size() != p.terminals) throw ConfigError("search eta size mismatch");
    if (cfg.eta_fallback && search.eta_grid.empty()) search.eta_grid = synthesis::default_eta_grid(p.terminals, p.disturbed_agent);
    rep.synthesis = synthesis::synthesize(search);
    const auto& s = *rep.synthesis;
    if (s.feasible) {
      rep.gains = s.gains;
      rep.transform = s.transform;
      rep.eta = s.eta;
      rep.eta_grid_index = s.eta_grid_index;
      rep.design_certificate = s.certificate;
    }
  }
  rep.synthesis_seconds = std::chrono::duration<double>(clock::now() - t_synth).count();

  const bool have_gains = !cfg.gains ? rep.synthesis->feasible : true;
  rep.checks.push_back({"design_certificate_feasible", rep.design_certificate.sigma_bar - rep.design_certificate.sigma_under,
                        0.0, have_gains && rep.design_certificate.feasible});
  if (!have_gains) return rep;
  rep.checks.push_back({"design_lambda_positive", rep.design_certificate.lambda, 0.0, rep.design_certificate.lambda > 0.0});

  rep.physical_certificate = certify_ring(p, rep.gains, rep.transform, rep.eta, p.capacitance);

  // Simulation of the physical plant.
  const MultiplexNetwork plant = build_mtdc(p, rep.gains, p.capacitance);
  const NormSpec spec{NormKind::Two, rep.eta};
  SimConfig sim;
  sim.t0 = 0.0;
  sim.horizon = p.horizon;
  sim.dt = p.dt;
  sim.random_initial = true;
  sim.seed = p.seed;
  const auto t_sim = clock::now();
  rep.trace = simulate(plant, sim, spec);
  rep.simulation_seconds = std::chrono::duration<double>(clock::now() - t_sim).count();
  rep.metrics = error_metrics(rep.trace, plant, spec, MetricsConfig{cfg.tail_window, 1e-3});

  const Trace& tr = rep.trace;
  const std::size_t a = p.disturbed_agent;
  const double c = p.capacitance;
  const double t_tail = tr.times.back() - cfg.tail_window;
  for (double v : tr.x_at(0)) rep.max_v0 = std::max(rep.max_v0, std::abs(v));
  for (std::size_t row = 0; row < tr.size(); ++row) {
    const double t = tr.times[row];
    if (t < t_tail - 1e-12) continue;
    for (double v : tr.x_at(row)) rep.tail_max_v = std::max(rep.tail_max_v, std::abs(v));
    const double d = p.disturbance ? disturbance_total(t) : 0.0;
    rep.tail_max_u_plus_d = std::max(rep.tail_max_u_plus_d, std::abs(tr.u_at(row)[a] + d));
    // zeta_{a,2} = r_{a,2} + d1 in physical units (r = c r~).
    const double z = c * zeta_at(tr, plant, row, a, 2)[0];
    rep.zeta12_tail = std::max(rep.zeta12_tail, std::abs(z));
  }
  rep.w_tail_envelope = p.disturbance ? std::exp(-0.2 * t_tail) : 0.0;

  rep.checks.push_back({"voltage_decay", rep.tail_max_v, 1e-3 * rep.max_v0, rep.tail_max_v <= 1e-3 * rep.max_v0});
  if (p.disturbance) {
    const double limit = 10.0 * rep.w_tail_envelope;
    rep.checks.push_back({"ramp_compensation", rep.tail_max_u_plus_d, limit, rep.tail_max_u_plus_d <= limit});
  } else {
    const double limit = 1e-3 * rep.max_v0;
    rep.checks.push_back({"input_decay", rep.tail_max_u_plus_d, limit, rep.tail_max_u_plus_d <= limit});
  }

  // Envelope and zeta band from the design certificate. With design
  // capacitance 1 the design coordinates coincide with physical units.
  if (rep.design_certificate.feasible) {
    const MultiplexNetwork design = build_mtdc(p, rep.gains, p.design_capacitance);
    rep.sups = history_sups(design, sim, spec, tr.x_at(0));
    const IssEnvelope env = iss_envelope(rep.design_certificate, rep.sups, sim.t0);
    rep.envelope_violation_row = envelope_violation(tr, env);
    rep.envelope_min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < tr.size(); ++k)
      rep.envelope_min_slack = std::min(rep.envelope_min_slack, env(tr.times[k]) - tr.error[k]);
    rep.checks.push_back({"envelope_dominance", rep.envelope_min_slack, -1e-9, !rep.envelope_violation_row});

    // Steady band cond_T w_tail / (sigma_bar - sigma_under); the capacitance
    // factors of zeta and w cancel, so it holds in physical units.
    rep.zeta_band = rep.design_certificate.output_lipschitz * rep.design_certificate.cond_T * rep.w_tail_envelope /
                    rep.design_certificate.margin();
    if (p.disturbance) {
      rep.checks.push_back({"zeta12_band", rep.zeta12_tail, rep.zeta_band, rep.zeta12_tail <= rep.zeta_band});
    }
  }
  return rep;
}

}  // namespace mplex::mtdc
