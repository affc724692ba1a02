// mplex: rate | certify | synth | simulate | mtdc
//
// Exit codes: 0 success, 1 infeasible or failed acceptance, 2 input error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mplex/certify.hpp"
#include "mplex/halanay.hpp"
#include "mplex/io.hpp"
#include "mplex/mtdc.hpp"
#include "mplex/simulator.hpp"
#include "mplex/synthesis.hpp"

namespace fs = std::filesystem;
using mplex::io::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Run {
  std::string command;
  std::vector<std::string> inputs;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write_json(const std::string& name, const json& j) {
    write_text(name, j.dump(2) + "\n");
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(out_dir / name);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
    out << text;
    outputs.push_back(name);
  }

  // Written last, through a rename, so its presence marks a complete run.
  void finish(int exit_code) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m = {{"command", command},   {"inputs", inputs},       {"out_dir", out_dir.string()},
              {"tool_version", kVersion}, {"wall_clock_seconds", wall}, {"outputs", outputs},
              {"exit_code", exit_code}};
    m["seed"] = seed ? json(*seed) : json(nullptr);
    const fs::path tmp = out_dir / "manifest.json.tmp";
    {
      std::ofstream out(tmp);
      out << m.dump(2) << "\n";
    }
    fs::rename(tmp, out_dir / "manifest.json");
  }
};

std::string default_out_dir() {
  const char* env = std::getenv("MPLEX_OUT_DIR");
  return env && *env ? env : "out";
}

void prepare(Run& run, const std::string& dir) {
  run.out_dir = dir;
  fs::create_directories(run.out_dir);
}

void print_certificate(const mplex::Certificate& c) {
  std::printf("feasible     %s\n", c.feasible ? "yes" : "no");
  std::printf("sigma_bar    %.12g\n", c.sigma_bar);
  std::printf("sigma_under  %.12g\n", c.sigma_under);
  if (c.feasible) {
    std::printf("lambda       %.12g\n", c.lambda);
  } else {
    std::printf("violation    %s\n", c.reason.c_str());
    int shown = 0;
    for (std::size_t i = 0; i < c.c2.rows.size() && shown < 10; ++i) {
      if (c.c2.rows[i] >= 0.0 || c.c3.rows[i] >= -c.c2.rows[i]) {
        std::printf("  agent %zu: C2 row %.6g, C3 row %.6g\n", i, c.c2.rows[i], c.c3.rows[i]);
        ++shown;
      }
    }
  }
  std::printf("cond_T       %.6g\n", c.cond_T);
}

int cmd_rate(double sigma_bar, double sigma_under, double tau_max) {
  const mplex::halanay::HalanayParams p{sigma_bar, sigma_under, tau_max};
  const double lambda = mplex::halanay::solve_rate(p);
  std::printf("lambda   %.12f\n", lambda);
  std::printf("residual %.3e\n", mplex::halanay::rate_residual(p, lambda));
  return 0;
}

int cmd_certify(Run& run, const std::string& network, const std::string& transform, const std::string& norm) {
  run.inputs = {network, transform, norm};
  const auto in = mplex::io::parse_network(mplex::io::load_json_file(network));
  const auto& net = in.network;
  const auto t = mplex::io::parse_transform(mplex::io::load_json_file(transform), net.size(), net.augmented_dim());
  const auto spec = mplex::io::parse_norm(mplex::io::load_json_file(norm), net.size());
  const mplex::Certificate cert = mplex::certify(net, t, spec, in.samples);
  print_certificate(cert);
  run.write_json("certificate.json", mplex::io::to_json(cert));
  return cert.feasible ? 0 : 1;
}

int cmd_synth(Run& run, const std::string& search_file) {
  run.inputs = {search_file};
  const auto cfg = mplex::io::parse_search(mplex::io::load_json_file(search_file));
  const auto result = mplex::synthesis::synthesize(cfg);
  json gains = mplex::io::to_json(result);
  run.write_json("gains.json", gains);
  if (result.feasible) run.write_json("certificate.json", mplex::io::to_json(result.certificate));
  if (!result.feasible) {
    std::printf("synthesis failed: %s\n", result.diagnostics.c_str());
    return 1;
  }
  const auto& g = result.gains;
  std::printf("alpha %.4g beta %.4g  eta %s\n", result.transform.alpha, result.transform.beta,
              result.eta_grid_index ? ("eta_grid[" + std::to_string(*result.eta_grid_index) + "]").c_str()
                                    : "primary");
  std::printf("k0 %.6g k1 %.6g k2 %.6g  k0t %.6g k1t %.6g k2t %.6g  (delayed sum %.6g)\n", g.k0, g.k1, g.k2, g.k0t,
              g.k1t, g.k2t, result.cost);
  print_certificate(result.certificate);
  if (!result.diagnostics.empty()) std::printf("note: %s\n", result.diagnostics.c_str());
  return result.certified ? 0 : 1;
}

int cmd_simulate(Run& run, const std::string& network, const std::string& sim_file, const std::string& norm_file) {
  run.inputs = {network, sim_file};
  const auto in = mplex::io::parse_network(mplex::io::load_json_file(network));
  const auto sim = mplex::io::parse_sim(mplex::io::load_json_file(sim_file));
  mplex::NormSpec spec = mplex::NormSpec::uniform(in.network.size());
  if (!norm_file.empty()) {
    run.inputs.push_back(norm_file);
    spec = mplex::io::parse_norm(mplex::io::load_json_file(norm_file), in.network.size());
  } else if (sim.norm) {
    spec = mplex::io::parse_norm(*sim.norm, in.network.size());
  }
  if (sim.config.random_initial) run.seed = sim.config.seed;
  const mplex::Trace tr = mplex::simulate(in.network, sim.config, spec);
  const auto metrics = mplex::error_metrics(tr, in.network, spec, sim.metrics);

  std::ofstream csv(run.out_dir / "trace.csv");
  if (!csv) throw std::runtime_error("cannot write trace.csv");
  mplex::write_trace_csv(csv, tr, sim.trace_stride);
  csv.close();
  run.outputs.push_back("trace.csv");

  json meta = {{"config",
                {{"t0", sim.config.t0},
                 {"horizon", sim.config.horizon},
                 {"dt", sim.config.dt},
                 {"random_initial", sim.config.random_initial},
                 {"seed", sim.config.seed},
                 {"trace_stride", sim.trace_stride},
                 {"tail_window", sim.metrics.tail_window},
                 {"threshold", sim.metrics.threshold}}},
               {"norm", {{"p", std::string(mplex::to_string(spec.local_p))}, {"eta", spec.eta}}},
               {"mesh_points", tr.size()},
               {"metrics", mplex::io::to_json(metrics)}};
  run.write_json("metrics.json", meta);
  std::printf("mesh points      %zu\n", tr.size());
  std::printf("initial error    %.6g\n", tr.error.front());
  std::printf("final error      %.6g\n", metrics.final_error);
  std::printf("tail sup error   %.6g\n", metrics.tail_sup);
  return 0;
}

struct MtdcFlags {
  std::size_t terminals = 30;
  double horizon = 40.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::string gains_file;
  std::string search_file;
  std::size_t trace_stride = 10;
  double tail_window = 5.0;
  bool no_disturbance = false;
};

int cmd_mtdc(Run& run, const MtdcFlags& f) {
  mplex::mtdc::CaseStudyConfig cfg;
  cfg.params.terminals = f.terminals;
  cfg.params.horizon = f.horizon;
  cfg.params.dt = f.dt;
  cfg.params.seed = f.seed;
  cfg.params.disturbance = !f.no_disturbance;
  cfg.tail_window = f.tail_window;
  run.seed = f.seed;
  if (f.trace_stride == 0) throw mplex::ConfigError("--trace-stride must be >= 1");
  if (!f.gains_file.empty()) {
    run.inputs.push_back(f.gains_file);
    const json j = mplex::io::load_json_file(f.gains_file);
    const mplex::io::Node root(j, "");
    cfg.gains = mplex::io::parse_gains(root.has("gains") ? root.at("gains") : root);
    if (auto tp = mplex::io::parse_optional_transform_params(root)) cfg.transform = *tp;
  }
  if (!f.search_file.empty()) {
    run.inputs.push_back(f.search_file);
    cfg.search = mplex::io::parse_search(mplex::io::load_json_file(f.search_file));
  }
  const auto rep = mplex::mtdc::run_case_study(cfg);

  json gains = mplex::io::to_json(rep.gains);
  gains["alpha"] = rep.transform.alpha;
  gains["beta"] = rep.transform.beta;
  run.write_json("gains.json", gains);
  run.write_json("certificate.json", mplex::io::to_json(rep.design_certificate));
  if (!rep.trace.times.empty()) {
    std::ofstream csv(run.out_dir / "trace.csv");
    if (!csv) throw std::runtime_error("cannot write trace.csv");
    mplex::write_trace_csv(csv, rep.trace, f.trace_stride);
    csv.close();
    run.outputs.push_back("trace.csv");
  }
  run.write_json("report.json", mplex::io::to_json(rep, f.trace_stride));

  const auto& g = rep.gains;
  std::printf("gains (%s): k0 %.6g k1 %.6g k2 %.6g  k0t %.6g k1t %.6g k2t %.6g\n",
              rep.synthesis ? "synthesized" : "file", g.k0, g.k1, g.k2, g.k0t, g.k1t, g.k2t);
  std::printf("transform alpha %.4g beta %.4g, eta %s\n", rep.transform.alpha, rep.transform.beta,
              rep.eta_grid_index ? ("eta_grid[" + std::to_string(*rep.eta_grid_index) + "]").c_str() : "uniform");
  std::printf("design certificate (c=%g):\n", cfg.params.design_capacitance);
  print_certificate(rep.design_certificate);
  std::printf("physical model (c=%g): %s\n", cfg.params.capacitance,
              rep.physical_certificate.feasible ? "feasible" : rep.physical_certificate.reason.c_str());
  for (const auto& c : rep.checks)
    std::printf("[%s] %-28s value %.6g  limit %.6g\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value, c.limit);
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contraction certificates, gain synthesis and simulation for multiplex integral control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  double sigma_bar = 0, sigma_under = 0, tau_max = 0;
  auto* rate = app.add_subcommand("rate", "Halanay convergence rate");
  rate->add_option("--sigma-bar", sigma_bar)->required();
  rate->add_option("--sigma-under", sigma_under)->required();
  rate->add_option("--tau-max", tau_max)->required();

  std::string out_dir = default_out_dir();
  std::string network, transform, norm;
  auto* certify = app.add_subcommand("certify", "Check the contraction conditions and write certificate.json");
  certify->add_option("network", network)->required()->check(CLI::ExistingFile);
  certify->add_option("transform", transform)->required()->check(CLI::ExistingFile);
  certify->add_option("norm", norm)->required()->check(CLI::ExistingFile);
  certify->add_option("--out-dir", out_dir);

  std::string search;
  auto* synth = app.add_subcommand("synth", "Search MTDC controller gains and write gains.json");
  synth->add_option("search", search)->required()->check(CLI::ExistingFile);
  synth->add_option("--out-dir", out_dir);

  std::string sim_file, sim_norm;
  auto* simulate = app.add_subcommand("simulate", "Integrate the closed loop and write trace.csv + metrics.json");
  simulate->add_option("network", network)->required()->check(CLI::ExistingFile);
  simulate->add_option("sim", sim_file)->required()->check(CLI::ExistingFile);
  simulate->add_option("--norm", sim_norm)->check(CLI::ExistingFile);
  simulate->add_option("--out-dir", out_dir);

  MtdcFlags mf;
  auto* mtdc = app.add_subcommand("mtdc", "MTDC ring case study");
  mtdc->add_option("--terminals", mf.terminals)->capture_default_str();
  mtdc->add_option("--horizon", mf.horizon)->capture_default_str();
  mtdc->add_option("--dt", mf.dt)->capture_default_str();
  mtdc->add_option("--seed", mf.seed)->capture_default_str();
  mtdc->add_option("--gains-file", mf.gains_file, "skip synthesis")->check(CLI::ExistingFile);
  mtdc->add_option("--search-file", mf.search_file)->check(CLI::ExistingFile);
  mtdc->add_option("--trace-stride", mf.trace_stride, "write every k-th mesh point")->capture_default_str();
  mtdc->add_option("--tail-window", mf.tail_window)->capture_default_str();
  mtdc->add_flag("--no-disturbance", mf.no_disturbance);
  mtdc->add_option("--out-dir", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Run run;
  int code = 0;
  try {
    if (*rate) return cmd_rate(sigma_bar, sigma_under, tau_max);
    run.command = app.get_subcommands().front()->get_name();
    prepare(run, out_dir);
    if (*certify) code = cmd_certify(run, network, transform, norm);
    if (*synth) code = cmd_synth(run, search);
    if (*simulate) code = cmd_simulate(run, network, sim_file, sim_norm);
    if (*mtdc) code = cmd_mtdc(run, mf);
  } catch (const mplex::InfeasibleRateError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 1;
  } catch (const mplex::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  run.finish(code);
  return code;
}
