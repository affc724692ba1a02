#pragma once

// JSON input formats and result serialization. Semantic errors carry the
// JSON pointer of the offending value; syntax errors carry line and column.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mplex/certify.hpp"
#include "mplex/errors.hpp"
#include "mplex/linalg.hpp"
#include "mplex/mtdc.hpp"
#include "mplex/mtdc_network.hpp"
#include "mplex/netmodel.hpp"
#include "mplex/simulator.hpp"
#include "mplex/synthesis.hpp"

namespace mplex::io {

using json = nlohmann::json;

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                     e.what() + ")");
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Typed access with pointer context

class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError((path_.empty() ? std::string("/") : path_) + ": " + what);
  }

  bool has(const char* key) const { return j_->is_object() && j_->contains(key); }

  Node at(const char* key) const {
    if (!j_->is_object()) fail("expected an object");
    auto it = j_->find(key);
    if (it == j_->end()) fail(std::string("missing key '") + key + "'");
    return Node(*it, path_ + "/" + key);
  }

  Node at(std::size_t i) const {
    if (!j_->is_array() || i >= j_->size()) fail("index " + std::to_string(i) + " out of range");
    return Node((*j_)[i], path_ + "/" + std::to_string(i));
  }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::size_t count() const {
    if (!j_->is_number_integer() || j_->get<long long>() < 0) fail("expected a nonnegative integer");
    return j_->get<std::size_t>();
  }

  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }

  Vector vector() const {
    Vector v(size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = at(i).number();
    return v;
  }

  Matrix matrix() const {
    const std::size_t r = size();
    if (r == 0) fail("matrix must have at least one row");
    std::vector<std::vector<double>> rows(r);
    for (std::size_t i = 0; i < r; ++i) {
      rows[i] = at(i).vector();
      if (rows[i].size() != rows[0].size() || rows[i].empty()) fail("matrix rows must be nonempty and equal length");
    }
    return Matrix::from_rows(rows);
  }

  double number_or(const char* key, double fallback) const { return has(key) ? at(key).number() : fallback; }
  std::size_t count_or(const char* key, std::size_t fallback) const { return has(key) ? at(key).count() : fallback; }
  std::string string_or(const char* key, std::string fallback) const {
    return has(key) ? at(key).string() : fallback;
  }
  bool boolean_or(const char* key, bool fallback) const { return has(key) ? at(key).boolean() : fallback; }

 private:
  const json* j_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Inputs

struct NetworkInput {
  MultiplexNetwork network;
  std::vector<SamplePoint> samples;
  std::optional<mtdc::MtdcParams> mtdc;  // set for the mtdc preset
};

inline mtdc::GainVector parse_gains(const Node& n) {
  mtdc::GainVector g;
  g.k0 = n.at("k0").number();
  g.k1 = n.at("k1").number();
  g.k2 = n.at("k2").number();
  g.k0t = n.at("k0t").number();
  g.k1t = n.at("k1t").number();
  g.k2t = n.at("k2t").number();
  try {
    mtdc::validate_gains(g);
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return g;
}

inline std::optional<mtdc::TransformParams> parse_optional_transform_params(const Node& n) {
  if (!n.has("alpha") && !n.has("beta")) return std::nullopt;
  return mtdc::TransformParams{n.number_or("alpha", -0.5), n.number_or("beta", -1.0)};
}

namespace detail {

inline std::function<double(double)> parse_delay_fn(const Node& d, std::size_t receiver) {
  const std::string kind = d.string_or("kind", "constant");
  if (kind == "constant") {
    const double v = d.at("value").number();
    if (!(v >= 0.0)) d.at("value").fail("delay must be >= 0");
    return [v](double) { return v; };
  }
  if (kind == "sinusoidal") {
    const double base = d.at("base").number();
    const double amp = d.at("amplitude").number();
    const double freq = d.number_or("frequency", 1.0);
    const double phase = d.number_or("phase_per_agent", 1.0) * static_cast<double>(receiver + 1);
    if (amp < 0.0 || base < amp) d.fail("sinusoidal delay needs base >= amplitude >= 0");
    return [=](double t) { return base + amp * std::sin(freq * t + phase); };
  }
  d.at("kind").fail("unknown delay kind '" + kind + "' (expected constant or sinusoidal)");
}

inline void parse_residual(const Node& r, std::size_t n, std::function<void(double, std::span<double>)>& fn,
                           double& bound) {
  const std::string kind = r.string_or("kind", "none");
  if (kind == "none") return;
  const double amp = r.number_or("amplitude", 1.0);
  if (kind == "constant") {
    fn = [amp](double, std::span<double> out) {
      for (double& v : out) v = amp;
    };
  } else if (kind == "sinusoid") {
    const double freq = r.number_or("frequency", 1.0);
    fn = [amp, freq](double t, std::span<double> out) {
      for (double& v : out) v = amp * std::sin(freq * t);
    };
  } else if (kind == "exp_sin") {
    const double decay = r.number_or("decay", 0.2);
    const double freq = r.number_or("frequency", 1.0);
    if (decay < 0.0) r.at("decay").fail("decay must be >= 0");
    fn = [=](double t, std::span<double> out) {
      for (double& v : out) v = amp * std::exp(-decay * t) * std::sin(freq * t);
    };
  } else {
    r.at("kind").fail("unknown residual kind '" + kind + "' (expected none, constant, sinusoid or exp_sin)");
  }
  // Declared l1 bound; exp_sin assumes t >= 0.
  bound = std::abs(amp) * static_cast<double>(n);
}

inline std::size_t agent_key(const Node& parent, const std::string& key, std::size_t agents) {
  std::size_t idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoul(key, &used);
    if (used != key.size()) throw std::invalid_argument(key);
  } catch (const std::exception&) {
    parent.fail("key '" + key + "' is not an agent index");
  }
  if (idx >= agents) parent.fail("agent index " + key + " out of range");
  return idx;
}

inline NetworkInput parse_linear_network(const Node& root) {
  NetworkInput in;
  MultiplexNetwork& net = in.network;
  net.state_dim = root.count_or("state_dim", 1);
  net.integral_layers = root.count_or("integral_layers", 0);
  const std::size_t n = net.state_dim;
  if (n == 0) root.at("state_dim").fail("must be >= 1");

  const Node agents = root.at("agents");
  std::vector<Matrix> a_mats;
  std::vector<double> lipschitz;
  if (agents.raw().is_object()) {
    const std::size_t count = agents.at("count").count();
    const Matrix a = agents.has("A") ? agents.at("A").matrix() : Matrix(n, n);
    a_mats.assign(count, a);
    lipschitz.assign(count, agents.number_or("output_lipschitz", 1.0));
  } else {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const Node ag = agents.at(i);
      a_mats.push_back(ag.has("A") ? ag.at("A").matrix() : Matrix(n, n));
      lipschitz.push_back(ag.number_or("output_lipschitz", 1.0));
    }
  }
  if (a_mats.empty()) agents.fail("network has no agents");
  const std::size_t N = a_mats.size();
  for (std::size_t i = 0; i < N; ++i) {
    if (a_mats[i].rows() != n || a_mats[i].cols() != n) agents.fail("agent matrix A must be state_dim x state_dim");
    AgentDynamics dyn;
    const Matrix a = a_mats[i];
    dyn.field = [a](std::span<const double> x, double, std::span<double> out) {
      const Vector y = a * x;
      std::copy(y.begin(), y.end(), out.begin());
    };
    dyn.jacobian = [a](std::span<const double>, double) { return a; };
    dyn.output_lipschitz = lipschitz[i];
    net.agents.push_back(std::move(dyn));
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (root.has("edges")) {
    const Node e = root.at("edges");
    for (std::size_t k = 0; k < e.size(); ++k) {
      const Node pair = e.at(k);
      if (pair.size() != 2) pair.fail("edge must be [receiver, sender]");
      const std::size_t i = pair.at(std::size_t{0}).count(), j = pair.at(std::size_t{1}).count();
      if (i >= N || j >= N || i == j) pair.fail("edge endpoints must be distinct agent indices");
      edges.emplace_back(i, j);
    }
  }

  std::optional<Node> delays;
  if (root.has("delays")) delays = root.at("delays");
  std::vector<std::optional<std::size_t>> edge_channel(edges.size());

  if (root.has("leader")) {
    const Node l = root.at("leader");
    if (l.string_or("kind", "constant") != "constant") l.fail("only constant leader signals are supported");
    const Vector value = l.at("value").vector();
    if (value.size() != n) l.at("value").fail("leader must have state_dim entries");
    net.leader = [value](double) { return value; };
    net.desired = [value](std::size_t, double) { return value; };
  }

  if (root.has("layers")) {
    const Node layers = root.at("layers");
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const Node layer = layers.at(li);
      const std::size_t k = layer.at("layer").count();
      if (k > net.integral_layers) layer.at("layer").fail("layer index exceeds integral_layers");
      auto square = [&](const char* key) {
        const Matrix g = layer.at(key).matrix();
        if (g.rows() != n || g.cols() != n) layer.at(key).fail("gain must be state_dim x state_dim");
        return g;
      };
      if (layer.has("self")) {
        for (std::size_t i = 0; i < N; ++i) net.terms.push_back(linear_term(i, k, {i}, {square("self")}));
      }
      if (layer.has("diffusive")) {
        const Matrix g = square("diffusive");
        for (const auto& [i, j] : edges) net.terms.push_back(linear_term(i, k, {i, j}, {-1.0 * g, g}));
      }
      if (layer.has("leader")) {
        if (!net.leader) layer.at("leader").fail("leader gain given but no leader signal");
        const Matrix g = square("leader");
        for (std::size_t i = 0; i < N; ++i)
          net.terms.push_back(linear_term(i, k, {i}, {-1.0 * g}, std::nullopt, g));
      }
      if (layer.has("delayed_diffusive")) {
        if (!delays) layer.fail("delayed coupling requires a 'delays' section");
        const Matrix g = square("delayed_diffusive");
        for (std::size_t e = 0; e < edges.size(); ++e) {
          const auto [i, j] = edges[e];
          if (!edge_channel[e]) {
            edge_channel[e] = net.delays.count();
            net.delays.channels.push_back(DelayChannel{i, j, parse_delay_fn(*delays, i)});
          }
          net.terms.push_back(linear_term(i, k, {i, j}, {-1.0 * g, g}, edge_channel[e]));
        }
      }
    }
  }
  if (delays) {
    net.delays.tau_max = delays->at("tau_max").number();
    if (!(net.delays.tau_max > 0.0)) delays->at("tau_max").fail("tau_max must be > 0");
  }

  if (root.has("disturbance")) {
    const Node d = root.at("disturbance");
    if (d.has("poly")) {
      const Node poly = d.at("poly");
      if (!poly.raw().is_object()) poly.fail("expected an object keyed by agent index");
      net.disturbance.poly.assign(N, {});
      for (auto it = poly.raw().begin(); it != poly.raw().end(); ++it) {
        const std::size_t i = agent_key(poly, it.key(), N);
        const Node coeffs(it.value(), poly.path() + "/" + it.key());
        for (std::size_t c = 0; c < coeffs.size(); ++c) {
          Vector v = coeffs.at(c).vector();
          if (v.size() != n) coeffs.at(c).fail("coefficient must have state_dim entries");
          net.disturbance.poly[i].push_back(std::move(v));
        }
        if (net.disturbance.poly[i].size() > net.integral_layers) {
          coeffs.fail("polynomial order exceeds integral_layers");
        }
      }
    }
    if (d.has("residual")) {
      const Node res = d.at("residual");
      if (!res.raw().is_object()) res.fail("expected an object keyed by agent index");
      net.disturbance.residual.assign(N, nullptr);
      net.disturbance.residual_bound.assign(N, 0.0);
      for (auto it = res.raw().begin(); it != res.raw().end(); ++it) {
        const std::size_t i = agent_key(res, it.key(), N);
        parse_residual(Node(it.value(), res.path() + "/" + it.key()), n, net.disturbance.residual[i],
                       net.disturbance.residual_bound[i]);
      }
    }
  }
  return in;
}

inline NetworkInput parse_mtdc_network(const Node& root) {
  NetworkInput in;
  mtdc::MtdcParams p;
  p.terminals = root.count_or("terminals", p.terminals);
  p.capacitance = root.number_or("capacitance", p.capacitance);
  p.resistance = root.number_or("resistance", p.resistance);
  p.delay_base = root.number_or("delay_base", p.delay_base);
  p.delay_amplitude = root.number_or("delay_amplitude", p.delay_amplitude);
  p.disturbance = root.boolean_or("disturbance", p.disturbance);
  p.disturbed_agent = root.count_or("disturbed_agent", p.disturbed_agent);
  const mtdc::GainVector g = root.has("gains") ? parse_gains(root.at("gains")) : mtdc::kReportedGains;
  try {
    in.network = mtdc::build_mtdc(p, g, p.capacitance);
  } catch (const ConfigError& e) {
    root.fail(e.what());
  }
  in.mtdc = p;
  return in;
}

}  // namespace detail

inline NetworkInput parse_network(const json& j) {
  const Node root(j, "");
  if (!j.is_object()) root.fail("network spec must be a JSON object");
  if (j.empty()) root.fail("empty network spec");
  const std::string kind = root.string_or("kind", "linear");
  NetworkInput in;
  if (kind == "linear") {
    in = detail::parse_linear_network(root);
  } else if (kind == "mtdc") {
    in = detail::parse_mtdc_network(root);
  } else {
    root.at("kind").fail("unknown network kind '" + kind + "' (expected linear or mtdc)");
  }
  try {
    in.network.validate();
  } catch (const ModelError& e) {
    root.fail(e.what());
  }
  if (root.has("sample_times")) {
    const Vector ts = root.at("sample_times").vector();
    if (ts.empty()) root.at("sample_times").fail("at least one sample time required");
    for (double t : ts) in.samples.push_back(SamplePoint{{}, {}, t});
  } else {
    in.samples.push_back(SamplePoint{{}, {}, 0.0});
  }
  return in;
}

inline Transformation parse_transform(const json& j, std::size_t agents, std::size_t dim) {
  const Node root(j, "");
  const std::string kind = root.string_or("kind", "identity");
  try {
    if (kind == "identity") return Transformation::identity(agents, dim);
    if (kind == "uniform") return Transformation::uniform(agents, root.at("block").matrix());
    if (kind == "mtdc") {
      if (dim != 3) root.fail("mtdc transform needs a 3-dimensional augmented state");
      const mtdc::TransformParams tp{root.number_or("alpha", -0.5), root.number_or("beta", -1.0)};
      return Transformation::uniform(agents, tp.block());
    }
    if (kind == "blocks") {
      const Node b = root.at("blocks");
      std::vector<Matrix> blocks;
      for (std::size_t i = 0; i < b.size(); ++i) blocks.push_back(b.at(i).matrix());
      return Transformation(std::move(blocks));
    }
  } catch (const DimensionError& e) {
    root.fail(e.what());
  }
  root.at("kind").fail("unknown transform kind '" + kind + "' (expected identity, uniform, mtdc or blocks)");
}

inline NormSpec parse_norm(const json& j, std::size_t agents) {
  const Node root(j, "");
  NormSpec spec;
  try {
    spec.local_p = parse_norm_kind(root.has("p") && root.at("p").raw().is_number()
                                       ? std::to_string(root.at("p").count())
                                       : root.string_or("p", "2"));
  } catch (const DomainError& e) {
    root.at("p").fail(e.what());
  }
  if (!root.has("eta") || (root.at("eta").raw().is_string() && root.at("eta").string() == "uniform")) {
    spec.eta.assign(agents, 1.0);
  } else {
    spec.eta = root.at("eta").vector();
    if (spec.eta.size() != agents) root.at("eta").fail("eta must have one weight per agent");
    for (double e : spec.eta)
      if (!(e > 0.0)) root.at("eta").fail("eta weights must be > 0");
  }
  return spec;
}

struct SimInput {
  SimConfig config;
  MetricsConfig metrics;
  std::size_t trace_stride = 1;
  std::optional<json> norm;
};

inline SimInput parse_sim(const json& j) {
  const Node root(j, "");
  if (!j.is_object()) root.fail("simulation config must be a JSON object");
  SimInput in;
  in.config.t0 = root.number_or("t0", 0.0);
  in.config.horizon = root.number_or("horizon", 10.0);
  in.config.dt = root.number_or("dt", 1e-3);
  if (root.has("initial")) {
    const Node init = root.at("initial");
    const std::string kind = init.string_or("kind", "values");
    if (kind == "normal") {
      in.config.random_initial = true;
      in.config.seed = init.count_or("seed", 1);
    } else if (kind == "values") {
      in.config.initial_state = init.at("values").vector();
    } else {
      init.at("kind").fail("unknown initial kind '" + kind + "' (expected normal or values)");
    }
  }
  in.metrics.tail_window = root.number_or("tail_window", in.metrics.tail_window);
  in.metrics.threshold = root.number_or("threshold", in.metrics.threshold);
  in.trace_stride = root.count_or("trace_stride", 1);
  if (in.trace_stride == 0) root.at("trace_stride").fail("must be >= 1");
  if (root.has("norm")) in.norm = root.at("norm").raw();
  try {
    in.config.validate();
  } catch (const ConfigError& e) {
    root.fail(e.what());
  }
  return in;
}

inline synthesis::SearchConfig parse_search(const json& j) {
  const Node root(j, "");
  if (!j.is_object()) root.fail("search config must be a JSON object");
  synthesis::SearchConfig cfg;
  if (root.has("alpha_grid")) cfg.alpha_grid = root.at("alpha_grid").vector();
  if (root.has("beta_grid")) cfg.beta_grid = root.at("beta_grid").vector();
  if (root.has("plant")) {
    const Node p = root.at("plant");
    cfg.plant.terminals = p.count_or("terminals", cfg.plant.terminals);
    cfg.plant.capacitance = p.number_or("capacitance", cfg.plant.capacitance);
    cfg.plant.resistance = p.number_or("resistance", cfg.plant.resistance);
    cfg.plant.degree = p.count_or("degree", cfg.plant.degree);
  }
  if (root.has("eta") && !(root.at("eta").raw().is_string() && root.at("eta").string() == "uniform")) {
    cfg.eta = root.at("eta").vector();
  }
  if (root.has("eta_grid")) {
    const Node g = root.at("eta_grid");
    if (g.raw().is_string()) {
      if (g.string() != "default") g.fail("expected 'default' or a list of weight vectors");
      cfg.eta_grid = synthesis::default_eta_grid(cfg.plant.terminals);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) cfg.eta_grid.push_back(g.at(i).vector());
    }
  }
  cfg.q = root.count_or("q", cfg.q);
  cfg.delay_free_max = root.number_or("delay_free_max", cfg.delay_free_max);
  cfg.delayed_max = root.number_or("delayed_max", cfg.delayed_max);
  if (root.has("start_grid")) cfg.start_grid = root.at("start_grid").vector();
  cfg.initial_step = root.number_or("initial_step", cfg.initial_step);
  cfg.min_step = root.number_or("min_step", cfg.min_step);
  cfg.ratio_resolution = root.count_or("ratio_resolution", cfg.ratio_resolution);
  cfg.bisection_iterations = static_cast<int>(root.count_or("bisection_iterations", 40));
  cfg.threads = root.count_or("threads", 0);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    root.fail(e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Outputs

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (double v : m.row(i)) row.push_back(v);
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const mtdc::GainVector& g) {
  return {{"k0", g.k0}, {"k1", g.k1}, {"k2", g.k2}, {"k0t", g.k0t}, {"k1t", g.k1t}, {"k2t", g.k2t}};
}

inline json to_json(const RowReport& r) { return {{"rows", r.rows}, {"max", r.max}, {"worst_agent", r.argmax}}; }

inline json to_json(const Certificate& c) {
  json blocks = json::array();
  // Identical blocks are common; store the distinct ones only when they differ.
  bool uniform = true;
  for (std::size_t i = 1; i < c.transform.size(); ++i) uniform = uniform && c.transform.block(i) == c.transform.block(0);
  if (c.transform.size() > 0) {
    if (uniform) {
      blocks.push_back(to_json(c.transform.block(0)));
    } else {
      for (const auto& b : c.transform.blocks()) blocks.push_back(to_json(b));
    }
  }
  json j = {
      {"feasible", c.feasible},
      {"reason", c.reason},
      {"sigma_bar", c.sigma_bar},
      {"sigma_under", c.sigma_under},
      {"lambda", c.lambda},
      {"tau_max", c.tau_max},
      {"cond_T", c.cond_T},
      {"output_lipschitz", c.output_lipschitz},
      {"delay_count", c.delay_count},
      {"samples", c.samples},
      {"c1", {{"max_residual", c.c1.max_residual}, {"passed", c.c1.passed}}},
      {"c2", to_json(c.c2)},
      {"c3", to_json(c.c3)},
      {"norm", {{"p", std::string(to_string(c.norm_spec.local_p))}, {"eta", c.norm_spec.eta}}},
      {"transform", {{"uniform", uniform}, {"blocks", blocks}}},
  };
  if (c.feasible) j["halanay_residual"] = halanay::rate_residual({c.sigma_bar, c.sigma_under, c.tau_max}, c.lambda);
  return j;
}

inline json to_json(const synthesis::Auxiliaries& a) {
  return {{"b1", a.b1}, {"b2", a.b2}, {"b3", a.b3}, {"b4", a.b4}, {"b5", a.b5},
          {"sigma_bar", a.sigma_bar}, {"sigma_under", a.sigma_under}};
}

inline json to_json(const synthesis::SynthesisResult& r) {
  json nodes = json::array();
  for (const auto& n : r.nodes) {
    nodes.push_back({{"alpha", n.transform.alpha}, {"beta", n.transform.beta}, {"feasible", n.feasible},
                     {"cost", n.cost}, {"cond_T", n.cond_T}});
  }
  json j = {{"feasible", r.feasible},
            {"gains", to_json(r.gains)},
            {"alpha", r.transform.alpha},
            {"beta", r.transform.beta},
            {"eta", r.eta},
            {"eta_source", r.eta_grid_index ? "eta_grid[" + std::to_string(*r.eta_grid_index) + "]" : "primary"},
            {"delayed_gain_sum", r.cost},
            {"cond_T", r.cond_T},
            {"cap_bound", r.cap_bound},
            {"auxiliaries", to_json(r.aux)},
            {"certified", r.certified},
            {"diagnostics", r.diagnostics},
            {"grid", nodes}};
  return j;
}

inline json to_json(const ErrorMetrics& m) {
  json j = {{"sup", m.sup}, {"tail_sup", m.tail_sup}, {"final_error", m.final_error},
            {"zeta_tail_sup", m.zeta_tail_sup}};
  j["time_to_threshold"] = m.time_to_threshold ? json(*m.time_to_threshold) : json(nullptr);
  return j;
}

inline json to_json(const HistorySups& s) { return {{"state", s.state}, {"zeta", s.zeta}, {"w", s.w}}; }

inline json to_json(const mtdc::CaseStudyReport& r, std::size_t trace_stride) {
  const auto& p = r.params;
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"passed", c.passed}});
  json j = {
      {"params",
       {{"terminals", p.terminals},
        {"capacitance", p.capacitance},
        {"design_capacitance", p.design_capacitance},
        {"resistance", p.resistance},
        {"disturbed_agent", p.disturbed_agent},
        {"delay_base", p.delay_base},
        {"delay_amplitude", p.delay_amplitude},
        {"disturbance", p.disturbance},
        {"horizon", p.horizon},
        {"dt", p.dt},
        {"seed", p.seed},
        {"trace_stride", trace_stride}}},
      {"gains", to_json(r.gains)},
      {"gains_source", r.synthesis ? "synthesis" : "file"},
      {"alpha", r.transform.alpha},
      {"beta", r.transform.beta},
      {"eta", r.eta},
      {"eta_source", r.eta_grid_index ? "eta_grid[" + std::to_string(*r.eta_grid_index) + "]" : "uniform"},
      {"design_certificate", to_json(r.design_certificate)},
      {"physical_certificate", to_json(r.physical_certificate)},
      {"metrics", to_json(r.metrics)},
      {"history_sups", to_json(r.sups)},
      {"max_abs_v0", r.max_v0},
      {"tail_max_abs_v", r.tail_max_v},
      {"tail_max_abs_u_plus_d", r.tail_max_u_plus_d},
      {"w_tail_envelope", r.w_tail_envelope},
      {"zeta12_tail", r.zeta12_tail},
      {"zeta12_band", r.zeta_band},
      {"envelope_min_slack", r.envelope_min_slack},
      {"synthesis_seconds", r.synthesis_seconds},
      {"simulation_seconds", r.simulation_seconds},
      {"checks", checks},
      {"passed", r.passed()},
  };
  if (r.synthesis) j["synthesis"] = to_json(*r.synthesis);
  return j;
}

}  // namespace mplex::io
