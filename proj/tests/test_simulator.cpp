#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mplex/simulator.hpp"
#include "oracles.hpp"

using namespace mplex;

namespace {

// x' = A x with A = [[-0.1, 1], [-1, -0.1]]; exact flow e^{-0.1 t} R(t).
MultiplexNetwork damped_rotation() {
  MultiplexNetwork net;
  net.state_dim = 2;
  AgentDynamics a;
  const Matrix m{{-0.1, 1.0}, {-1.0, -0.1}};
  a.field = [m](std::span<const double> x, double, std::span<double> out) {
    const Vector y = m * x;
    std::copy(y.begin(), y.end(), out.begin());
  };
  a.jacobian = [m](std::span<const double>, double) { return m; };
  net.agents.push_back(a);
  return net;
}

double rotation_error(double dt, double horizon) {
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.dt = dt;
  cfg.initial_state = {1.0, 0.0};
  const Trace tr = simulate(damped_rotation(), cfg, NormSpec::uniform(1));
  const double t = tr.times.back();
  const double e = std::exp(-0.1 * t);
  const auto x = tr.x_at(tr.size() - 1);
  return std::hypot(x[0] - e * std::cos(t), x[1] + e * std::sin(t));
}

// x' = -x(t - 0.1), x = 1 on [-0.1, 0].
MultiplexNetwork delayed_scalar(double tau = 0.1) {
  MultiplexNetwork net;
  net.agents.resize(1);
  net.delays.tau_max = tau;
  net.delays.channels.push_back({0, 0, [tau](double) { return tau; }});
  net.terms.push_back(linear_term(0, 0, {0}, {Matrix{{-1.0}}}, 0));
  return net;
}

SimConfig delayed_config(double dt, double horizon) {
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.dt = dt;
  cfg.initial_state = {1.0};
  cfg.x_history = [](std::size_t, double, std::span<double> out) { out[0] = 1.0; };
  return cfg;
}

}  // namespace

TEST(Sampler, DeterministicWithUnitMoments) {
  NormalSampler a(42), b(42), c(43);
  double s = 0.0, s2 = 0.0;
  bool differs = false;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double v = a();
    ASSERT_EQ(v, b());
    differs = differs || v != c();
    s += v;
    s2 += v * v;
  }
  EXPECT_TRUE(differs);
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Sampler, FrozenFirstDraws) {
  NormalSampler a(1);
  const double first = a(), second = a();
  NormalSampler b(1);
  EXPECT_EQ(b(), first);
  EXPECT_EQ(b(), second);
  EXPECT_NE(first, second);
}

TEST(Integrator, FourthOrderOnSmoothProblem) {
  const double e1 = rotation_error(0.1, 4.0), e2 = rotation_error(0.05, 4.0), e3 = rotation_error(0.025, 4.0);
  EXPECT_GE(e1 / e2, 12.0);
  EXPECT_LE(e1 / e2, 20.0);
  EXPECT_GE(e2 / e3, 12.0);
  EXPECT_LE(e2 / e3, 20.0);
}

TEST(Integrator, DelayedScalarMatchesMethodOfSteps) {
  const oracle::StepsSolution exact(0.1, 40);
  const Trace tr = simulate(delayed_scalar(), delayed_config(1e-3, 3.0), NormSpec::uniform(1));
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(tr.x[k] - exact(tr.times[k])));
  EXPECT_LE(worst, 1e-6);
}

TEST(Integrator, DelayOffMeshUsesInterpolation) {
  // tau = 0.1234 is not a multiple of dt, so lookups fall between mesh points.
  const double tau = 0.1234;
  const oracle::StepsSolution exact(tau, 40);
  const Trace tr = simulate(delayed_scalar(tau), delayed_config(1e-3, 2.0), NormSpec::uniform(1));
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(tr.x[k] - exact(tr.times[k])));
  EXPECT_LE(worst, 1e-5);
}

TEST(Integrator, DelayGuard) {
  MultiplexNetwork net = delayed_scalar(0.1);
  EXPECT_THROW(simulate(net, delayed_config(0.02, 1.0), NormSpec::uniform(1)), ConfigError);
  const DelayGuard g = check_delay_guard(net, delayed_config(0.01, 1.0));
  EXPECT_DOUBLE_EQ(g.median, 0.1);
  net.delays.channels[0].tau = [](double t) { return 0.05 + t; };
  EXPECT_THROW(simulate(net, delayed_config(1e-3, 1.0), NormSpec::uniform(1)), ScheduleError);
}

TEST(History, UnderflowAndPreHistory) {
  HermiteHistory h(1, 0.0, 0.1, 0.5, [](std::size_t, double s, std::span<double> out) { out[0] = s; }, 1);
  Vector out(1);
  h.push(Vector{2.0});
  h.lookup(0, -0.25, out);
  EXPECT_DOUBLE_EQ(out[0], -0.25);
  h.lookup(0, 0.0, out);
  EXPECT_DOUBLE_EQ(out[0], 2.0);
  EXPECT_THROW(h.lookup(0, -0.6, out), HistoryUnderflowError);
}

TEST(History, CubicHermiteIsExactForCubics) {
  auto f = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t * t; };
  auto df = [](double t) { return -2.0 + 1.5 * t * t; };
  HermiteHistory h(1, 0.0, 0.1, 1.0, nullptr, 1);
  for (int p = 0; p <= 5; ++p) {
    h.push(Vector{f(0.1 * p)});
    h.set_derivative(Vector{df(0.1 * p)});
  }
  Vector out(1);
  for (double s : {0.03, 0.17, 0.255, 0.449}) {
    h.lookup(0, s, out);
    EXPECT_NEAR(out[0], f(s), 1e-14);
  }
}

TEST(Trace, LayoutScalingAndCsv) {
  MultiplexNetwork net;
  net.integral_layers = 1;
  net.agents.resize(2);
  net.input_scale = {1.0, 10.0};
  for (std::size_t i = 0; i < 2; ++i) {
    net.terms.push_back(linear_term(i, 0, {i}, {Matrix{{-1.0}}}));
    net.terms.push_back(linear_term(i, 1, {i}, {Matrix{{-0.5}}}));
  }
  SimConfig cfg;
  cfg.horizon = 0.5;
  cfg.dt = 0.01;
  cfg.initial_state = {1.0, -2.0};
  const Trace tr = simulate(net, cfg, NormSpec::uniform(2));
  ASSERT_EQ(tr.size(), 51u);
  EXPECT_EQ(tr.r.size(), 51u * 2);
  EXPECT_DOUBLE_EQ(tr.u_at(0)[0], -1.0);
  EXPECT_DOUBLE_EQ(tr.u_at(0)[1], 20.0);  // physical input = 10 * model input
  EXPECT_DOUBLE_EQ(tr.error[0], 2.0);
  EXPECT_NEAR(tr.layer(50, 1, 1)[0], tr.r[50 * 2 + 1], 0.0);

  std::ostringstream os;
  write_trace_csv(os, tr, 20);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  EXPECT_EQ(header, "t,x0_0,x1_0,r1_0_0,r1_1_0,u0_0,u1_0,y_err");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4u);  // rows 0, 20, 40 and the last
  EXPECT_THROW(write_trace_csv(os, tr, 0), ConfigError);
}

TEST(Trace, SeededRunsAreReproducible) {
  MultiplexNetwork net = delayed_scalar();
  net.agents.resize(3);
  SimConfig cfg = delayed_config(0.005, 1.0);
  cfg.initial_state.clear();
  cfg.x_history = nullptr;
  cfg.random_initial = true;
  cfg.seed = 9;
  const Trace a = simulate(net, cfg, NormSpec::uniform(3));
  const Trace b = simulate(net, cfg, NormSpec::uniform(3));
  EXPECT_EQ(a.x, b.x);
  cfg.seed = 10;
  EXPECT_NE(a.x, simulate(net, cfg, NormSpec::uniform(3)).x);
}

TEST(Metrics, ExponentialDecay) {
  MultiplexNetwork net;
  net.agents.resize(1);
  net.terms.push_back(linear_term(0, 0, {0}, {Matrix{{-1.0}}}));
  SimConfig cfg;
  cfg.horizon = 10.0;
  cfg.dt = 1e-3;
  cfg.initial_state = {1.0};
  const Trace tr = simulate(net, cfg, NormSpec::uniform(1));
  const ErrorMetrics m = error_metrics(tr, net, NormSpec::uniform(1), MetricsConfig{2.0, 1e-3});
  EXPECT_NEAR(m.sup, 1.0, 1e-15);
  EXPECT_NEAR(m.tail_sup, std::exp(-8.0), 1e-10);
  EXPECT_NEAR(m.final_error, std::exp(-10.0), 1e-10);
  ASSERT_TRUE(m.time_to_threshold.has_value());
  EXPECT_NEAR(*m.time_to_threshold, std::log(1000.0), 1e-3);
}

TEST(Metrics, HistorySupsAndEnvelopeViolation) {
  MultiplexNetwork net = delayed_scalar(0.2);
  net.integral_layers = 1;
  net.disturbance.poly = {{Vector{0.5}}};
  net.disturbance.residual_bound = {0.3};
  SimConfig cfg = delayed_config(0.01, 1.0);
  cfg.x_history = [](std::size_t, double s, std::span<double> out) { out[0] = 1.0 - 4.0 * s; };
  const HistorySups s = history_sups(net, cfg, NormSpec::uniform(1), cfg.initial_state);
  EXPECT_NEAR(s.state, 1.8, 1e-12);  // at s = -0.2
  ASSERT_EQ(s.zeta.size(), 1u);
  EXPECT_NEAR(s.zeta[0], 0.5, 1e-15);
  EXPECT_NEAR(s.w, 0.3, 1e-15);

  Certificate c;
  c.feasible = true;
  c.sigma_bar = 1.0;
  c.lambda = 1.0;
  Trace tr;
  tr.times = {0.0, 1.0, 2.0};
  tr.error = {1.0, 0.3, 0.1};
  EXPECT_FALSE(envelope_violation(tr, iss_envelope(c, HistorySups{1.0, {}, 0.0})).has_value());
  tr.error[1] = 0.4;  // envelope e^{-1} = 0.368
  EXPECT_EQ(envelope_violation(tr, iss_envelope(c, HistorySups{1.0, {}, 0.0})), std::optional<std::size_t>(1));
}
