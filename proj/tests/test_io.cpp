#include <gtest/gtest.h>

#include <string>

#include "mplex/io.hpp"

using namespace mplex;
using namespace mplex::io;

namespace {

std::string data(const std::string& name) { return std::string(MPLEX_DATA_DIR) + "/" + name; }

// Runs f and returns the ParseError message, or "" when nothing was thrown.
template <class F>
std::string parse_error(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Json, SyntaxErrorsCarryLineAndColumn) {
  const std::string msg = parse_error([] { parse_json_text("{\n  \"a\": 1,\n  \"b\": ]\n}", "x.json"); });
  EXPECT_EQ(msg.rfind("x.json:3:8:", 0), 0u) << msg;
  const std::string file = parse_error([] { load_json_file(data("malformed.json")); });
  EXPECT_NE(file.find("malformed.json:4:"), std::string::npos) << file;
  EXPECT_NE(parse_error([] { load_json_file(data("missing.json")); }).find("cannot open"), std::string::npos);
}

TEST(Network, SemanticErrorsCarryPointers) {
  EXPECT_NE(parse_error([] { parse_network(json::object()); }).find("empty network spec"), std::string::npos);
  EXPECT_NE(parse_error([] { parse_network(json::array()); }).find("JSON object"), std::string::npos);
  EXPECT_EQ(parse_error([] { parse_network(json{{"kind", "tree"}}); }).rfind("/kind:", 0), 0u);

  json j = load_json_file(data("toy_network.json"));
  j["layers"][0]["self"] = json{{1.0, 2.0}};
  EXPECT_EQ(parse_error([&] { parse_network(j); }).rfind("/layers/0/self:", 0), 0u);

  j = load_json_file(data("toy_network.json"));
  j["edges"][2] = json{1, 1};
  EXPECT_EQ(parse_error([&] { parse_network(j); }).rfind("/edges/2:", 0), 0u);

  j = load_json_file(data("toy_network.json"));
  j["disturbance"]["poly"]["7"] = json{{1.0}};
  EXPECT_NE(parse_error([&] { parse_network(j); }).find("out of range"), std::string::npos);

  j = load_json_file(data("toy_network.json"));
  j["delays"]["amplitude"] = 0.1;
  EXPECT_EQ(parse_error([&] { parse_network(j); }).rfind("/delays:", 0), 0u);

  j = load_json_file(data("mtdc_design.json"));
  j["gains"]["k1t"] = -1.0;
  EXPECT_EQ(parse_error([&] { parse_network(j); }).rfind("/gains:", 0), 0u);
}

TEST(Network, LinearToyStructure) {
  const NetworkInput in = parse_network(load_json_file(data("toy_network.json")));
  const MultiplexNetwork& net = in.network;
  EXPECT_EQ(net.size(), 3u);
  EXPECT_EQ(net.augmented_dim(), 2u);
  EXPECT_EQ(net.delays.count(), 6u);
  EXPECT_DOUBLE_EQ(net.delays.delay(0, 0.0), 0.05 + 0.02 * std::sin(1.0));
  EXPECT_EQ(in.samples.size(), 3u);
  EXPECT_DOUBLE_EQ(net.disturbance.residual_bound[0], 0.2);
  EXPECT_FALSE(in.mtdc.has_value());
  const JacobianBlocks b = assemble_jacobian_blocks(net, in.samples[0]);
  // -0.5 (plant) - 1 (self gain) - 2 * 0.1 (diffusive)
  const Matrix want{{-1.7, 1.0}, {-1.0, 0.0}};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(b.diagonal[0](r, c), want(r, c), 1e-15);
}

TEST(Network, MtdcPresetMatchesBuilder) {
  const NetworkInput in = parse_network(load_json_file(data("mtdc_design.json")));
  ASSERT_TRUE(in.mtdc.has_value());
  EXPECT_EQ(in.mtdc->capacitance, 1.0);
  const auto t = parse_transform(load_json_file(data("mtdc_transform.json")), 30, 3);
  const auto spec = parse_norm(load_json_file(data("norm_uniform.json")), 30);
  const Certificate c = certify(in.network, t, spec, in.samples);
  const Certificate ref = mtdc::certify_ring(*in.mtdc, mtdc::kReportedGains, {-0.5, -1.0}, Vector(30, 1.0), 1.0);
  EXPECT_TRUE(c.feasible);
  EXPECT_EQ(c.sigma_bar, ref.sigma_bar);
  EXPECT_EQ(c.sigma_under, ref.sigma_under);
}

TEST(Transform, Kinds) {
  EXPECT_EQ(parse_transform(json::object(), 2, 3).block(1), Matrix::identity(3));
  EXPECT_EQ(parse_transform(json{{"kind", "mtdc"}}, 2, 3).block(0), (mtdc::TransformParams{}.block()));
  const json blocks = {{"kind", "blocks"}, {"blocks", {{{2.0}}, {{3.0}}}}};
  EXPECT_EQ(parse_transform(blocks, 2, 1).block(1), (Matrix{{3.0}}));
  EXPECT_THROW(parse_transform(json{{"kind", "mtdc"}}, 2, 2), ParseError);
  EXPECT_THROW(parse_transform(json{{"kind", "diag"}}, 2, 2), ParseError);
  EXPECT_THROW(parse_transform(json{{"kind", "uniform"}, {"block", {{1.0, 1.0}, {1.0, 1.0}}}}, 2, 2), TransformError);
}

TEST(Norm, WeightsAndLocalNorm) {
  EXPECT_EQ(parse_norm(json::object(), 3).eta, Vector(3, 1.0));
  const NormSpec s = parse_norm(json{{"p", "inf"}, {"eta", {1.0, 2.0}}}, 2);
  EXPECT_EQ(s.local_p, NormKind::Inf);
  EXPECT_EQ(parse_norm(json{{"p", 1}}, 1).local_p, NormKind::One);
  EXPECT_EQ(parse_error([] { parse_norm(json{{"eta", {1.0, 0.0}}}, 2); }).rfind("/eta:", 0), 0u);
  EXPECT_EQ(parse_error([] { parse_norm(json{{"eta", {1.0}}}, 2); }).rfind("/eta:", 0), 0u);
  EXPECT_EQ(parse_error([] { parse_norm(json{{"p", "3"}}, 2); }).rfind("/p:", 0), 0u);
}

TEST(Sim, ConfigParsing) {
  const SimInput in = parse_sim(load_json_file(data("toy_sim.json")));
  EXPECT_TRUE(in.config.random_initial);
  EXPECT_EQ(in.config.seed, 7u);
  EXPECT_EQ(in.trace_stride, 100u);
  EXPECT_DOUBLE_EQ(in.metrics.tail_window, 2.0);
  EXPECT_EQ(parse_error([] { parse_sim(json{{"trace_stride", 0}}); }).rfind("/trace_stride:", 0), 0u);
  EXPECT_EQ(parse_error([] { parse_sim(json{{"dt", -1.0}}); }).rfind("/:", 0), 0u);
  EXPECT_EQ(parse_error([] { parse_sim(json{{"initial", {{"kind", "zeros"}}}}); }).rfind("/initial/kind:", 0), 0u);
  EXPECT_EQ(parse_error([] { parse_sim(json{{"horizon", "long"}}); }).rfind("/horizon:", 0), 0u);
}

TEST(Search, ConfigParsing) {
  const synthesis::SearchConfig cfg = parse_search(load_json_file(data("mtdc_search.json")));
  EXPECT_EQ(cfg.alpha_grid.size(), 7u);
  EXPECT_EQ(cfg.q, 60u);
  EXPECT_EQ(cfg.plant.terminals, 30u);
  EXPECT_EQ(cfg.eta_grid.size(), 7u);
  EXPECT_TRUE(cfg.eta.empty());
  EXPECT_EQ(parse_error([] { parse_search(json{{"eta_grid", "all"}}); }).rfind("/eta_grid:", 0), 0u);
  EXPECT_THROW(parse_search(json{{"alpha_grid", json::array()}}), ParseError);
}

TEST(Gains, FileRoundTrip) {
  const json j = load_json_file(data("reported_gains.json"));
  const Node root(j, "");
  EXPECT_EQ(parse_gains(root.at("gains")), mtdc::kReportedGains);
  const auto tp = parse_optional_transform_params(root);
  ASSERT_TRUE(tp.has_value());
  EXPECT_EQ(tp->beta, -1.0);
  EXPECT_EQ(to_json(mtdc::kReportedGains), j["gains"]);
  EXPECT_FALSE(parse_optional_transform_params(Node(json::object(), "")).has_value());
}

TEST(Output, CertificateFields) {
  const Certificate c = mtdc::certify_ring(mtdc::MtdcParams{}, mtdc::kReportedGains, {}, Vector(30, 1.0), 1.0);
  const json j = to_json(c);
  EXPECT_TRUE(j["feasible"].get<bool>());
  EXPECT_EQ(j["delay_count"], 60);
  EXPECT_EQ(j["transform"]["uniform"], true);
  EXPECT_EQ(j["transform"]["blocks"].size(), 1u);
  EXPECT_EQ(j["c2"]["rows"].size(), 30u);
  EXPECT_LT(j["halanay_residual"].get<double>(), 1e-12);
  EXPECT_EQ(j["norm"]["p"], "2");

  const Certificate bad = mtdc::certify_ring(mtdc::MtdcParams{}, mtdc::kReportedGains, {}, Vector(30, 1.0), 1e-3);
  const json jb = to_json(bad);
  EXPECT_FALSE(jb.contains("halanay_residual"));
  EXPECT_EQ(jb["reason"].get<std::string>().rfind("C2 violated", 0), 0u);
}

TEST(Output, MetricsNullThreshold) {
  ErrorMetrics m;
  m.sup = 1.0;
  EXPECT_TRUE(to_json(m)["time_to_threshold"].is_null());
  m.time_to_threshold = 2.5;
  EXPECT_EQ(to_json(m)["time_to_threshold"], 2.5);
}
