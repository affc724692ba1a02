#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mplex/synthesis.hpp"
#include "oracles.hpp"

using namespace mplex;
using namespace mplex::synthesis;
using mplex::mtdc::GainVector;
using mplex::mtdc::TransformParams;

namespace {

const GainVector kPaper = mplex::mtdc::kReportedGains;

SearchConfig small_config() {
  SearchConfig cfg;
  cfg.plant.terminals = 6;
  cfg.alpha_grid = {-1.0, -0.5, 0.0};
  cfg.beta_grid = {-1.5, -1.0, 0.0};
  cfg.q = 2;
  return cfg;
}

}  // namespace

TEST(Plant, BlocksMatchAssembledRingJacobian) {
  mtdc::MtdcParams p;
  p.terminals = 5;
  const MultiplexNetwork net = mtdc::build_mtdc(p, kPaper, 1.0);
  const JacobianBlocks jb = assemble_jacobian_blocks(net, SamplePoint{{}, {}, 0.0});
  PlantParams plant;
  plant.terminals = 5;
  const PlantBlocks pb = plant_blocks(kPaper, plant);
  for (const auto& d : jb.diagonal) EXPECT_EQ(d, pb.a_ii);
  ASSERT_EQ(jb.off_diagonal.size(), 10u);
  for (const auto& e : jb.off_diagonal) EXPECT_EQ(e.block, pb.a_ij);
  ASSERT_EQ(jb.delayed.size(), 10u);
  for (const auto& ch : jb.delayed) {
    ASSERT_EQ(ch.size(), 2u);
    for (const auto& e : ch) {
      for (std::size_t r = 0; r < 3; ++r)
        EXPECT_NEAR(e.block(r, 0), (e.row == e.col ? pb.b_ii : pb.b_ij)(r, 0), 1e-18);
    }
  }
}

TEST(Plant, EtaRatio) {
  EXPECT_DOUBLE_EQ(ring_eta_ratio(Vector(5, 2.0)), 1.0);
  EXPECT_DOUBLE_EQ(ring_eta_ratio(Vector{1.0, 2.0, 1.0, 1.0}), 2.0);
  EXPECT_THROW(ring_eta_ratio(Vector{1.0, 1.0}), DimensionError);
  EXPECT_THROW(ring_eta_ratio(Vector{1.0, 0.0, 1.0}), DomainError);
}

TEST(Lmi, NormLmiEquivalence) {
  std::mt19937_64 rng(29);
  for (int k = 0; k < 300; ++k) {
    const Matrix m = oracle::random_matrix(rng, 3, 3);
    const double norm = oracle::power_spectral_norm(m);
    for (double f : {0.9, 0.999, 1.001, 1.1}) {
      const bool psd = is_positive_semidefinite(norm_lmi(m, f * norm));
      EXPECT_EQ(psd, f > 1.0) << "trial " << k << " factor " << f;
    }
  }
}

TEST(Lmi, TightestAuxiliariesSatisfyTheSystem) {
  PlantParams plant;
  const TransformParams tp{-0.5, -1.0};
  const Vector eta(30, 1.0);
  const Verdict v = feasibility(kPaper, tp, eta, plant, 2);
  const LmiSystem sys = lmi_blocks(kPaper, tp, eta, plant, 2, v.aux);
  EXPECT_TRUE(sys.satisfied());
  EXPECT_EQ(sys.matrices.size(), 4u);
  Auxiliaries greedy = v.aux;
  greedy.b1 += 1e-4;  // claims more contraction than the diagonal block has
  EXPECT_FALSE(lmi_blocks(kPaper, tp, eta, plant, 2, greedy).satisfied());
  Auxiliaries loose = v.aux;
  loose.b3 -= 1e-4;
  EXPECT_FALSE(lmi_blocks(kPaper, tp, eta, plant, 2, loose).satisfied());
}

TEST(Feasibility, ReportedGainsFrozenValues) {
  PlantParams plant;
  const Vector eta(30, 1.0);
  const Verdict two = feasibility(kPaper, {-0.5, -1.0}, eta, plant, 2);
  EXPECT_TRUE(two.feasible);
  EXPECT_NEAR(two.aux.sigma_bar, 0.015424856074, 1e-11);
  EXPECT_NEAR(two.aux.sigma_under, 0.00287708185494, 1e-13);
  // With the conservative q = 60 the delayed budget exceeds sigma_bar.
  const Verdict sixty = feasibility(kPaper, {-0.5, -1.0}, eta, plant, 60);
  EXPECT_FALSE(sixty.feasible);
  EXPECT_NEAR(sixty.aux.sigma_under, 30.0 * two.aux.sigma_under, 1e-12);
}

TEST(Feasibility, AgreesWithCertifyOnTheDesignRing) {
  PlantParams plant;
  plant.terminals = 8;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 3.0), ud(0.0, 0.01), ab(-2.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const GainVector g{u(rng), u(rng), u(rng), ud(rng), ud(rng), ud(rng)};
    const TransformParams tp{ab(rng), ab(rng)};
    const Vector eta(8, 1.0);
    const Verdict v = feasibility(g, tp, eta, plant, 2);  // q = channels per terminal
    const Certificate c = certify_design(plant, g, tp, eta);
    EXPECT_NEAR(v.aux.sigma_bar, c.sigma_bar, 1e-12);
    EXPECT_NEAR(v.aux.sigma_under, c.sigma_under, 1e-12);
    EXPECT_EQ(v.feasible, c.feasible);
  }
}

TEST(Feasibility, SignChecks) {
  PlantParams plant;
  const Vector eta(30, 1.0);
  GainVector g = kPaper;
  g.k1 = -0.1;
  EXPECT_FALSE(feasibility(g, {}, eta, plant, 2).feasible);
  g = kPaper;
  g.k2 = 0.0;
  g.k2t = 0.0;
  const Verdict v = feasibility(g, {}, eta, plant, 2);
  EXPECT_FALSE(v.feasible);
  ASSERT_FALSE(v.violations.empty());
  EXPECT_NE(v.violations.front().find("k2"), std::string::npos);
}

TEST(Search, RatioSimplex) {
  const auto r = ratio_simplex(4);
  EXPECT_EQ(r.size(), 15u);
  for (const auto& v : r) EXPECT_NEAR(v[0] + v[1] + v[2], 1.0, 1e-15);
  EXPECT_EQ(r.front()[2], 1.0);
}

TEST(Search, DefaultEtaGrid) {
  const auto g = default_eta_grid(30, 4);
  ASSERT_EQ(g.size(), 7u);
  EXPECT_EQ(g[0], Vector(30, 1.0));
  EXPECT_DOUBLE_EQ(g[1][4], 1.05);
  EXPECT_DOUBLE_EQ(g[6][4], 0.75);
  for (const auto& e : g)
    for (double w : e) EXPECT_GT(w, 0.0);
}

TEST(Search, SmallRingIsFeasibleCertifiedAndThreadIndependent) {
  SearchConfig cfg = small_config();
  cfg.threads = 1;
  const SynthesisResult a = synthesize(cfg);
  cfg.threads = 4;
  const SynthesisResult b = synthesize(cfg);
  ASSERT_TRUE(a.feasible) << a.diagnostics;
  EXPECT_TRUE(a.certified) << a.certificate.reason;
  EXPECT_GT(a.cost, 0.0);
  EXPECT_EQ(a.gains, b.gains);
  EXPECT_EQ(a.grid_index, b.grid_index);
  EXPECT_EQ(a.nodes.size(), 9u);
  for (const auto& n : a.nodes) {
    if (!n.feasible) continue;
    EXPECT_LE(n.cost, a.cost + 1e-15);
    EXPECT_TRUE(feasibility(n.gains, n.transform, a.eta, cfg.plant, cfg.q).feasible);
  }
}

TEST(Search, CapBindsWithoutDelayedBudget) {
  SearchConfig cfg = small_config();
  cfg.q = 0;
  cfg.delayed_max = 0.5;
  const SynthesisResult r = synthesize(cfg);
  ASSERT_TRUE(r.feasible);
  EXPECT_TRUE(r.cap_bound);
  EXPECT_NEAR(r.cost, 0.5, 1e-15);
  EXPECT_NE(r.diagnostics.find("cap binds"), std::string::npos);
}

TEST(Search, IdentityTransformIsInfeasible) {
  SearchConfig cfg = small_config();
  cfg.alpha_grid = {0.0};
  cfg.beta_grid = {0.0};
  const SynthesisResult r = synthesize(cfg);
  EXPECT_FALSE(r.feasible);
  EXPECT_NE(r.diagnostics.find("failed"), std::string::npos);
}

TEST(Search, FallsBackToEtaGrid) {
  SearchConfig cfg = small_config();
  cfg.eta = {1.0, 100.0, 1.0, 100.0, 1.0, 100.0};  // neighbour ratio 100 kills C2
  cfg.eta_grid = {Vector(6, 1.0)};
  const SynthesisResult r = synthesize(cfg);
  ASSERT_TRUE(r.feasible);
  ASSERT_TRUE(r.eta_grid_index.has_value());
  EXPECT_EQ(*r.eta_grid_index, 0u);
  EXPECT_EQ(r.eta, Vector(6, 1.0));
}

TEST(Search, ConfigValidation) {
  SearchConfig cfg = small_config();
  cfg.alpha_grid.clear();
  EXPECT_THROW(synthesize(cfg), ConfigError);
  cfg = small_config();
  cfg.min_step = 1.0;
  EXPECT_THROW(synthesize(cfg), ConfigError);
  cfg = small_config();
  cfg.eta = Vector(5, 1.0);
  EXPECT_THROW(synthesize(cfg), ConfigError);
}

TEST(Search, DefaultMtdcInstanceFrozenResult) {
  const SynthesisResult r = synthesize(SearchConfig{});
  ASSERT_TRUE(r.feasible);
  EXPECT_TRUE(r.certified);
  EXPECT_FALSE(r.eta_grid_index.has_value());
  EXPECT_EQ(r.transform.alpha, -0.5);
  EXPECT_EQ(r.transform.beta, -1.5);
  EXPECT_EQ(r.gains.k0, 1.9375);
  EXPECT_EQ(r.gains.k1, 2.25);
  EXPECT_EQ(r.gains.k2, 0.75);
  EXPECT_NEAR(r.cost, 0.005800230576824106, 1e-12);
  EXPECT_NEAR(r.gains.k1t, 2.0 * r.gains.k0t, 1e-15);
}
