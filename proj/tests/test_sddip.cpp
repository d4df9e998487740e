#include <gtest/gtest.h>

#include <random>

#include "ddro/bench.hpp"
#include "ddro/sddip.hpp"
#include "test_util.hpp"

using namespace ddro;
using ddro::testing::exact_stage_value;
using ddro::testing::exact_value;
using ddro::testing::nonempty_at_all_states;
using ddro::testing::tiny_instance;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void expect_nondecreasing(const SolveReport& r) {
  const auto lbs = r.lb_per_iter();
  for (std::size_t i = 1; i < lbs.size(); ++i) EXPECT_GE(lbs[i], lbs[i - 1] - 1e-9 * std::max(1.0, std::abs(lbs[i])));
}

// Three-stage, two-facility Type 1 instance with decision-dependent means.
Instance three_stage_instance() {
  Instance in = tiny_instance(3, 2, 1, 4);
  in.lambda_mu = {{0.3, 0.6}};
  in.lambda_S = {{0.5, 0.2}};
  in.eps_mu = {6.0};
  in.eps_S_lo = {0.1};
  in.eps_S_hi = {60.0};
  in.h.assign(3, Vec(2, 12.0));
  for (int t = 1; t < 3; ++t) in.support[t] = {{4.0}, {10.0}, {16.0}, {22.0}};
  in.f = {{100.0, 100.0}, {100.0, 100.0}, {100.0, 100.0}};
  return in;
}

}  // namespace

TEST(Sddip, MatchesEnumerationTypes1And2) {
  for (AmbiguityType type : {AmbiguityType::Type1, AmbiguityType::Type2})
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      const Instance in = equivalence_instance(type, seed);
      const EnumResult e = enumerate_two_stage(in, type);
      ASSERT_EQ(e.status, "Optimal");
      SddipConfig cfg;
      cfg.type = type;
      const SolveReport r = run(in, cfg);
      ASSERT_EQ(r.status, "Optimal") << static_cast<int>(type) << " " << seed;
      EXPECT_LE(rel(r.objective(), e.objective), 1e-6) << static_cast<int>(type) << " " << seed;
      EXPECT_EQ(r.first_stage_x, e.best_x) << static_cast<int>(type) << " " << seed;
      EXPECT_GE(r.ub_estimate, r.lb - 1e-6 * std::max(1.0, std::abs(r.lb)));
      expect_nondecreasing(r);
    }
}

TEST(Sddip, ThreeStageMatchesRecursiveOracle) {
  const Instance in = three_stage_instance();
  ASSERT_TRUE(nonempty_at_all_states(in, AmbiguityType::Type1));
  const double exact = exact_value(in, AmbiguityType::Type1);
  SddipConfig cfg;
  cfg.max_iters = 50;
  const SolveReport r = run(in, cfg);
  EXPECT_EQ(r.ub_method, "tree");
  EXPECT_LE(r.lb, exact + 1e-6 * std::abs(exact));
  ASSERT_EQ(r.status, "Optimal");
  EXPECT_LE(rel(r.lb, exact), 1e-6);
  expect_nondecreasing(r);
}

TEST(Sddip, CutsAreValidAtEveryState) {
  std::vector<std::pair<Instance, AmbiguityType>> cases;
  cases.push_back({equivalence_instance(AmbiguityType::Type1, 3), AmbiguityType::Type1});
  cases.push_back({equivalence_instance(AmbiguityType::Type2, 5), AmbiguityType::Type2});
  cases.push_back({three_stage_instance(), AmbiguityType::Type1});
  {
    // I = 4 with a budget that allows two builds.
    GenOptions o;
    o.seed = 4;
    o.I = 4;
    o.K = 5;
    o.N = 200.0;
    cases.push_back({generate_instance(o), AmbiguityType::Type1});
  }
  long checked = 0;
  for (const auto& [in, type] : cases) {
    SddipConfig cfg;
    cfg.type = type;
    cfg.max_iters = 4;
    Sddip s(in, cfg);
    s.run();
    const CutPool& pool = s.pool();
    for (int t = 1; t < in.T; ++t)
      for (int k = 0; k < in.stage_K(t); ++k)
        for (int mask = 0; mask < (1 << in.I); ++mask) {
          Vec x(in.I);
          for (int i = 0; i < in.I; ++i) x[i] = (mask >> i) & 1;
          const double q = exact_stage_value(in, type, t, x, in.support[t][k]);
          for (const Cut& c : pool.cuts[t][k]) {
            double rhs = c.v;
            for (int i = 0; i < in.I; ++i) rhs += c.pi[i] * x[i];
            EXPECT_GE(q, rhs - 1e-6 * std::max(1.0, std::abs(q))) << "t " << t << " k " << k << " mask " << mask;
            ++checked;
          }
        }
  }
  EXPECT_GT(checked, 0);
}

TEST(Sddip, PatternOneOneOpensHighestMeanImpact) {
  const auto suite = pattern_suite(1);
  SddipConfig cfg;
  const SolveReport r = run(suite[0].inst, cfg);
  ASSERT_EQ(r.status, "Optimal");
  EXPECT_EQ(r.first_stage_x, (Vec{1, 0, 0}));
}

TEST(Sddip, PatternOneTwoTiesPickLexicographicallySmallest) {
  const auto suite = pattern_suite(1);
  const Instance& in = suite[1].inst;
  const EnumResult e = enumerate_two_stage(in, AmbiguityType::Type1);
  std::vector<double> singles;
  for (const Candidate& c : e.table)
    if (c.x[0] + c.x[1] + c.x[2] == 1) singles.push_back(c.value);
  ASSERT_EQ(singles.size(), 3u);
  EXPECT_NEAR(singles[0], singles[1], 1e-6 * std::abs(singles[0]));
  EXPECT_NEAR(singles[0], singles[2], 1e-6 * std::abs(singles[0]));
  const SolveReport r = run(in, SddipConfig{});
  EXPECT_EQ(r.first_stage_x, (Vec{0, 0, 1}));
  EXPECT_EQ(e.best_x, (Vec{0, 0, 1}));
}

// With one realization the ambiguity set is the point mass, so the problem is
// the deterministic two-stage MILP; solve it in one model.
TEST(Sddip, SingleScenarioMatchesExtensiveForm) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    GenOptions o;
    o.seed = seed;
    o.K = 1;
    o.J = 2;
    o.eps_mu = 1e3;
    o.eps_S_lo = 0.0;
    o.eps_S_hi = 1e3;
    Instance in = generate_instance(o);
    in.Sigma_bar = SymMatrix::identity(in.J);
    in.gamma = 1e6;
    in.eta_cov = 1e6;

    StageBlock a = build_stage_block(in, 0, Vec(in.I, 0.0), in.support[0][0]);
    StageBlockOptions copy;
    copy.copy_state = true;
    const StageBlock b = build_stage_block(in, 1, Vec(in.I, 0.0), in.support[1][0], copy);
    LinearModel m = a.model;
    const int off = m.num_vars();
    for (int j = 0; j < b.model.num_vars(); ++j)
      m.add_var(b.model.names[j], b.model.lower[j], b.model.upper[j], b.model.kind[j], b.model.obj[j]);
    for (Row r : b.model.rows) {
      for (Term& t : r.terms) t.col += off;
      m.rows.push_back(std::move(r));
    }
    for (int i = 0; i < in.I; ++i)
      m.add_row({{off + b.layout.prev_col(i), 1.0}, {a.layout.x_col(i), -1.0}}, Relation::Equal, 0.0);
    const MipSolution direct = solve_milp(m);
    ASSERT_EQ(direct.status, MipStatus::Optimal);

    for (AmbiguityType type : {AmbiguityType::Type1, AmbiguityType::Type3}) {
      SddipConfig cfg;
      cfg.type = type;
      cfg.bound_mode = type == AmbiguityType::Type3 ? BoundMode::Lower : BoundMode::Exact;
      const SolveReport r = run(in, cfg);
      ASSERT_EQ(r.status, "Optimal") << seed;
      EXPECT_LE(rel(r.lb, direct.objective), 1e-6) << seed << " type " << static_cast<int>(type);
    }
  }
}

TEST(Sddip, DeterministicReports) {
  const Instance in = equivalence_instance(AmbiguityType::Type2, 7);
  SddipConfig cfg;
  cfg.type = AmbiguityType::Type2;
  cfg.num_paths = 2;
  cfg.seed = 42;
  const SolveReport a = run(in, cfg), b = run(in, cfg);
  EXPECT_EQ(to_json(a, false).dump(), to_json(b, false).dump());
  EXPECT_EQ(to_csv(a, false), to_csv(b, false));
  EXPECT_EQ(a.stage_solves, b.stage_solves);
}

TEST(Sddip, RiskWithZeroLambdaMatchesNeutral) {
  for (int idx = 0; idx < 4; ++idx) {
    const Instance in = pattern_suite(1)[idx].inst;  // risk_lambda is zero
    SddipConfig neutral, averse;
    averse.risk = true;
    const SolveReport a = run(in, neutral), b = run(in, averse);
    const auto la = a.lb_per_iter(), lb = b.lb_per_iter();
    ASSERT_EQ(la.size(), lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) EXPECT_LE(rel(lb[i], la[i]), 1e-8);
    EXPECT_EQ(a.first_stage_x, b.first_stage_x);
  }
}

TEST(Sddip, RiskAverseMatchesEnumeration) {
  for (double lambda : {0.25, 0.5, 1.0}) {
    Instance in = equivalence_instance(AmbiguityType::Type1, 2);
    in.risk_lambda.assign(in.T, lambda);
    in.risk_alpha.assign(in.T, 0.8);
    const EnumResult e = enumerate_two_stage(in, AmbiguityType::Type1, true);
    SddipConfig cfg;
    cfg.risk = true;
    const SolveReport r = run(in, cfg);
    ASSERT_EQ(r.status, "Optimal");
    EXPECT_LE(rel(r.lb, e.objective), 1e-6) << lambda;
  }
}

TEST(Sddip, EmptyAmbiguityReportsUnbounded) {
  Instance in = tiny_instance(2, 2, 1, 3);
  in.support[1] = {{30.0}, {35.0}, {40.0}};  // mean window is [5, 15]
  const SolveReport r = run(in, SddipConfig{});
  EXPECT_EQ(r.status, "Unbounded");
  EXPECT_EQ(r.empty_stage, 1);
  EXPECT_FALSE(r.message.empty());
}

TEST(Sddip, ConfigFromJson) {
  const auto j = nlohmann::json::parse(
      R"({"type": 2, "max_iters": 7, "num_paths": 3, "tol": 1e-5, "seed": 9, "bound_mode": "lb",
          "lagrangian": {"rule": "subgradient", "max_iters": 20}})");
  const SddipConfig c = config_from_json(j);
  EXPECT_EQ(c.type, AmbiguityType::Type2);
  EXPECT_EQ(c.max_iters, 7);
  EXPECT_EQ(c.num_paths, 3);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.bound_mode, BoundMode::Lower);
  EXPECT_EQ(c.lagrangian.rule, StepRule::Subgradient);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"max_iters": 0})")), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"bound_mode": "mid"})")), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"type": 4})")), ValidationError);
}

TEST(Sddip, JsonReportWritesInfinityAsString) {
  SolveReport r;
  const auto j = to_json(r);
  EXPECT_EQ(j["lb"], "-inf");
  EXPECT_EQ(j["ub_estimate"], "inf");
}

// The Lagrangian dual of a function on binary points is tight at every vertex.
namespace {

std::function<MipSolution(const Vec&)> table_oracle(const std::vector<double>& f, int I) {
  return [f, I](const Vec& pi) {
    MipSolution s;
    s.status = MipStatus::Optimal;
    s.objective = kInf;
    for (int mask = 0; mask < (1 << I); ++mask) {
      double v = f[mask];
      for (int i = 0; i < I; ++i) v -= pi[i] * ((mask >> i) & 1);
      if (v < s.objective) {
        s.objective = v;
        s.values.assign(I, 0.0);
        for (int i = 0; i < I; ++i) s.values[i] = (mask >> i) & 1;
      }
    }
    return s;
  };
}

}  // namespace

TEST(Lagrangian, OneDimensionalGrid) {
  const std::vector<double> f = {5.0, 2.0};
  for (double xhat : {0.0, 1.0}) {
    const LagrangianResult r = lagrangian_dual(table_oracle(f, 1), {xhat}, 100.0, {});
    double grid = -kInf;
    for (int g = -4000; g <= 4000; ++g) {
      const double pi = g * 0.025;
      grid = std::max(grid, std::min(f[0], f[1] - pi) + pi * xhat);
    }
    EXPECT_NEAR(r.value, grid, 1e-6);
    EXPECT_NEAR(r.value, f[static_cast<int>(xhat)], 1e-6);
  }
}

TEST(Lagrangian, TightAtVerticesBothRules) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int I = 2 + trial % 2;
    std::vector<double> f(1 << I);
    for (double& v : f) v = u(rng);
    for (int mask = 0; mask < (1 << I); ++mask) {
      Vec xhat(I);
      for (int i = 0; i < I; ++i) xhat[i] = (mask >> i) & 1;
      const LagrangianResult k = lagrangian_dual(table_oracle(f, I), xhat, 1e3, {});
      EXPECT_NEAR(k.value, f[mask], 1e-6 * std::max(1.0, std::abs(f[mask])));
      LagrangianOptions sg;
      sg.rule = StepRule::Subgradient;
      sg.max_iters = 50;
      const LagrangianResult s = lagrangian_dual(table_oracle(f, I), xhat, 1e3, sg);
      EXPECT_LE(s.value, f[mask] + 1e-9 * std::max(1.0, std::abs(f[mask])));
    }
  }
}
