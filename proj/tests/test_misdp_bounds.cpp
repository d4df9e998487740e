#include <gtest/gtest.h>

#include <random>

#include "ddro/bench.hpp"
#include "ddro/misdp.hpp"
#include "ddro/sddip.hpp"

using namespace ddro;

namespace {

// Model whose first n*n columns are a symmetric block (upper triangle shared).
struct BlockModel {
  LinearModel m;
  PsdBlockRef b;
};

BlockModel block_model(int n, double lo, double hi, const std::string& name = "Z") {
  BlockModel out;
  out.b.name = name;
  out.b.dim = n;
  out.b.cols.assign(n, std::vector<int>(n, -1));
  for (int a = 0; a < n; ++a)
    for (int c = a; c < n; ++c)
      out.b.cols[a][c] = out.b.cols[c][a] =
          out.m.add_var("B" + std::to_string(a) + std::to_string(c), lo, hi);
  return out;
}

void fix_block(BlockModel& bm, const SymMatrix& s) {
  for (int a = 0; a < bm.b.dim; ++a)
    for (int c = a; c < bm.b.dim; ++c) {
      const int col = bm.b.cols[a][c];
      bm.m.lower[col] = bm.m.upper[col] = s(a, c);
    }
}

Instance tight_type3(std::uint64_t seed) {
  Instance in = equivalence_instance(AmbiguityType::Type3, seed);
  in.gamma = 0.5;
  in.eta_cov = 1.5;
  return in;
}

double rel_slack(double v) { return 1e-6 * std::max(1.0, std::abs(v)); }

}  // namespace

TEST(Outer, AlreadyPsdAddsNoCuts) {
  BlockModel bm = block_model(2, -10.0, 10.0);
  fix_block(bm, SymMatrix{{2.0, 0.5}, {0.5, 1.0}});
  const OuterResult r = solve_misdp_outer(bm.m, {bm.b});
  ASSERT_EQ(r.mip.status, MipStatus::Optimal);
  EXPECT_EQ(r.eigen_cuts, 0);
  EXPECT_EQ(r.mip.nodes, 1);
}

TEST(Outer, MinimizeCornerEntry) {
  // Z = [[1, 1], [1, z3]] is PSD iff z3 >= 1.
  BlockModel bm = block_model(2, -100.0, 100.0);
  fix_block(bm, SymMatrix{{1.0, 1.0}, {1.0, 0.0}});
  const int z3 = bm.b.cols[1][1];
  bm.m.lower[z3] = -100.0;
  bm.m.upper[z3] = 100.0;
  bm.m.obj[z3] = 1.0;
  const OuterResult r = solve_misdp_outer(bm.m, {bm.b});
  ASSERT_EQ(r.mip.status, MipStatus::Optimal);
  EXPECT_NEAR(r.mip.objective, 1.0, 1e-5);
  EXPECT_GT(r.eigen_cuts, 0);
  EXPECT_GE(min_block_eigenvalue({bm.b}, r.mip.values), -kEigenCutTol);
}

TEST(Outer, IntegerCoupling) {
  // Off-diagonal equals 1 + 2w with w binary, w rewarded by -3: taking w = 1
  // forces z3 >= 9, so w = 0 with z3 = 1 wins (1 < 9 - 3).
  BlockModel bm = block_model(2, -100.0, 100.0);
  const int z1 = bm.b.cols[0][0], z2 = bm.b.cols[0][1], z3 = bm.b.cols[1][1];
  bm.m.lower[z1] = bm.m.upper[z1] = 1.0;
  bm.m.obj[z3] = 1.0;
  const int w = bm.m.add_var("w", 0, 1, VarKind::Binary, -3.0);
  bm.m.add_row({{z2, 1.0}, {w, -2.0}}, Relation::Equal, 1.0);
  const OuterResult r = solve_misdp_outer(bm.m, {bm.b});
  ASSERT_EQ(r.mip.status, MipStatus::Optimal);
  EXPECT_NEAR(r.mip.values[w], 0.0, 1e-9);
  EXPECT_NEAR(r.mip.objective, 1.0, 1e-5);
}

TEST(Outer, RoundLimitRaises) {
  BlockModel bm = block_model(2, -100.0, 100.0);
  fix_block(bm, SymMatrix{{1.0, 1.0}, {1.0, 0.0}});
  const int z3 = bm.b.cols[1][1];
  bm.m.lower[z3] = -100.0;
  bm.m.upper[z3] = 100.0;
  bm.m.obj[z3] = 1.0;
  MipOptions opt;
  opt.sep_round_limit = 1;
  EXPECT_THROW(solve_misdp_outer(bm.m, {bm.b}, kEigenCutTol, opt), CutLoopLimit);
}

TEST(Inner, IdentityBasisExamples) {
  BlockModel ok = block_model(2, -10.0, 10.0);
  fix_block(ok, SymMatrix{{2.0, 0.0}, {0.0, 1.0}});
  EXPECT_EQ(solve_milp(add_dd_inner(ok.m, {ok.b})).status, MipStatus::Optimal);
  BlockModel bad = block_model(2, -10.0, 10.0);
  fix_block(bad, SymMatrix{{1.0, 2.0}, {2.0, 1.0}});
  EXPECT_EQ(solve_milp(add_dd_inner(bad.m, {bad.b})).status, MipStatus::Infeasible);
  // PSD but not dd: outside DD(I).
  BlockModel psd = block_model(2, -10.0, 10.0);
  fix_block(psd, SymMatrix{{1.0, 1.2}, {1.2, 2.0}});
  EXPECT_EQ(solve_milp(add_dd_inner(psd.m, {psd.b})).status, MipStatus::Infeasible);
}

TEST(Inner, SingularBasisRejected) {
  BlockModel bm = block_model(2, -10.0, 10.0);
  DenseMatrix u(2, 2, 1.0);
  EXPECT_THROW(add_dd_inner(bm.m, {bm.b}, u, u), SingularBasis);
  EXPECT_THROW(add_dd_inner(bm.m, {bm.b}, DenseMatrix::identity(3), DenseMatrix::identity(3)),
               ValidationError);
}

TEST(Inner, BasisFromBlockContainsIt) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3;
    SymMatrix s(n);
    std::vector<Vec> g(n, Vec(n));
    for (auto& r : g)
      for (double& v : r) v = u(rng);
    for (int a = 0; a < n; ++a)
      for (int c = a; c < n; ++c) {
        double v = a == c ? 0.2 : 0.0;
        for (int k = 0; k < n; ++k) v += g[k][a] * g[k][c];
        s.set(a, c, v);
      }
    BlockModel bm = block_model(n, -100.0, 100.0);
    fix_block(bm, s);
    const DenseMatrix U = dd_basis_from(s);
    EXPECT_EQ(solve_milp(add_dd_inner(bm.m, {bm.b}, U, U)).status, MipStatus::Optimal) << trial;
  }
}

// Random linear objectives over a box: the inner optimum is PSD and never
// below the outer optimum.
TEST(Inner, SolutionsArePsdAndAboveOuter) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    BlockModel bm = block_model(n, -5.0, 5.0);
    for (int j = 0; j < bm.m.num_vars(); ++j) bm.m.obj[j] = u(rng);
    DenseMatrix U = DenseMatrix::identity(n);
    if (trial % 2)
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) U(a, c) += 0.3 * u(rng);
    const MipSolution in = solve_milp(add_dd_inner(bm.m, {bm.b}, U, U));
    ASSERT_EQ(in.status, MipStatus::Optimal) << trial;
    EXPECT_GE(min_block_eigenvalue({bm.b}, in.values), -1e-9) << trial;
    const OuterResult out = solve_misdp_outer(bm.m, {bm.b});
    ASSERT_EQ(out.mip.status, MipStatus::Optimal);
    EXPECT_LE(out.mip.objective, in.objective + rel_slack(in.objective)) << trial;
  }
}

TEST(Bounds, SandwichAgainstEnumeration) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Instance in = tight_type3(seed);
    const double exact = enumerate_two_stage(in, AmbiguityType::Type3).objective;
    SddipConfig cfg;
    cfg.seed = seed;
    const Type3Bounds b = run_type3_bounds(in, cfg);
    EXPECT_LE(b.lb.lb, exact + rel_slack(exact)) << seed;
    EXPECT_LE(exact, b.ub.lb + rel_slack(exact)) << seed;
    EXPECT_TRUE(std::isfinite(b.gap));
    EXPECT_GE(b.gap, 0.0);
    ASSERT_EQ(b.lb.eigen_cuts_per_stage.size(), static_cast<std::size_t>(in.T));
  }
}

TEST(Bounds, LooseRadiiCloseTheGap) {
  Instance in = equivalence_instance(AmbiguityType::Type3, 2);
  in.gamma = 1e6;
  in.eta_cov = 1e6;
  const Type3Bounds b = run_type3_bounds(in, SddipConfig{});
  ASSERT_EQ(b.lb.status, "Optimal");
  ASSERT_EQ(b.ub.status, "Optimal");
  EXPECT_LT(b.gap, 1e-3);
}

TEST(Bounds, IterativeBasisNeverWorsensUpperBound) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance in = tight_type3(seed);
    SddipConfig cfg;
    cfg.type = AmbiguityType::Type3;
    cfg.bound_mode = BoundMode::Upper;
    const SolveReport plain = run(in, cfg);
    cfg.dd_iterative = true;
    const SolveReport iter = run(in, cfg);
    cfg.bound_mode = BoundMode::Lower;
    cfg.dd_iterative = false;
    const SolveReport low = run(in, cfg);
    EXPECT_LE(iter.lb, plain.lb + rel_slack(plain.lb)) << seed;
    EXPECT_LE(low.lb, iter.lb + rel_slack(iter.lb)) << seed;
  }
}

// Block audit of the first-stage model compiled with the cuts of a finished run.
TEST(Bounds, StageBlocksPassPsdAudit) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance in = tight_type3(seed);
    SddipConfig cfg;
    cfg.type = AmbiguityType::Type3;
    cfg.bound_mode = BoundMode::Lower;
    Sddip s(in, cfg);
    s.run();
    const StageBuild b = build_stage(in, AmbiguityType::Type3, 0, Vec(in.I, 0.0), in.support[0][0], s.pool());
    ASSERT_EQ(b.psd.size(), 2u);
    EXPECT_EQ(b.psd[0].dim + b.psd[1].dim, 2 * in.J + 1);
    const OuterResult lo = solve_misdp_outer(b.model, b.psd, kEigenCutTol, {}, seed_cuts(b.psd));
    ASSERT_EQ(lo.mip.status, MipStatus::Optimal);
    EXPECT_GE(min_block_eigenvalue(b.psd, lo.mip.values), -1e-6) << seed;
    const MipSolution hi = solve_milp(add_dd_inner(b.model, b.psd));
    ASSERT_EQ(hi.status, MipStatus::Optimal);
    EXPECT_GE(min_block_eigenvalue(b.psd, hi.values), -1e-9) << seed;
    EXPECT_LE(lo.mip.objective, hi.objective + rel_slack(hi.objective));

    // Dropping the symmetry rows leaves the outer value unchanged.
    StageBuildOptions o;
    o.symmetry_rows = false;
    const StageBuild b2 = build_stage(in, AmbiguityType::Type3, 0, Vec(in.I, 0.0), in.support[0][0], s.pool(),
                                      nullptr, o);
    const OuterResult lo2 = solve_misdp_outer(b2.model, b2.psd, kEigenCutTol, {}, seed_cuts(b2.psd));
    ASSERT_EQ(lo2.mip.status, MipStatus::Optimal);
    EXPECT_NEAR(lo2.mip.objective, lo.mip.objective, 1e-5 * std::max(1.0, std::abs(lo.mip.objective)));
  }
}

TEST(Bounds, EmptySetReportsUnbounded) {
  Instance in = tight_type3(0);
  in.gamma = 1e-6;
  in.eta_cov = 1.0 + 1e-6;
  for (auto& r : in.lambda_mu) std::fill(r.begin(), r.end(), 0.0);
  for (auto& p : in.support[1]) std::fill(p.begin(), p.end(), 1000.0);
  const Type3Bounds b = run_type3_bounds(in, SddipConfig{});
  EXPECT_EQ(b.lb.status, "Unbounded");
}
