#pragma once

#include <algorithm>
#include <vector>

#include "ddro/bench.hpp"
#include "ddro/instance.hpp"

namespace ddro::testing {

// Hand-sized instance with zero impacts; callers overwrite what they need.
inline Instance tiny_instance(int T, int I, int J, int K) {
  Instance in;
  in.T = T;
  in.I = I;
  in.J = J;
  in.K = K;
  for (int i = 0; i < I; ++i) in.facility_xy.push_back({i, 0});
  for (int j = 0; j < J; ++j) in.customer_xy.push_back({0, j});
  in.c.assign(I, Vec(J, 10.0));
  in.f.assign(T, Vec(I, 100.0));
  in.h.assign(T, Vec(I, 1000.0));
  in.N = 100.0;
  in.R.assign(J, 100.0);
  in.mu_bar.assign(J, 10.0);
  in.sigma_bar.assign(J, 1.0);
  in.rho_bar = 0.1;
  in.Sigma_bar = SymMatrix::identity(J);
  in.support.assign(T, Mat{});
  in.support[0] = {in.mu_bar};
  for (int t = 1; t < T; ++t)
    for (int k = 0; k < K; ++k) {
      Vec p(J);
      for (int j = 0; j < J; ++j) p[j] = 8.0 + 4.0 * k / std::max(1, K - 1);
      in.support[t].push_back(p);
    }
  in.lambda_mu.assign(J, Vec(I, 0.0));
  in.lambda_S.assign(J, Vec(I, 0.0));
  in.lambda_cov.assign(I, 0.0);
  in.eps_mu.assign(J, 5.0);
  in.eps_S_lo.assign(J, 0.5);
  in.eps_S_hi.assign(J, 1.5);
  in.gamma = 10.0;
  in.eta_cov = 100.0;
  in.risk_lambda.assign(T, 0.0);
  in.risk_alpha.assign(T, 0.95);
  in.y_integer = true;
  return in;
}

// Exact Q_t(x_prev, xi) by enumerating every feasible x_t and recursing over
// the worst case of later stages. Exponential; small I and T only.
inline double exact_stage_value(const Instance& in, AmbiguityType type, int t, const Vec& x_prev,
                                const Vec& xi, bool risk = false) {
  double best = kInf;
  for (int mask = 0; mask < (1 << in.I); ++mask) {
    Vec x(in.I);
    double spend = 0.0;
    bool ok = true;
    for (int i = 0; i < in.I; ++i) {
      x[i] = (mask >> i) & 1;
      if (x[i] < x_prev[i]) ok = false;
      spend += in.f[t][i] * (x[i] - x_prev[i]);
    }
    if (!ok || spend > in.N + 1e-9) continue;
    double v = stage_block_value(in, t, x_prev, xi, &x);
    if (t + 1 < in.T) {
      const Mat& pts = in.support[t + 1];
      Vec q;
      for (const auto& p : pts) q.push_back(exact_stage_value(in, type, t + 1, x, p, risk));
      const Risk r{in.risk_lambda[t + 1], in.risk_alpha[t + 1]};
      v += worst_case(in, type, pts, x, q, risk ? &r : nullptr, t + 1).value;
    }
    best = std::min(best, v);
  }
  return best;
}

inline double exact_value(const Instance& in, AmbiguityType type, bool risk = false) {
  return exact_stage_value(in, type, 0, Vec(in.I, 0.0), in.support[0][0], risk);
}

// True when every stage's set is nonempty at every binary state.
inline bool nonempty_at_all_states(const Instance& in, AmbiguityType type) {
  for (int t = 1; t < in.T; ++t)
    for (int mask = 0; mask < (1 << in.I); ++mask) {
      Vec x(in.I);
      for (int i = 0; i < in.I; ++i) x[i] = (mask >> i) & 1;
      if (!is_nonempty(in, type, in.support[t], x)) return false;
    }
  return true;
}

}  // namespace ddro::testing
