#pragma once

// Multistage facility-location instance with decision-dependent moment data,
// the seeded generator, and the "ddro-instance-v1" JSON format.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddro/errors.hpp"
#include "ddro/linalg.hpp"

namespace ddro {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

enum class Distribution { Normal, LogNormal };
enum class CostMode { ManhattanOver4, Flat };

struct Instance {
  int T = 2, I = 1, J = 1, K = 1;
  std::vector<std::array<int, 2>> facility_xy, customer_xy;
  Mat c;       // I x J
  Mat f;       // T x I
  Mat h;       // T x I
  double N = 100.0;
  Vec R;       // J
  Vec mu_bar, sigma_bar;
  double rho_bar = 0.8;
  SymMatrix Sigma_bar{1};
  // support[t][k][j]; support[0] holds the single stage-1 point.
  std::vector<Mat> support;
  Mat lambda_mu;  // J x I
  Mat lambda_S;   // J x I
  Vec lambda_cov; // I
  Vec eps_mu, eps_S_lo, eps_S_hi;
  double gamma = 10.0;
  double eta_cov = 100.0;
  Vec risk_lambda;  // per stage
  Vec risk_alpha;
  bool y_integer = true;

  int stage_K(int t) const { return static_cast<int>(support[t].size()); }

  // Same instance with every decision-dependency coefficient zeroed.
  Instance decision_independent() const {
    Instance d = *this;
    for (auto& row : d.lambda_mu) std::fill(row.begin(), row.end(), 0.0);
    for (auto& row : d.lambda_S) std::fill(row.begin(), row.end(), 0.0);
    std::fill(d.lambda_cov.begin(), d.lambda_cov.end(), 0.0);
    return d;
  }
};

inline void validate(const Instance& in) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("instance: ") + what);
  };
  need(in.T >= 1 && in.I >= 1 && in.J >= 1 && in.K >= 1, "dimensions must be >= 1");
  const auto I = static_cast<std::size_t>(in.I), J = static_cast<std::size_t>(in.J),
             T = static_cast<std::size_t>(in.T);
  need(in.c.size() == I, "c rows");
  for (const auto& r : in.c) need(r.size() == J, "c cols");
  need(in.f.size() == T && in.h.size() == T, "f/h rows");
  for (std::size_t t = 0; t < T; ++t) need(in.f[t].size() == I && in.h[t].size() == I, "f/h cols");
  need(in.R.size() == J && in.mu_bar.size() == J && in.sigma_bar.size() == J, "J-vectors");
  need(in.Sigma_bar.n() == J, "Sigma_bar dimension");
  need(in.support.size() == T, "support stages");
  need(in.support[0].size() == 1, "stage-1 support must be a singleton");
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) need(static_cast<int>(in.support[t].size()) == in.K, "support size K");
    for (const auto& pt : in.support[t]) {
      need(pt.size() == J, "support point dimension");
      for (double v : pt) need(std::isfinite(v) && v >= 0.0, "support entries must be >= 0");
    }
  }
  need(in.lambda_mu.size() == J && in.lambda_S.size() == J, "lambda rows");
  for (std::size_t j = 0; j < J; ++j) {
    need(in.lambda_mu[j].size() == I && in.lambda_S[j].size() == I, "lambda cols");
    for (std::size_t i = 0; i < I; ++i)
      need(in.lambda_mu[j][i] >= 0.0 && in.lambda_S[j][i] >= 0.0, "lambda must be >= 0");
  }
  need(in.lambda_cov.size() == I, "lambda_cov size");
  for (double v : in.lambda_cov) need(v >= 0.0, "lambda_cov must be >= 0");
  need(in.eps_mu.size() == J && in.eps_S_lo.size() == J && in.eps_S_hi.size() == J, "radii size");
  for (std::size_t j = 0; j < J; ++j) {
    need(in.eps_mu[j] >= 0.0, "eps_mu must be >= 0");
    need(in.eps_S_lo[j] >= 0.0 && in.eps_S_lo[j] <= 1.0 && in.eps_S_hi[j] >= 1.0,
         "need 0 <= eps_S_lo <= 1 <= eps_S_hi");
  }
  need(in.gamma >= 0.0 && in.eta_cov >= 0.0, "gamma/eta must be >= 0");
  need(in.risk_lambda.size() == T && in.risk_alpha.size() == T, "risk vectors");
  for (std::size_t t = 0; t < T; ++t) {
    need(in.risk_lambda[t] >= 0.0 && in.risk_lambda[t] <= 1.0, "risk_lambda in [0,1]");
    need(in.risk_alpha[t] > 0.0 && in.risk_alpha[t] < 1.0, "risk_alpha in (0,1)");
  }
  need(in.N >= 0.0, "budget");
  if (!is_psd(in.Sigma_bar, 1e-9 * std::max(1.0, in.Sigma_bar.norm_inf())))
    throw ValidationError("instance: Sigma_bar is not PSD");
}

// Seeded sampling kept independent of the standard library's distribution
// implementations so files are identical across toolchains.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct GenOptions {
  std::uint64_t seed = 1;
  int T = 2, I = 3, J = 1, K = 10;
  double rho_bar = 0.8;
  Distribution distribution = Distribution::Normal;
  CostMode cost_mode = CostMode::ManhattanOver4;
  double flat_cost = 10.0;
  double N = 100.0;
  double f = 100.0;
  double h = 1000.0;
  double R = 100.0;
  double eps_mu = 25.0, eps_S_lo = 0.1, eps_S_hi = 1.9;
  double gamma = 10.0, eta_cov = 100.0;
  double risk_lambda = 0.0, risk_alpha = 0.95;
  bool y_integer = true;
};

inline int manhattan(const std::array<int, 2>& a, const std::array<int, 2>& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]);
}

// Column-normalized exp(-dist/scale) impacts, indexed [j][i].
inline Mat distance_impacts(const std::vector<std::array<int, 2>>& fac,
                            const std::vector<std::array<int, 2>>& cust, double scale) {
  Mat out(cust.size(), Vec(fac.size()));
  for (std::size_t j = 0; j < cust.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < fac.size(); ++i) {
      out[j][i] = std::exp(-manhattan(fac[i], cust[j]) / scale);
      s += out[j][i];
    }
    for (double& v : out[j]) v /= s;
  }
  return out;
}

inline double draw_demand(Sampler& s, Distribution d, double mu, double rho) {
  if (d == Distribution::LogNormal) return std::exp(std::log(mu) + rho * std::log(mu) * s.normal());
  const double sd = mu * rho;
  for (int tries = 0; tries < 1000; ++tries) {
    const double v = mu + sd * s.normal();
    if (v >= 0.0) return v;
  }
  return 0.0;
}

inline SymMatrix sample_covariance(const Mat& pts, int J) {
  SymMatrix cov(static_cast<std::size_t>(J));
  const double n = static_cast<double>(pts.size());
  if (pts.size() < 2) return cov;
  Vec mean(J, 0.0);
  for (const auto& p : pts)
    for (int j = 0; j < J; ++j) mean[j] += p[j] / n;
  for (int a = 0; a < J; ++a)
    for (int b = a; b < J; ++b) {
      double s = 0.0;
      for (const auto& p : pts) s += (p[a] - mean[a]) * (p[b] - mean[b]);
      cov.set(a, b, s / (n - 1.0));
    }
  return cov;
}

inline Instance generate_instance(const GenOptions& o) {
  if (o.T < 1 || o.I < 1 || o.J < 1 || o.K < 1) throw ValidationError("dimensions must be >= 1");
  if (!(o.rho_bar > 0.0)) throw ValidationError("rho_bar must be > 0");
  Sampler s(o.seed);
  Instance in;
  in.T = o.T;
  in.I = o.I;
  in.J = o.J;
  in.K = o.K;
  for (int i = 0; i < o.I; ++i) in.facility_xy.push_back({s.integer(0, 100), s.integer(0, 100)});
  for (int j = 0; j < o.J; ++j) in.customer_xy.push_back({s.integer(0, 100), s.integer(0, 100)});
  in.c.assign(o.I, Vec(o.J));
  for (int i = 0; i < o.I; ++i)
    for (int j = 0; j < o.J; ++j)
      in.c[i][j] = o.cost_mode == CostMode::Flat ? o.flat_cost
                                                  : manhattan(in.facility_xy[i], in.customer_xy[j]) / 4.0;
  in.f.assign(o.T, Vec(o.I, o.f));
  in.h.assign(o.T, Vec(o.I, o.h));
  in.N = o.N;
  in.R.assign(o.J, o.R);
  in.rho_bar = o.rho_bar;
  in.mu_bar.resize(o.J);
  in.sigma_bar.resize(o.J);
  for (int j = 0; j < o.J; ++j) {
    in.mu_bar[j] = s.uniform(20.0, 40.0);
    in.sigma_bar[j] = in.mu_bar[j] * o.rho_bar;
  }
  in.lambda_mu = distance_impacts(in.facility_xy, in.customer_xy, 25.0);
  in.lambda_S = distance_impacts(in.facility_xy, in.customer_xy, 50.0);
  in.lambda_cov.resize(o.I);
  double total = 0.0;
  for (int i = 0; i < o.I; ++i) total += (in.lambda_cov[i] = s.uniform());
  for (double& v : in.lambda_cov) v /= total;

  in.support.assign(o.T, {});
  in.support[0] = {in.mu_bar};
  Mat pooled;
  for (int t = 1; t < o.T; ++t) {
    in.support[t].assign(o.K, Vec(o.J));
    for (int k = 0; k < o.K; ++k)
      for (int j = 0; j < o.J; ++j)
        in.support[t][k][j] = draw_demand(s, o.distribution, in.mu_bar[j], o.rho_bar);
    pooled.insert(pooled.end(), in.support[t].begin(), in.support[t].end());
  }
  in.Sigma_bar = sample_covariance(pooled, o.J);

  in.eps_mu.assign(o.J, o.eps_mu);
  in.eps_S_lo.assign(o.J, o.eps_S_lo);
  in.eps_S_hi.assign(o.J, o.eps_S_hi);
  in.gamma = o.gamma;
  in.eta_cov = o.eta_cov;
  in.risk_lambda.assign(o.T, o.risk_lambda);
  in.risk_alpha.assign(o.T, o.risk_alpha);
  in.y_integer = o.y_integer;
  return in;
}

// JSON ---------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const Instance& in) {
  nlohmann::ordered_json j;
  j["version"] = "ddro-instance-v1";
  j["T"] = in.T;
  j["I"] = in.I;
  j["J"] = in.J;
  j["K"] = in.K;
  j["facility_xy"] = in.facility_xy;
  j["customer_xy"] = in.customer_xy;
  j["c"] = in.c;
  j["f"] = in.f;
  j["h"] = in.h;
  j["N"] = in.N;
  j["R"] = in.R;
  j["mu_bar"] = in.mu_bar;
  j["sigma_bar"] = in.sigma_bar;
  j["rho_bar"] = in.rho_bar;
  j["Sigma_bar"] = in.Sigma_bar.to_rows();
  j["support"] = in.support;
  j["lambda_mu"] = in.lambda_mu;
  j["lambda_S"] = in.lambda_S;
  j["lambda_cov"] = in.lambda_cov;
  j["eps_mu"] = in.eps_mu;
  j["eps_S_lo"] = in.eps_S_lo;
  j["eps_S_hi"] = in.eps_S_hi;
  j["gamma"] = in.gamma;
  j["eta_cov"] = in.eta_cov;
  j["risk_lambda"] = in.risk_lambda;
  j["risk_alpha"] = in.risk_alpha;
  j["y_integrality"] = in.y_integer ? "integer" : "continuous";
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<std::string>() != "ddro-instance-v1")
      throw ValidationError("unsupported instance version");
    Instance in;
    in.T = j.at("T").get<int>();
    in.I = j.at("I").get<int>();
    in.J = j.at("J").get<int>();
    in.K = j.at("K").get<int>();
    j.at("facility_xy").get_to(in.facility_xy);
    j.at("customer_xy").get_to(in.customer_xy);
    j.at("c").get_to(in.c);
    j.at("f").get_to(in.f);
    j.at("h").get_to(in.h);
    in.N = j.at("N").get<double>();
    j.at("R").get_to(in.R);
    j.at("mu_bar").get_to(in.mu_bar);
    j.at("sigma_bar").get_to(in.sigma_bar);
    in.rho_bar = j.value("rho_bar", 0.0);
    in.Sigma_bar = SymMatrix::from_rows(j.at("Sigma_bar").get<Mat>());
    j.at("support").get_to(in.support);
    j.at("lambda_mu").get_to(in.lambda_mu);
    j.at("lambda_S").get_to(in.lambda_S);
    j.at("lambda_cov").get_to(in.lambda_cov);
    j.at("eps_mu").get_to(in.eps_mu);
    j.at("eps_S_lo").get_to(in.eps_S_lo);
    j.at("eps_S_hi").get_to(in.eps_S_hi);
    in.gamma = j.at("gamma").get<double>();
    in.eta_cov = j.at("eta_cov").get<double>();
    j.at("risk_lambda").get_to(in.risk_lambda);
    j.at("risk_alpha").get_to(in.risk_alpha);
    in.y_integer = j.value("y_integrality", std::string("integer")) == "integer";
    validate(in);
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("instance json: ") + e.what());
  }
}

}  // namespace ddro
