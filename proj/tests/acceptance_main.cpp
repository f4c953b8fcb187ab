// Acceptance suite: one line per criterion, nonzero exit if any fails.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfuq/misc_engine.hpp"
#include "mfuq/model.hpp"
#include "mfuq/multi_index.hpp"
#include "mfuq/quadrature.hpp"
#include "mfuq/rbf.hpp"
#include "mfuq/srbf_engine.hpp"
#include "mfuq/stats.hpp"

using namespace mfuq;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

template <typename F>
void guarded(int id, F&& body) {
  try {
    auto [ok, detail] = body();
    report(id, ok, detail);
  } catch (const std::exception& e) {
    report(id, false, std::string("unexpected exception: ") + e.what());
  }
}

template <typename... Args>
std::string strf(const char* f, Args... a) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, a...);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double unit_draw(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Noise- and bias-free limit of the builtin benchmark, as a field over its domain.
double builtin_truth(const ParamDomain& dom, const Eigen::VectorXd& y) {
  const Eigen::VectorXd u = dom.to_unit(y);
  return std::exp(2.0 * u[0] - 1.0) * std::cos(2.0 * u[1] - 1.0);
}

// Reference mean from a dense high-order tensor rule (1025^2 > 1e6 nodes).
double reference_mean() {
  const ParamDomain dom = default_benchmark().domain;
  return moments_tensor_cc([&dom](const Eigen::VectorXd& y) { return builtin_truth(dom, y); },
                           dom, 11, 2000000)
      .mean;
}

std::string scratch_dir() {
  static const std::string dir = "/tmp/mfuq_accept_" + std::to_string(::getpid());
  return dir;
}

int run_cli(const std::string& args) {
  ::unsetenv("MFUQ_CACHE");
  const std::string cmd = std::string(MFUQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<bool, std::string> telescoping_boxes() {
  const auto t0 = Clock::now();
  Evaluator ev(default_benchmark(0.0), "");
  double worst = 0.0;
  for (int a = 1; a <= 3; ++a)
    for (int b1 = 1; b1 <= 3; ++b1)
      for (int b2 = 1; b2 <= 3; ++b2) {
        const IndexSet lambda = IndexSet::box({a, b1, b2});
        const double combo = misc_estimate_over(lambda, ev, 1);
        const double corner = tensor_estimate(ev, {a}, {b1, b2});
        worst = std::max(worst, std::abs(combo - corner));
      }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0,
          strf("box-set combination sums equal the top-corner tensor value "
               "(27 boxes, max diff %.2e, %.2f s)",
               worst, secs)};
}

std::pair<bool, std::string> coefficient_oracle() {
  std::mt19937 rng(11);
  // smooth synthetic per-index value standing in for a tensor quadrature
  auto q = [](const MultiIndex& k) {
    double p = 1.0;
    for (std::size_t d = 0; d < k.size(); ++d)
      p *= 1.0 + std::pow(0.6, k[d]) * std::sin(1.7 * (d + 1.0) + 0.9 * k[d]);
    return p;
  };
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int D = 1 + static_cast<int>(rng() % 4);
    IndexSet s(D);
    s.insert(unit_index(D));
    const int steps = 1 + static_cast<int>(rng() % 14);
    for (int t = 0; t < steps; ++t) {
      std::vector<MultiIndex> eligible;
      const IndexSet rm = reduced_margin(s);
      for (const MultiIndex& m : rm.items())
        if (*std::max_element(m.begin(), m.end()) <= 4) eligible.push_back(m);
      if (eligible.empty()) break;
      s.insert(eligible[rng() % eligible.size()]);
    }

    double via_coeffs = 0.0;
    for (const auto& [k, c] : combination_coefficients(s))
      via_coeffs += static_cast<double>(c) * q(k);

    double via_details = 0.0;
    for (const MultiIndex& m : s.items()) {
      for (unsigned mask = 0; mask < (1u << D); ++mask) {
        MultiIndex k = m;
        int parity = 0;
        bool inside = true;
        for (int d = 0; d < D; ++d)
          if (mask >> d & 1u) {
            parity ^= 1;
            if (--k[d] < 1) {
              inside = false;
              break;
            }
          }
        if (inside) via_details += (parity ? -1.0 : 1.0) * q(k);
      }
    }
    worst = std::max(worst, std::abs(via_coeffs - via_details));
  }
  return {worst <= 1e-12,
          strf("combination coefficients reproduce the sign-expansion sum "
               "(200 random sets, max diff %.2e)",
               worst)};
}

std::pair<bool, std::string> work_accounting() {
  Evaluator ev(default_benchmark(0.01), "");
  MiscConfig cfg;
  cfg.budget = 700.0;
  MiscEngine eng(ev, cfg);
  eng.run();

  double work_sum = 0.0;
  for (const auto& [k, rec] : eng.explored()) work_sum += rec.work;
  double per_count = 0.0;
  for (const auto& [alpha, n] : ev.counts_per_fidelity())
    per_count += static_cast<double>(n) * geometric_cost(alpha);

  const bool ok = eng.cost_spent() == work_sum && eng.cost_spent() == per_count;
  return {ok, strf("ledger %.0f equals summed work %.0f and per-point charges %.0f exactly",
                   eng.cost_spent(), work_sum, per_count)};
}

std::pair<bool, std::string> misc_convergence(std::optional<double>& coarse_share) {
  const auto t0 = Clock::now();
  const double ref = reference_mean();
  Evaluator ev(default_benchmark(0.0), "");
  MiscConfig cfg;
  cfg.budget = 800.0;
  MiscEngine eng(ev, cfg);
  eng.run();
  const double secs = seconds_since(t0);

  const double err = std::abs(eng.estimate() - ref);
  long coarse = 0, total = 0;
  for (const auto& [alpha, n] : ev.counts_per_fidelity()) {
    total += n;
    if (alpha == MultiIndex{1}) coarse = n;
  }
  if (total > 0) coarse_share = static_cast<double>(coarse) / static_cast<double>(total);

  const bool ok = err <= 1e-3 && eng.cost_spent() <= 2000.0 && secs < 60.0;
  return {ok, strf("noise-free mean error %.3e <= 1e-3 at cost %.0f (budget 2000, %.2f s)", err,
                   eng.cost_spent(), secs)};
}

std::pair<bool, std::string> interpolation_exactness() {
  std::mt19937_64 rng(5);
  const int J = 12;
  Eigen::MatrixXd pts(J, 2);
  Eigen::VectorXd vals(J);
  for (int i = 0; i < J; ++i) {
    pts(i, 0) = unit_draw(rng);
    pts(i, 1) = unit_draw(rng);
    vals[i] = std::exp(2.0 * pts(i, 0) - 1.0) * std::cos(2.0 * pts(i, 1) - 1.0);
  }
  const SrbfSurrogate s = build_surrogate(pts, vals, J, TauGrid{});
  const double range = vals.maxCoeff() - vals.minCoeff();

  double worst_p = 0.0, worst_u = 0.0;
  for (int i = 0; i < J; ++i) {
    const Eigen::VectorXd y = pts.row(i).transpose();
    worst_p = std::max(worst_p, std::abs(s.predict(y) - vals[i]));
    worst_u = std::max(worst_u, s.uncertainty(y));
  }
  const bool ok = s.mode() == SrbfSurrogate::Mode::interpolation &&
                  worst_p <= 1e-8 * range && worst_u <= 1e-8 * range;
  return {ok, strf("training-point residual %.2e and band %.2e within 1e-8 of range %.3f",
                   worst_p, worst_u, range)};
}

std::pair<bool, std::string> srbf_convergence(std::optional<double>& first_share) {
  const auto t0 = Clock::now();
  const double ref = reference_mean();
  Evaluator ev(default_benchmark(0.01), "");
  SrbfConfig cfg;
  cfg.budget = 6000.0;
  cfg.uncertainty_stop_fraction = 0.0;  // spend the whole budget
  SrbfEngine eng(ev, cfg);
  eng.run();
  const double secs = seconds_since(t0);

  const double err = std::abs(eng.mean() - ref);
  const double band_frac =
      eng.range_estimate() > 0.0 ? eng.max_uncertainty() / eng.range_estimate() : 1.0;
  if (!eng.history().empty() && eng.history().back().cost > 0.0)
    first_share = eng.history().front().cost / eng.history().back().cost;

  const bool ok =
      err <= 5e-3 && ev.cost_spent() <= 6000.0 && band_frac < 0.05 && secs < 300.0;
  return {ok, strf("mean error %.3e <= 5e-3 at cost %.0f, band %.1f%% of range (%.1f s)", err,
                   ev.cost_spent(), 100.0 * band_frac, secs)};
}

std::pair<bool, std::string> regression_beats_interpolation() {
  std::mt19937_64 rng(4);
  Evaluator ev(default_benchmark(0.05, 0, 0.0), "");
  const ParamDomain& dom = ev.spec().domain;

  // Clustered design: 20 anchors, each revisited a short step away, the
  // sampling pattern adaptive refinement produces. Exact interpolation must
  // thread every noisy pair; regression is free to average them.
  const int J = 40;
  Eigen::MatrixXd pts(J, 2);
  Eigen::VectorXd vals(J);
  for (int i = 0; i < 20; ++i) {
    const double x = 0.05 + 0.9 * unit_draw(rng);
    const double y = 0.05 + 0.9 * unit_draw(rng);
    const double ang = 6.283185307179586 * unit_draw(rng);
    pts(2 * i, 0) = x;
    pts(2 * i, 1) = y;
    pts(2 * i + 1, 0) = x + 0.02 * std::cos(ang);
    pts(2 * i + 1, 1) = y + 0.02 * std::sin(ang);
  }
  for (int i = 0; i < J; ++i)
    vals[i] = ev.evaluate({1}, dom.from_unit(pts.row(i).transpose())).value;

  TauGrid taus;
  taus.count = 200;
  const SrbfSurrogate interp = build_surrogate(pts, vals, J, taus);
  std::vector<int> candidates;
  for (int K = 3; K < J; ++K) candidates.push_back(K);
  const LoocvResult sel = loocv_select_K(pts, vals, candidates, taus);
  const SrbfSurrogate regr = build_surrogate(pts, vals, sel.K_star, taus);

  const int G = 100;
  Eigen::MatrixXd grid(G * G, 2);
  Eigen::VectorXd truth(G * G);
  for (int i = 0; i < G; ++i)
    for (int j = 0; j < G; ++j) {
      const int r = i * G + j;
      grid(r, 0) = (i + 0.5) / G;
      grid(r, 1) = (j + 0.5) / G;
      truth[r] = std::exp(2.0 * grid(r, 0) - 1.0) * std::cos(2.0 * grid(r, 1) - 1.0);
    }
  const double rmse_i = std::sqrt((interp.predict_batch(grid) - truth).squaredNorm() / (G * G));
  const double rmse_r = std::sqrt((regr.predict_batch(grid) - truth).squaredNorm() / (G * G));

  return {rmse_r < rmse_i,
          strf("noisy J=40 design: regression (K*=%d) rmse %.4f < interpolation rmse %.4f",
               sel.K_star, rmse_r, rmse_i)};
}

std::pair<bool, std::string> loocv_oracle() {
  std::mt19937_64 rng(8);
  TauGrid taus;
  taus.count = 50;
  double worst = 0.0;
  for (int fixture = 0; fixture < 10; ++fixture) {
    const int J = 4 + static_cast<int>(rng() % 9);  // 4..12 points
    Eigen::MatrixXd pts(J, 2);
    Eigen::VectorXd vals(J);
    const double a0 = 2.0 * unit_draw(rng) - 1.0, a1 = 2.0 * unit_draw(rng) - 1.0;
    const double a2 = 2.0 * unit_draw(rng) - 1.0, a3 = 2.0 * unit_draw(rng) - 1.0;
    for (int i = 0; i < J; ++i) {
      pts(i, 0) = unit_draw(rng);
      pts(i, 1) = unit_draw(rng);
      vals[i] = a0 + a1 * pts(i, 0) + a2 * pts(i, 1) +
                a3 * std::sin(3.0 * pts(i, 0)) * std::cos(2.0 * pts(i, 1));
    }
    std::vector<int> candidates;
    for (int K = 2; K <= J; ++K) candidates.push_back(K);
    const LoocvResult got = loocv_select_K(pts, vals, candidates, taus);

    for (const auto& [K, rmse] : got.rmse_curve) {
      const int Keff = std::min(K, J - 1);
      double sq = 0.0;
      Eigen::MatrixXd reduced(J - 1, 2);
      Eigen::VectorXd rvals(J - 1);
      for (int i = 0; i < J; ++i) {
        int r = 0;
        for (int j = 0; j < J; ++j) {
          if (j == i) continue;
          reduced.row(r) = pts.row(j);
          rvals[r] = vals[j];
          ++r;
        }
        const Eigen::MatrixXd centers =
            Keff == J - 1 ? reduced : kmeans_centers(reduced, Keff);
        const SrbfSurrogate s = SrbfSurrogate::fit(reduced, rvals, centers, taus);
        const double e = vals[i] - s.predict(pts.row(i).transpose());
        sq += e * e;
      }
      worst = std::max(worst, std::abs(rmse - std::sqrt(sq / J)));
    }
  }
  return {worst <= 1e-10,
          strf("leave-one-out rmse matches a re-coded reference (10 fixtures, max diff %.2e)",
               worst)};
}

std::pair<bool, std::string> cli_determinism() {
  const std::string dir = scratch_dir();
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = dir + "/config.json";
  std::ofstream(cfg_path) << R"({
  "schema_version": 1,
  "method": "both",
  "budget": 3200,
  "seed": 0,
  "svg": true,
  "model": {"kind": "builtin"},
  "srbf": {"max_iterations": 3, "tau_count": 200, "quad_per_dim": 20},
  "pso": {"particles_per_dim": 6, "max_iters": 25},
  "distribution": {"samples": 2000, "bins": 25, "surface_per_dim": 40}
}
)";
  const std::string out_a = dir + "/run_a", out_b = dir + "/run_b";
  if (run_cli("run --config " + cfg_path + " --out " + out_a) != 0 ||
      run_cli("run --config " + cfg_path + " --out " + out_b) != 0)
    return {false, "cli run did not exit cleanly"};

  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(out_a)) names_a.push_back(e.path().filename());
  for (const auto& e : fs::directory_iterator(out_b)) names_b.push_back(e.path().filename());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b || names_a.empty())
    return {false, "the two runs wrote different file sets"};
  for (const std::string& name : names_a)
    if (slurp(out_a + "/" + name) != slurp(out_b + "/" + name))
      return {false, "output file differs between identical runs: " + name};
  return {true, strf("two identical cli runs wrote byte-identical outputs (%zu files)",
                     names_a.size())};
}

std::pair<bool, std::string> fidelity_selection_examples() {
  std::vector<double> two_costs{1.0, 8.0};
  Eigen::Vector2d clear_base(0.5, 0.1);
  const int ex1 = choose_fidelity(clear_base, two_costs);

  Eigen::Vector3d zero_gaps(0.7, 0.0, 0.0);
  const int ex2 = choose_fidelity(zero_gaps, {1.0, 8.0, 64.0});

  Eigen::Vector2d tied(0.5, 4.0);  // both components score 0.5 per unit cost
  const int ex3 = choose_fidelity(tied, two_costs);

  const bool ok = ex1 == 1 && ex2 == 1 && ex3 == 1;
  return {ok, strf("cost-scaled selection picks levels (%d, %d, %d), all expected 1", ex1, ex2,
                   ex3)};
}

std::pair<bool, std::string> quadrature_exactness() {
  double worst_cc = 0.0;
  for (int K : {1, 3, 5, 9, 17, 33}) {
    const Eigen::VectorXd x = cc_nodes(K);
    const Eigen::VectorXd w = cc_weights(K);
    for (int d = 0; d < K; ++d) {
      double got = 0.0;
      for (int i = 0; i < K; ++i) got += w[i] * std::pow(x[i], d);
      const double want = (d % 2 == 1) ? 0.0 : 1.0 / (d + 1);
      worst_cc = std::max(worst_cc, std::abs(got - want));
    }
  }

  const ParamDomain dom = ParamDomain::unit(2);
  const Moments m = moments_midpoint(
      [](const Eigen::VectorXd& y) { return 0.25 + 2.0 * y[0] - y[1]; }, dom, 100);
  const double mid_err = std::abs(m.mean - 0.75);

  const bool ok = worst_cc <= 1e-12 && mid_err <= 1e-12;
  return {ok, strf("monomial moments off by %.2e; linear midpoint mean off by %.2e", worst_cc,
                   mid_err)};
}

std::pair<bool, std::string> cost_profile(const std::optional<double>& coarse_share,
                                          const std::optional<double>& first_share) {
  if (!coarse_share || !first_share)
    return {false, "prerequisite runs from criteria 4 and 6 are unavailable"};
  const bool ok = *coarse_share > 0.6 && *first_share >= 0.4;
  return {ok, strf("coarsest level took %.1f%% of evaluations (> 60%%); "
                   "first iteration took %.1f%% of final cost (>= 40%%)",
                   100.0 * *coarse_share, 100.0 * *first_share)};
}

}  // namespace

int main() {
  std::optional<double> coarse_share, first_share;

  guarded(1, telescoping_boxes);
  guarded(2, coefficient_oracle);
  guarded(3, work_accounting);
  guarded(4, [&] { return misc_convergence(coarse_share); });
  guarded(5, interpolation_exactness);
  guarded(6, [&] { return srbf_convergence(first_share); });
  guarded(7, regression_beats_interpolation);
  guarded(8, loocv_oracle);
  guarded(9, cli_determinism);
  guarded(10, fidelity_selection_examples);
  guarded(11, quadrature_exactness);
  guarded(12, [&] { return cost_profile(coarse_share, first_share); });

  if (g_failures == 0) {
    std::printf("all 12 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}
