#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfuq/stats.hpp"

using namespace mfuq;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::string temp_file(const std::string& stem) {
  return "/tmp/mfuq_stats_" + stem + "_" + std::to_string(::getpid()) + ".csv";
}

double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& f) {
  double acc = 0.0;
  for (int i = 1; i < x.size(); ++i) acc += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
  return acc;
}

}  // namespace

TEST_CASE("midpoint moments of a constant field are (c, 0)") {
  const ParamDomain dom = ParamDomain::unit(2);
  const Moments m = moments_midpoint([](const Eigen::VectorXd&) { return 3.25; }, dom, 20);
  CHECK(m.mean == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(m.stddev == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("midpoint moments of y1 on the unit square") {
  const ParamDomain dom = ParamDomain::unit(2);
  const Moments m = moments_midpoint([](const Eigen::VectorXd& y) { return y[0]; }, dom, 100);
  // The midpoint grid is symmetric about 0.5, so the mean is exact.
  CHECK(std::abs(m.mean - 0.5) <= 1e-12);
  CHECK(std::abs(m.stddev - std::sqrt(1.0 / 12.0)) <= 1e-4);
}

TEST_CASE("tensor quadrature moments of y1 are exact") {
  const ParamDomain dom = ParamDomain::unit(2);
  const Moments m = moments_tensor_cc([](const Eigen::VectorXd& y) { return y[0]; }, dom, 2);
  CHECK(std::abs(m.mean - 0.5) <= 1e-12);
  CHECK(std::abs(m.stddev - std::sqrt(1.0 / 12.0)) <= 1e-12);
}

TEST_CASE("midpoint and tensor quadrature agree on a smooth field") {
  const ParamDomain dom{Eigen::Vector2d(-1.0, 2.0), Eigen::Vector2d(1.0, 7.0)};
  auto f = [](const Eigen::VectorXd& y) { return std::exp(0.3 * y[0]) * std::cos(0.4 * y[1]); };
  const Moments a = moments_midpoint(f, dom, 100);
  const Moments b = moments_tensor_cc(f, dom, 7);
  const double range = 2.0 * std::exp(0.3);  // crude bound on the field's spread
  CHECK(std::abs(a.mean - b.mean) <= 1e-3 * range);
  CHECK(std::abs(a.stddev - b.stddev) <= 1e-3 * range);
}

TEST_CASE("tensor quadrature reproduces a separable closed form") {
  // exp(t1)cos(t2) over t in [-1,1]^2 integrates (in mean) to sinh(1)sin(1).
  const ParamDomain dom = ParamDomain::symmetric(2);
  auto f = [](const Eigen::VectorXd& t) { return std::exp(t[0]) * std::cos(t[1]); };
  const Moments m = moments_tensor_cc(f, dom, 7);
  CHECK(std::abs(m.mean - std::sinh(1.0) * std::sin(1.0)) <= 1e-12);
}

TEST_CASE("moment routines reject bad resolutions") {
  const ParamDomain dom = ParamDomain::unit(2);
  auto f = [](const Eigen::VectorXd&) { return 0.0; };
  CHECK_THROWS_AS(moments_midpoint(f, dom, 0), std::invalid_argument);
  CHECK_THROWS_AS(moments_tensor_cc(f, dom, 0), std::invalid_argument);
  CHECK_THROWS_AS(moments_midpoint(f, dom, 100000), std::runtime_error);  // grid cap
}

TEST_CASE("sampled distribution: counts, density, and kde mass") {
  const ParamDomain dom = ParamDomain::unit(2);
  auto f = [](const Eigen::VectorXd& y) { return 1.0 + y[0] + 0.5 * y[1] * y[1]; };
  const QoiDistribution d = qoi_distribution(f, dom, 4000, 7, 25, 256);

  CHECK(d.n_samples == 4000);
  CHECK(d.counts.sum() == 4000);
  CHECK(d.bin_edges.size() == 26);
  CHECK(d.sample_min >= 1.0);
  CHECK(d.sample_max <= 2.5);
  CHECK(d.bin_edges[0] == doctest::Approx(d.sample_min));
  CHECK(d.bin_edges[25] == doctest::Approx(d.sample_max));

  double mass = 0.0;
  for (int b = 0; b < 25; ++b) mass += d.density[b] * (d.bin_edges[b + 1] - d.bin_edges[b]);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(d.log_transform);  // all sample values are positive
  CHECK(d.kde_x.size() == 256);
  CHECK(std::abs(trapezoid(d.kde_x, d.kde_density) - 1.0) <= 1e-3);
}

TEST_CASE("sampled distribution is deterministic in the seed") {
  const ParamDomain dom = ParamDomain::unit(1);
  auto f = [](const Eigen::VectorXd& y) { return std::sin(6.0 * y[0]); };
  const QoiDistribution a = qoi_distribution(f, dom, 500, 42, 10, 64);
  const QoiDistribution b = qoi_distribution(f, dom, 500, 42, 10, 64);
  const QoiDistribution c = qoi_distribution(f, dom, 500, 43, 10, 64);
  CHECK(a.sample_min == b.sample_min);
  CHECK(a.sample_max == b.sample_max);
  CHECK((a.counts - b.counts).cwiseAbs().maxCoeff() == 0);
  CHECK((a.kde_density - b.kde_density).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.sample_min != c.sample_min);  // different sample stream
  CHECK(!a.log_transform);              // sin takes negative values here
}

TEST_CASE("sampled distribution of a constant field widens to a unit band") {
  const ParamDomain dom = ParamDomain::unit(2);
  const QoiDistribution d =
      qoi_distribution([](const Eigen::VectorXd&) { return 2.0; }, dom, 100, 0, 5, 32);
  CHECK(d.sample_min == 2.0);
  CHECK(d.sample_max == 2.0);
  CHECK(d.bin_edges[0] == doctest::Approx(1.5));
  CHECK(d.bin_edges[5] == doctest::Approx(2.5));
  CHECK(d.counts.sum() == 100);
  // every sample lands in the bin containing 2.0
  CHECK(d.counts.maxCoeff() == 100);
  double mass = 0.0;
  for (int b = 0; b < 5; ++b) mass += d.density[b] * (d.bin_edges[b + 1] - d.bin_edges[b]);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(trapezoid(d.kde_x, d.kde_density) - 1.0) <= 1e-3);
}

TEST_CASE("sampled distribution rejects bad arguments and non-finite values") {
  const ParamDomain dom = ParamDomain::unit(1);
  auto f = [](const Eigen::VectorXd& y) { return y[0]; };
  CHECK_THROWS_AS(qoi_distribution(f, dom, 1, 0, 10, 64), std::invalid_argument);
  CHECK_THROWS_AS(qoi_distribution(f, dom, 100, 0, 0, 64), std::invalid_argument);
  CHECK_THROWS_AS(qoi_distribution(f, dom, 100, 0, 10, 1), std::invalid_argument);
  auto bad = [](const Eigen::VectorXd& y) { return y[0] < 2.0 ? std::nan("") : 0.0; };
  CHECK_THROWS_AS(qoi_distribution(bad, dom, 100, 0, 10, 64), std::runtime_error);
}

TEST_CASE("float formatting round-trips exactly") {
  for (double v : {1.0 / 3.0, M_PI, 1e-300, -2.5e17, 0.1, -0.0, 988.25}) {
    const std::string s = format_float(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("convergence csv layout") {
  std::vector<ConvergencePoint> rows = {{1, 10.0, 0.5, 0.1}, {2, 25.0, 0.75, 0.05}};
  const std::string path = temp_file("conv");
  write_convergence_csv(path, rows);
  const auto ls = lines_of(slurp(path));
  REQUIRE(ls.size() == 3);
  CHECK(ls[0] == "iteration,cost,mean,std");
  CHECK(ls[1] == "1,10,0.5,0.10000000000000001");
  CHECK(ls[2] == "2,25,0.75,0.050000000000000003");
  std::remove(path.c_str());
}

TEST_CASE("histogram and kde csv layout") {
  const ParamDomain dom = ParamDomain::unit(1);
  const QoiDistribution d =
      qoi_distribution([](const Eigen::VectorXd& y) { return y[0]; }, dom, 200, 3, 8, 32);
  const std::string hpath = temp_file("hist");
  const std::string kpath = temp_file("kde");
  write_histogram_csv(hpath, d);
  write_kde_csv(kpath, d);

  const auto hl = lines_of(slurp(hpath));
  REQUIRE(hl.size() == 9);  // header + one row per bin
  CHECK(hl[0] == "bin_lo,bin_hi,count,density");
  long total = 0;
  for (int b = 1; b <= 8; ++b) {
    std::istringstream row(hl[b]);
    std::string lo, hi, count, dens;
    std::getline(row, lo, ',');
    std::getline(row, hi, ',');
    std::getline(row, count, ',');
    std::getline(row, dens, ',');
    total += std::strtol(count.c_str(), nullptr, 10);
    CHECK(std::strtod(lo.c_str(), nullptr) < std::strtod(hi.c_str(), nullptr));
  }
  CHECK(total == 200);

  const auto kl = lines_of(slurp(kpath));
  REQUIRE(kl.size() == 33);
  CHECK(kl[0] == "x,density");
  std::remove(hpath.c_str());
  std::remove(kpath.c_str());
}

TEST_CASE("response surface csv spans the domain on a midpoint lattice") {
  const ParamDomain dom{Eigen::Vector2d(0.0, 10.0), Eigen::Vector2d(2.0, 14.0)};
  auto f = [](const Eigen::VectorXd& y) { return y[0] + y[1]; };
  const std::string path = temp_file("surf");
  write_response_surface_csv(path, f, dom, 4);
  const auto ls = lines_of(slurp(path));
  REQUIRE(ls.size() == 17);  // header + 4*4 rows
  CHECK(ls[0] == "y1,y2,value");
  // first lattice point is the midpoint of the first cell in each direction
  std::istringstream row(ls[1]);
  std::string y1, y2, v;
  std::getline(row, y1, ',');
  std::getline(row, y2, ',');
  std::getline(row, v, ',');
  CHECK(std::strtod(y1.c_str(), nullptr) == doctest::Approx(0.25));
  CHECK(std::strtod(y2.c_str(), nullptr) == doctest::Approx(10.5));
  CHECK(std::strtod(v.c_str(), nullptr) == doctest::Approx(10.75));
  std::remove(path.c_str());

  const ParamDomain dom3 = ParamDomain::unit(3);
  CHECK_THROWS_AS(write_response_surface_csv(path, f, dom3, 4), std::invalid_argument);
}

TEST_CASE("convergence svg is well formed and carries the title") {
  std::vector<ConvergencePoint> rows = {{1, 10.0, 0.5, 0.1}, {2, 40.0, 0.9, 0.02}};
  const std::string path = temp_file("svg");
  write_convergence_svg(path, rows, "demo run");
  const std::string body = slurp(path);
  CHECK(body.find("<svg") == 0);
  CHECK(body.find("demo run") != std::string::npos);
  CHECK(body.find("<polyline") != std::string::npos);
  CHECK(body.rfind("</svg>\n") == body.size() - 7);
  std::remove(path.c_str());

  // empty input still produces a valid frame
  write_convergence_svg(path, {}, "empty");
  const std::string empty = slurp(path);
  CHECK(empty.find("<svg") == 0);
  CHECK(empty.find("<polyline") == std::string::npos);
  std::remove(path.c_str());
}
