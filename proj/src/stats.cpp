#include "mfuq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace mfuq {

namespace {

double clamped_std(double mean, double mean_sq) {
  return std::sqrt(std::max(0.0, mean_sq - mean * mean));
}

// kth smallest, 1-based, clamped. Matches the order-statistic convention used
// for surrogate uncertainty bands.
double order_stat(std::vector<double> v, double p) {
  long k = static_cast<long>(std::ceil(p * static_cast<double>(v.size())));
  k = std::max(1L, std::min<long>(k, static_cast<long>(v.size())));
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  return v[k - 1];
}

void require_open(const std::ofstream& out, const std::string& path) {
  if (!out) throw std::runtime_error("cannot open output file: " + path);
}

}  // namespace

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Moments moments_midpoint(const ScalarField& f, const ParamDomain& dom, int per_dim,
                         long point_cap) {
  dom.validate();
  if (per_dim < 1) throw std::invalid_argument("moments_midpoint: per_dim must be >= 1");
  const int n = dom.dim();
  long total = 1;
  for (int d = 0; d < n; ++d) {
    if (total > point_cap / per_dim)
      throw std::runtime_error("moments_midpoint: grid exceeds point cap");
    total *= per_dim;
  }
  Eigen::VectorXd u(n), y(n);
  std::vector<int> idx(n, 0);
  double acc = 0.0, acc_sq = 0.0;
  for (long p = 0; p < total; ++p) {
    for (int d = 0; d < n; ++d) u[d] = (idx[d] + 0.5) / per_dim;
    y = dom.from_unit(u);
    const double v = f(y);
    acc += v;
    acc_sq += v * v;
    for (int d = n - 1; d >= 0; --d) {
      if (++idx[d] < per_dim) break;
      idx[d] = 0;
    }
  }
  Moments m;
  m.mean = acc / static_cast<double>(total);
  m.stddev = clamped_std(m.mean, acc_sq / static_cast<double>(total));
  return m;
}

Moments moments_tensor_cc(const ScalarField& f, const ParamDomain& dom, int level,
                          long point_cap) {
  if (level < 1) throw std::invalid_argument("moments_tensor_cc: level must be >= 1");
  const TensorRule rule = tensor_rule(MultiIndex(dom.dim(), level), dom, point_cap);
  double acc = 0.0, acc_sq = 0.0;
  for (long p = 0; p < rule.points.rows(); ++p) {
    const double v = f(rule.points.row(p).transpose());
    acc += rule.weights[p] * v;
    acc_sq += rule.weights[p] * v * v;
  }
  Moments m;
  m.mean = acc;
  m.stddev = clamped_std(acc, acc_sq);
  return m;
}

QoiDistribution qoi_distribution(const ScalarField& f, const ParamDomain& dom, int n,
                                 std::uint64_t seed, int bins, int kde_points) {
  dom.validate();
  if (n < 2) throw std::invalid_argument("qoi_distribution: need at least 2 samples");
  if (bins < 1 || kde_points < 2) throw std::invalid_argument("qoi_distribution: bad resolution");

  std::mt19937_64 gen(seed);
  const int dims = dom.dim();
  Eigen::VectorXd u(dims);
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dims; ++d)
      u[d] = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    vals[i] = f(dom.from_unit(u));
    if (!std::isfinite(vals[i]))
      throw std::runtime_error("qoi_distribution: non-finite sample value");
  }

  QoiDistribution d;
  d.n_samples = n;
  d.sample_min = *std::min_element(vals.begin(), vals.end());
  d.sample_max = *std::max_element(vals.begin(), vals.end());

  double lo = d.sample_min, hi = d.sample_max;
  if (!(hi > lo)) {  // degenerate sample: one centered unit-width bin band
    lo -= 0.5;
    hi += 0.5;
  }
  d.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b)
    d.bin_edges[b] = lo + (hi - lo) * static_cast<double>(b) / bins;
  d.counts = Eigen::VectorXi::Zero(bins);
  const double width = (hi - lo) / bins;
  for (double v : vals) {
    int b = static_cast<int>((v - lo) / width);
    b = std::max(0, std::min(bins - 1, b));  // top edge is inclusive
    ++d.counts[b];
  }
  d.density.resize(bins);
  for (int b = 0; b < bins; ++b)
    d.density[b] = d.counts[b] / (static_cast<double>(n) * width);

  // Kernel fit on log values when the support allows it, else raw values.
  d.log_transform = d.sample_min > 0.0;
  std::vector<double> t(vals);
  if (d.log_transform)
    for (double& x : t) x = std::log(x);

  double mean = 0.0;
  for (double x : t) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : t) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1));
  const double iqr = order_stat(t, 0.75) - order_stat(t, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  // An (almost) constant sample leaves only summation jitter in the spread;
  // a bandwidth that small collapses the evaluation grid in double precision.
  if (!(h > 1e-12 * std::max(1.0, std::abs(mean))))
    h = 1e-3 * std::max(1.0, std::abs(mean));

  const double tmin = *std::min_element(t.begin(), t.end());
  const double tmax = *std::max_element(t.begin(), t.end());
  const double glo = tmin - 4.0 * h, ghi = tmax + 4.0 * h;
  d.kde_x.resize(kde_points);
  d.kde_density.resize(kde_points);
  const double inv = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
  for (int g = 0; g < kde_points; ++g) {
    const double tg = glo + (ghi - glo) * static_cast<double>(g) / (kde_points - 1);
    double acc = 0.0;
    for (double x : t) {
      const double z = (tg - x) / h;
      acc += std::exp(-0.5 * z * z);
    }
    const double ft = inv * acc;
    if (d.log_transform) {
      const double xg = std::exp(tg);
      d.kde_x[g] = xg;
      d.kde_density[g] = ft / xg;  // change of variables back to the QoI scale
    } else {
      d.kde_x[g] = tg;
      d.kde_density[g] = ft;
    }
  }
  return d;
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergencePoint>& rows) {
  std::ofstream out(path);
  require_open(out, path);
  out << "iteration,cost,mean,std\n";
  for (const auto& r : rows)
    out << r.iteration << ',' << format_float(r.cost) << ',' << format_float(r.mean) << ','
        << format_float(r.stddev) << '\n';
}

void write_histogram_csv(const std::string& path, const QoiDistribution& d) {
  std::ofstream out(path);
  require_open(out, path);
  out << "bin_lo,bin_hi,count,density\n";
  for (int b = 0; b < d.counts.size(); ++b)
    out << format_float(d.bin_edges[b]) << ',' << format_float(d.bin_edges[b + 1]) << ','
        << d.counts[b] << ',' << format_float(d.density[b]) << '\n';
}

void write_kde_csv(const std::string& path, const QoiDistribution& d) {
  std::ofstream out(path);
  require_open(out, path);
  out << "x,density\n";
  for (int g = 0; g < d.kde_x.size(); ++g)
    out << format_float(d.kde_x[g]) << ',' << format_float(d.kde_density[g]) << '\n';
}

void write_response_surface_csv(const std::string& path, const ScalarField& f,
                                const ParamDomain& dom, int per_dim) {
  if (dom.dim() != 2)
    throw std::invalid_argument("write_response_surface_csv: expects a 2-parameter domain");
  if (per_dim < 1) throw std::invalid_argument("write_response_surface_csv: per_dim must be >= 1");
  std::ofstream out(path);
  require_open(out, path);
  out << "y1,y2,value\n";
  Eigen::VectorXd u(2);
  for (int i = 0; i < per_dim; ++i) {
    u[0] = (i + 0.5) / per_dim;
    for (int j = 0; j < per_dim; ++j) {
      u[1] = (j + 0.5) / per_dim;
      const Eigen::VectorXd y = dom.from_unit(u);
      out << format_float(y[0]) << ',' << format_float(y[1]) << ',' << format_float(f(y))
          << '\n';
    }
  }
}

void write_convergence_svg(const std::string& path, const std::vector<ConvergencePoint>& rows,
                           const std::string& title) {
  std::ofstream out(path);
  require_open(out, path);
  const int W = 720, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double cmin = 0, cmax = 1, vmin = 0, vmax = 1;
  if (!rows.empty()) {
    cmin = cmax = rows.front().cost;
    vmin = vmax = rows.front().mean;
    for (const auto& r : rows) {
      cmin = std::min(cmin, r.cost);
      cmax = std::max(cmax, r.cost);
      vmin = std::min(vmin, r.mean);
      vmax = std::max(vmax, r.mean);
    }
  }
  if (!(cmax > cmin)) cmax = cmin + 1;
  if (!(vmax > vmin)) {
    vmax += 0.5;
    vmin -= 0.5;
  }
  auto px = [&](double c) { return ml + (c - cmin) / (cmax - cmin) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (v - vmin) / (vmax - vmin) * (H - mt - mb); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 14
      << "\" text-anchor=\"middle\" font-size=\"12\">cost</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 " << (mt + H - mb) / 2
      << ")\" text-anchor=\"middle\">mean</text>\n";
  out << "<text x=\"" << ml << "\" y=\"" << H - mb + 16 << "\" font-size=\"10\">"
      << format_float(cmin) << "</text>\n";
  out << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 16
      << "\" text-anchor=\"end\" font-size=\"10\">" << format_float(cmax) << "</text>\n";
  out << "<text x=\"" << ml - 4 << "\" y=\"" << H - mb << "\" text-anchor=\"end\" font-size=\"10\">"
      << format_float(vmin) << "</text>\n";
  out << "<text x=\"" << ml - 4 << "\" y=\"" << mt + 10
      << "\" text-anchor=\"end\" font-size=\"10\">" << format_float(vmax) << "</text>\n";
  if (!rows.empty()) {
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : rows) out << px(r.cost) << ',' << py(r.mean) << ' ';
    out << "\"/>\n";
    for (const auto& r : rows)
      out << "<circle cx=\"" << px(r.cost) << "\" cy=\"" << py(r.mean)
          << "\" r=\"2.5\" fill=\"#1f6fb2\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace mfuq
