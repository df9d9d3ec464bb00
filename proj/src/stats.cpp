#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "kawasaki/scaling.hpp"

namespace kawasaki {

Estimate mean_estimate(const std::vector<double>& x) {
  Estimate e;
  e.samples = x.size();
  if (x.empty()) return e;
  double s = 0.0;
  for (double v : x) s += v;
  e.value = s / double(x.size());
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - e.value) * (v - e.value);
    e.se = std::sqrt(ss / double(x.size() - 1) / double(x.size()));
  }
  return e;
}

Estimate batch_mean_estimate(const std::vector<double>& x, int batches) {
  if (batches < 2 || x.size() < std::size_t(batches)) return mean_estimate(x);
  const std::size_t per = x.size() / batches;
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += x[i];
    means.push_back(s / double(per));
  }
  Estimate e = mean_estimate(means);
  e.samples = x.size();
  return e;
}

Estimate proportion_estimate(std::uint64_t hits, std::uint64_t trials) {
  Estimate e;
  e.samples = trials;
  if (trials == 0) return e;
  e.value = double(hits) / double(trials);
  e.se = std::sqrt(e.value * (1.0 - e.value) / double(trials));
  return e;
}

Estimate ratio_estimate(const std::vector<double>& y, const std::vector<double>& x) {
  if (y.size() != x.size()) throw std::invalid_argument("ratio_estimate: size mismatch");
  Estimate e;
  e.samples = x.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  if (!(sx > 0.0)) return e;
  e.value = sy / sx;
  if (x.size() > 1) {
    const double mx = sx / double(x.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - e.value * x[i];
      ss += r * r;
    }
    e.se = std::sqrt(ss / double(x.size() - 1) / double(x.size())) / mx;
  }
  return e;
}

double median(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t m = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + m, x.end());
  if (x.size() % 2) return x[m];
  const double hi = x[m];
  const double lo = *std::max_element(x.begin(), x.begin() + m);
  return 0.5 * (lo + hi);
}

double normal_upper_tail(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal(), z)); }

double chi_square_upper_tail(double statistic, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("chi_square_upper_tail: dof must be positive");
  if (statistic <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

ChiSquareResult lattice_normality_test(const std::vector<long>& values, double sigma, double min_expected) {
  if (values.empty()) throw std::invalid_argument("lattice_normality_test: empty sample");
  if (!(sigma > 0.0)) throw std::invalid_argument("lattice_normality_test: sigma must be positive");
  const boost::math::normal law(0.0, sigma);
  const double N = double(values.size());
  auto prob = [&](double a, double b) { return boost::math::cdf(law, b) - boost::math::cdf(law, a); };

  // Grow bins outward from the centre; each side stops once its next bin
  // would expect too little, and the remainder becomes the tail bin.
  const long reach = long(std::ceil(10.0 * sigma)) + 1;
  std::vector<std::pair<double, double>> edges;  // (lo, hi), sorted
  long lo = 0, hi = 0;
  while (hi < reach && N * prob(hi + 0.5, hi + 1.5) >= min_expected && N * prob(hi + 1.5, INFINITY) >= min_expected)
    ++hi;
  while (-lo < reach && N * prob(lo - 1.5, lo - 0.5) >= min_expected && N * prob(-INFINITY, lo - 1.5) >= min_expected)
    --lo;
  edges.push_back({-INFINITY, lo - 0.5});
  for (long v = lo; v <= hi; ++v) edges.push_back({v - 0.5, v + 0.5});
  edges.push_back({hi + 0.5, INFINITY});

  std::vector<double> observed(edges.size(), 0.0);
  for (long v : values) {
    if (v < lo)
      observed.front() += 1.0;
    else if (v > hi)
      observed.back() += 1.0;
    else
      observed[1 + (v - lo)] += 1.0;
  }
  ChiSquareResult r;
  r.bins = int(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double expected = N * prob(edges[i].first, edges[i].second);
    if (expected <= 0.0) continue;
    r.statistic += (observed[i] - expected) * (observed[i] - expected) / expected;
  }
  r.dof = double(r.bins - 1);
  r.p_value = r.dof > 0.0 ? chi_square_upper_tail(r.statistic, r.dof) : 1.0;
  return r;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need two or more paired points");
  const double N = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= N;
  my /= N;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / (N - 2.0) / sxx);
  }
  return f;
}

}  // namespace kawasaki
