#include "shortlong/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "shortlong/errors.hpp"

namespace shortlong {

namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxTerms = 1000;

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxTerms; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw ConvergenceError("incomplete beta continued fraction did not converge", 0.0);
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sum of squared deviations.
double ssd(std::span<const double> v, double mu) {
  double s = 0.0;
  for (const double x : v) s += (x - mu) * (x - mu);
  return s;
}

double p_from_t(double t, double df, Sidedness sides) {
  if (std::isinf(t)) {
    if (sides == Sidedness::kTwoSided) return 0.0;
    return (sides == Sidedness::kGreater) == (t > 0) ? 0.0 : 1.0;
  }
  switch (sides) {
    case Sidedness::kTwoSided:
      return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    case Sidedness::kLess:
      return student_t_cdf(t, df);
    case Sidedness::kGreater:
      return student_t_cdf(-t, df);
  }
  return 1.0;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw InvalidArgument("t distribution needs df > 0");
  if (std::isnan(t)) throw InvalidArgument("t statistic is NaN");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TTestResult t_test_independent(std::span<const double> x, std::span<const double> y,
                               const TTestOptions& options) {
  if (x.size() < 2 || y.size() < 2) throw InvalidArgument("each sample needs at least 2 values");
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double mx = mean(x);
  const double my = mean(y);
  const double vx = ssd(x, mx) / (nx - 1.0);
  const double vy = ssd(y, my) / (ny - 1.0);

  TTestResult r;
  r.kind = TestKind::kIndependent;
  double se2;
  if (options.welch) {
    se2 = vx / nx + vy / ny;
    const double num = se2 * se2;
    const double den = (vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0);
    r.degrees_of_freedom = den > 0.0 ? num / den : nx + ny - 2.0;
  } else {
    const double pooled = ((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0);
    se2 = pooled * (1.0 / nx + 1.0 / ny);
    r.degrees_of_freedom = nx + ny - 2.0;
  }
  const double diff = mx - my;
  if (!(se2 > 0.0)) {
    if (diff == 0.0) throw InvalidArgument("both samples are constant and equal; t is undefined");
    r.t_statistic = diff > 0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
  } else {
    r.t_statistic = diff / std::sqrt(se2);
  }
  r.p_value = p_from_t(r.t_statistic, r.degrees_of_freedom, options.sides);
  return r;
}

TTestResult t_test_paired(std::span<const double> x, std::span<const double> y, Sidedness sides) {
  if (x.size() != y.size()) {
    throw InvalidArgument("paired samples differ in length (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw InvalidArgument("paired test needs at least 2 pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  const double n = static_cast<double>(d.size());
  const double md = mean(d);
  const double var = ssd(d, md) / (n - 1.0);
  if (!(var > 0.0)) throw InvalidArgument("paired differences have zero variance");
  TTestResult r;
  r.kind = TestKind::kPaired;
  r.degrees_of_freedom = n - 1.0;
  r.t_statistic = md / std::sqrt(var / n);
  r.p_value = p_from_t(r.t_statistic, r.degrees_of_freedom, sides);
  return r;
}

}  // namespace shortlong
