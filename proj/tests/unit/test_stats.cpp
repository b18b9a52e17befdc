#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"
#include "shortlong/stats.hpp"

using namespace shortlong;

TEST_CASE("independent t-test, hand example") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 3, 4, 5};
  const auto r = t_test_independent(x, y);
  CHECK(r.t_statistic == doctest::Approx(-1.0954451150103321).epsilon(1e-12));
  CHECK(r.degrees_of_freedom == 6.0);
  CHECK(std::round(r.p_value * 1e4) / 1e4 == 0.3153);
  CHECK(r.kind == TestKind::kIndependent);
}

TEST_CASE("paired t-test, hand example") {
  const std::vector<double> x{2, 4, 6};
  const std::vector<double> y{1, 2, 3};
  const auto r = t_test_paired(x, y);
  CHECK(r.t_statistic == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
  CHECK(r.degrees_of_freedom == 2.0);
  CHECK(std::round(r.p_value * 1e4) / 1e4 == 0.0742);
  CHECK(r.kind == TestKind::kPaired);
}

TEST_CASE("one-sided p-values split the two-sided one") {
  const std::vector<double> x{2, 4, 6};
  const std::vector<double> y{1, 2, 3};
  const double two = t_test_paired(x, y).p_value;
  const double greater = t_test_paired(x, y, Sidedness::kGreater).p_value;
  const double less = t_test_paired(x, y, Sidedness::kLess).p_value;
  CHECK(greater == doctest::Approx(two / 2));
  CHECK(less == doctest::Approx(1 - two / 2));
}

TEST_CASE("identical samples") {
  const std::vector<double> x{1, 5, 2, 8};
  const auto r = t_test_independent(x, x);
  CHECK(r.t_statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK_THROWS_AS(t_test_paired(x, x), InvalidArgument);
  const std::vector<double> c{3, 3, 3};
  CHECK_THROWS_AS(t_test_independent(c, c), InvalidArgument);
}

TEST_CASE("invariances") {
  const std::vector<double> x{1.3, 2.9, 0.4, 5.5, 3.1};
  const std::vector<double> y{0.2, 2.2, 1.1, 3.0, 1.9};
  std::vector<double> xs = x;
  std::vector<double> ys = y;
  for (auto& v : xs) v += 100.0;
  for (auto& v : ys) v += 100.0;
  CHECK(t_test_independent(xs, ys).t_statistic == doctest::Approx(t_test_independent(x, y).t_statistic));
  CHECK(t_test_paired(xs, ys).t_statistic == doctest::Approx(t_test_paired(x, y).t_statistic));

  std::vector<std::size_t> order{3, 0, 4, 1, 2};
  std::vector<double> xp;
  std::vector<double> yp;
  for (const auto i : order) {
    xp.push_back(x[i]);
    yp.push_back(y[i]);
  }
  CHECK(t_test_paired(xp, yp).t_statistic == doctest::Approx(t_test_paired(x, y).t_statistic));
  CHECK(t_test_paired(xp, yp).p_value == doctest::Approx(t_test_paired(x, y).p_value));
}

TEST_CASE("p-value falls as |t| grows") {
  const std::vector<double> y{0, 1, 2, 3, 4};
  double last = 2.0;
  for (double shift = 0.0; shift < 6.0; shift += 0.5) {
    std::vector<double> x = y;
    for (auto& v : x) v += shift;
    const double p = t_test_independent(x, y).p_value;
    CHECK(p <= last);
    last = p;
  }
}

TEST_CASE("t CDF against boost") {
  for (const double df : {1.0, 2.0, 3.5, 6.0, 30.0, 200.0}) {
    const boost::math::students_t_distribution<double> dist(df);
    for (double t = -8.0; t <= 8.0; t += 0.37) {
      CHECK(std::abs(student_t_cdf(t, df) - boost::math::cdf(dist, t)) < 1e-10);
    }
  }
  for (const double a : {0.5, 1.0, 3.0, 50.0}) {
    for (const double b : {0.5, 2.0, 7.5}) {
      for (double x = 0.01; x < 1.0; x += 0.07) {
        CHECK(std::abs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-10);
      }
    }
  }
  CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), InvalidArgument);
  CHECK_THROWS_AS(student_t_cdf(0.0, 0.0), InvalidArgument);
}

TEST_CASE("null rejection rate") {
  Rng rng(2024);
  std::normal_distribution<double> z(0.0, 1.0);
  int rejected_ind = 0;
  int rejected_pair = 0;
  const int runs = 4000;
  std::vector<double> x(20);
  std::vector<double> y(20);
  for (int r = 0; r < runs; ++r) {
    for (auto& v : x) v = z(rng);
    for (auto& v : y) v = z(rng);
    rejected_ind += t_test_independent(x, y).p_value < 0.05;
    rejected_pair += t_test_paired(x, y).p_value < 0.05;
  }
  CHECK(std::abs(rejected_ind / double(runs) - 0.05) < 0.02);
  CHECK(std::abs(rejected_pair / double(runs) - 0.05) < 0.02);
}

TEST_CASE("Welch statistic") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{10, 30, 50, 70, 90, 110};
  TTestOptions o;
  o.welch = true;
  const auto r = t_test_independent(x, y, o);
  const double vx = 5.0 / 3.0;
  const double vy = 1400.0;
  const double se2 = vx / 4 + vy / 6;
  CHECK(r.t_statistic == doctest::Approx((2.5 - 60.0) / std::sqrt(se2)));
  const double df = se2 * se2 / ((vx / 4) * (vx / 4) / 3 + (vy / 6) * (vy / 6) / 5);
  CHECK(r.degrees_of_freedom == doctest::Approx(df));
  const boost::math::students_t_distribution<double> dist(df);
  CHECK(r.p_value == doctest::Approx(2 * boost::math::cdf(dist, r.t_statistic)).epsilon(1e-9));
  CHECK(r.degrees_of_freedom < 8.0);
}

TEST_CASE("input errors") {
  const std::vector<double> one{1.0};
  const std::vector<double> two{1.0, 2.0};
  const std::vector<double> three{1.0, 2.0, 4.0};
  CHECK_THROWS_AS(t_test_independent(one, two), InvalidArgument);
  CHECK_THROWS_AS(t_test_paired(two, three), InvalidArgument);
}
