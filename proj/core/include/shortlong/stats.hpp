#pragma once

#include <span>

namespace shortlong {

enum class TestKind { kPaired, kIndependent };

enum class Sidedness {
  kTwoSided,
  kLess,     // alternative: mean(x) < mean(y)
  kGreater,  // alternative: mean(x) > mean(y)
};

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  TestKind kind = TestKind::kIndependent;
};

struct TTestOptions {
  /// Unequal-variance (Welch) statistic with Satterthwaite degrees of freedom.
  bool welch = false;
  Sidedness sides = Sidedness::kTwoSided;
};

/// Regularized incomplete beta I_x(a, b) by continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

/// Student t cumulative distribution.
double student_t_cdf(double t, double df);

/// Pooled-variance two-sample t-test by default.
TTestResult t_test_independent(std::span<const double> x, std::span<const double> y,
                               const TTestOptions& options = {});

/// One-sample t-test on the differences x_i - y_i.
TTestResult t_test_paired(std::span<const double> x, std::span<const double> y,
                          Sidedness sides = Sidedness::kTwoSided);

}  // namespace shortlong
