#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "shortlong/data_model.hpp"
#include "shortlong/estimators.hpp"

namespace shortlong {

/// Quantities entering the finite-sample deviation bound of the DR estimator.
struct BoundInputs {
  double var_target = 0.0;       // Var_{pi_e} f(tau)
  double second_moment_b = 0.0;  // E_{pi_b}[h(tau)^2 (G - f(tau))^2]
  std::vector<double> eps_e;     // per fold, L2(pi_e) error of f^(k)
  std::vector<double> eps_b;     // per fold, L2(pi_b) error of f^(k)
  std::vector<double> eps_h;     // per fold, L2(pi_b) error of h^(k)
  double n = 0.0;                // |D_b|
  double m = 0.0;                // |D_e|
  int k = 2;
  double delta = 0.05;
  double horizon = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;

  void validate() const;
};

struct BoundBreakdown {
  std::array<double, 7> terms{};
  double total = 0.0;
};

/// With L = log(4K/delta):
///   t1 = sqrt(2 var_target L / M)          t2 = sqrt(2 second_moment_b L / N)
///   t3 = (1/K) sum_k eps_b eps_h           t4 = 2 H K L / M
///   t5 = max_k eps_e sqrt(2 K L / M)       t6 = 4 C1 C2 H K L / N
///   t7 = 3 C1 H max_k (eps_b + eps_h) sqrt(2 K L / N)
BoundBreakdown evaluate_bound(const BoundInputs& inputs);

/// (1/K) sum_k sum_tau p_e(tau) delta_f[k][tau] (1 - ratio_rel[k][tau]) over an
/// enumerated target distribution.
double product_bias(std::span<const double> target_probs,
                    const std::vector<std::vector<double>>& delta_f,
                    const std::vector<std::vector<double>>& ratio_rel);

/// Same expectation estimated from target samples.
double product_bias_sampled(std::span<const Trajectory> target_samples,
                            const std::vector<PrefixFunction>& delta_f,
                            const std::vector<PrefixFunction>& ratio_rel);

/// hat_h / h elementwise over the states with positive target mass;
/// CoverageError where h = 0 but the target puts mass.
std::vector<double> relative_ratio(std::span<const double> target_probs,
                                   std::span<const double> estimated_ratio,
                                   std::span<const double> true_ratio);

enum class ToyNuisances {
  kOracle,  // f and h exact
  kFitted,  // intercept-free quadratic OLS and histogram ratio, cross-fitted
};

struct CoverageSettings {
  std::size_t n_behavior = 5000;
  std::size_t n_target = 100;
  double omega = 1.0;
  int k = 2;
  double delta = 0.05;
  std::size_t n_seeds = 200;
  std::uint64_t base_seed = 0;
  ToyNuisances nuisances = ToyNuisances::kFitted;
  /// Fresh oracle draws per seed for the eps, variance and moment terms.
  std::size_t oracle_samples = 100000;
};

struct CoverageRow {
  std::uint64_t seed = 0;
  BoundBreakdown bound;
  double estimate = 0.0;
  double truth = 0.0;
  double empirical_error = 0.0;
  bool covered = false;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;
  double coverage = 0.0;
};

CoverageReport empirical_bound_coverage(const CoverageSettings& settings);

/// `term_1,...,term_7,total,empirical_error,covered` per seed.
void write_coverage_csv(std::ostream& out, const CoverageReport& report);

}  // namespace shortlong
