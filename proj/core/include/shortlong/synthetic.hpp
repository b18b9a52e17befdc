#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "shortlong/data_model.hpp"

namespace shortlong {

/// Branches of the toy behavior kernel s0 -> s1.
enum class ToyBranch { kStay, kScale, kJump };

struct ToyConfig {
  std::size_t n_behavior = 5000;
  std::size_t n_target = 100;
  double noise_omega = 1.0;
  double state_noise_sigma = 0.1;
  std::uint64_t seed = 0;

  /// Test hooks: pin every behavior draw to one branch and/or drop all
  /// Gaussian state noise (grid jitter and s1 noise).
  std::optional<ToyBranch> forced_branch;
  bool suppress_state_noise = false;

  void validate() const;
};

struct ToySample {
  double s0 = 0.0;
  double s1 = 0.0;
  double true_return = 0.0;
  double observed_return = 0.0;
  ToyBranch branch = ToyBranch::kStay;
};

/// f(s0, s1) = 5 s0 + s1 + s1^2.
double toy_true_return(double s0, double s1) noexcept;

/// Noise-free behavior transition; `u` is the U[0,1) draw of the scale branch.
double toy_behavior_mean_next(double s0, ToyBranch branch, double u) noexcept;
/// Noise-free target transition.
double toy_target_mean_next(double s0) noexcept;

/// n points evenly spaced over [0, 1.5], endpoints included.
std::vector<double> toy_grid(std::size_t n);

Trajectory toy_prefix(double s0, double s1);

std::vector<ToySample> draw_behavior_samples(const ToyConfig& config);
std::vector<ToySample> draw_target_samples(const ToyConfig& config);

BehaviorDataset sample_behavior(const ToyConfig& config);

struct ToyTargetDraw {
  TargetDataset data;
  /// f(s0, s1) per trajectory; evaluation only.
  std::vector<double> true_returns;
  /// f(s0, s1) + N(0, omega) per trajectory, i.e. what a full-horizon
  /// on-policy rollout would have observed.
  std::vector<double> observed_returns;
};

ToyTargetDraw sample_target(const ToyConfig& config);

/// Exact densities of the toy generating process, treating s0 as drawn from
/// the uniform mixture of N(g_j, sigma^2) over the grid points g_j.
class ToyDensityOracle {
 public:
  ToyDensityOracle(std::size_t n_behavior, std::size_t n_target, double sigma);

  double behavior_density(double s0, double s1) const;
  double target_density(double s0, double s1) const;
  /// h(s0, s1) = p_e / p_b; 0 where the behavior density underflows.
  double ratio(double s0, double s1) const;
  double ratio(const Trajectory& prefix) const;

  /// E_{pi_e}[f(s0, s1)] over the target generating process.
  double target_value() const;
  /// E_{pi_b}[f(s0, s1)].
  double behavior_value() const;

  double sigma() const noexcept { return sigma_; }

 private:
  double mixture_density(const std::vector<double>& table, double s0) const;
  double behavior_transition(double s0, double s1) const;
  double target_transition(double s0, double s1) const;

  std::size_t n_behavior_;
  std::size_t n_target_;
  double sigma_;
  double lo_;
  double step_;
  std::vector<double> behavior_s0_;
  std::vector<double> target_s0_;
};

}  // namespace shortlong
