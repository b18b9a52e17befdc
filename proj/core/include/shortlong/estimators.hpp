#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shortlong/data_model.hpp"
#include "shortlong/density_ratio.hpp"
#include "shortlong/regression.hpp"
#include "shortlong/sepsis.hpp"

namespace shortlong {

struct ValueEstimate {
  std::string estimator_id;
  double value = 0.0;
  /// Cross-fitted estimators: V^(k) per fold; value is their mean.
  std::vector<double> per_fold_values;
  /// Regression estimators: prediction per target trajectory; value is their mean.
  std::vector<double> per_trajectory_predictions;
  std::map<std::string, double> diagnostics;
};

using PrefixFunction = std::function<double(const Trajectory&)>;

/// Fits f on all of D_b and averages its predictions over D_e.
ValueEstimate estimate_soft(const BehaviorDataset& behavior, const TargetDataset& target,
                            const RegressorConfig& regressor);

/// Same with f fitted under weights h(tau_i) from a ratio model fitted on (D_b, D_e).
ValueEstimate estimate_w_soft(const BehaviorDataset& behavior, const TargetDataset& target,
                              const RegressorConfig& regressor, const RatioConfig& ratio,
                              std::uint64_t corruption_seed = 0);

/// Regression-only term of the DR estimator.
enum class BaselineTerm {
  kTarget,              // (1/|D_e|) sum f(tau') over target prefixes
  kReweightedBehavior,  // (1/|D_b|) sum h(tau) f(tau) over behavior prefixes
};

struct DrOptions {
  int k = 2;
  std::uint64_t seed = 0;
  /// Fit f^(k) with ratio weights (the dr-w-soft variant).
  bool weighted = false;
  BaselineTerm baseline = BaselineTerm::kTarget;
};

/// Nuisances used on one fold.
struct FoldNuisances {
  PrefixFunction f;
  PrefixFunction h;
};

/// Trains fold-k nuisances from the complements of fold k in both datasets.
using NuisanceFitter = std::function<FoldNuisances(const BehaviorDataset& behavior_train,
                                                   const TargetDataset& target_train, int fold)>;

/// (1/n) sum h_i (G_i - f_i) + mean of the baseline values.
double dr_fold_value(std::span<const double> ratios, std::span<const double> returns,
                     std::span<const double> behavior_predictions,
                     std::span<const double> baseline_values);

/// Cross-fitted DR estimate over an explicit fold plan.
ValueEstimate estimate_dr(const BehaviorDataset& behavior, const TargetDataset& target,
                          const FoldPlan& plan, const NuisanceFitter& fit,
                          BaselineTerm baseline = BaselineTerm::kTarget);

/// Cross-fitted DR estimate with regression and ratio models built from configs.
ValueEstimate estimate_dr(const BehaviorDataset& behavior, const TargetDataset& target,
                          const RegressorConfig& regressor, const RatioConfig& ratio,
                          const DrOptions& options);

/// Mean of full-horizon on-policy returns.
ValueEstimate estimate_mc(const BehaviorDataset& target_full);

/// LOPE: f is regressed on (prefix features, one-hot action bucket of the
/// action taken right after the prefix); the baseline is sum_a pi_e(a|tau) f(tau, a).
struct LopeConfig {
  FeatureMap state_features;
  int action_buckets = 0;
  std::function<int(int)> bucket_of;
  /// pi_e(.|tau) over action ids.
  std::function<std::vector<double>(const Trajectory&)> target_action_probs;
  LeastSquaresOptions options;
};

/// (1/n) sum h_i (G_i - f_taken_i) + (1/n) sum f_expected_i.
double lope_value(std::span<const double> ratios, std::span<const double> returns,
                  std::span<const double> taken_predictions,
                  std::span<const double> expected_predictions);

ValueEstimate estimate_lope(const BehaviorDataset& behavior, const TargetDataset& target,
                            const LopeConfig& lope, const RatioConfig& ratio,
                            std::uint64_t corruption_seed = 0);

/// Online model-based baseline: reward and termination are known; the
/// transition kernel is estimated from target prefixes, with uniform rows
/// over all states for unseen (s, a).
struct ModelBasedConfig {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> reward;
  std::vector<char> terminal;
  Policy target_policy;
  int full_h = 20;
  double discount = 1.0;
};

ModelBasedConfig model_based_config(const MdpSpec& spec, const Policy& target_policy);

/// Count-based kernel estimate as an MdpSpec (initial = empirical s_0 distribution).
MdpSpec estimate_transition_model(const TargetDataset& target, const ModelBasedConfig& config);

ValueEstimate estimate_model_based(const TargetDataset& target, const ModelBasedConfig& config);

enum class ExtrapolationMode { kAverage, kLast };

/// Per trajectory: realized discounted return if absorbed within the prefix,
/// otherwise (mean or last observed reward) x full_h.
ValueEstimate estimate_extrapolation(const TargetDataset& target, ExtrapolationMode mode,
                                     int full_h, double discount = 1.0);

}  // namespace shortlong
