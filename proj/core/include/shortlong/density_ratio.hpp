#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shortlong/data_model.hpp"
#include "shortlong/regression.hpp"

namespace shortlong {

/// A rectangular grid over the prefix's states, one axis per state entry.
struct BinGrid {
  std::vector<int> bins;
  std::vector<std::pair<double, double>> ranges;

  /// 50 x 50 bins over [-0.5, 2.0]^2 for (s0, s1).
  static BinGrid toy_default();

  int dims() const noexcept { return static_cast<int>(bins.size()); }
  int total_bins() const;
  /// Values outside a range fall into that axis' edge bin.
  int bin_of(const Trajectory& prefix) const;
  std::vector<int> coordinates(int flat_bin) const;
  void validate() const;
};

enum class RatioKind { kHistogram, kTabular, kClassifier };

struct RatioOptions {
  double clip_max = 100.0;
  /// When false, target samples that land where the behavior data has no
  /// mass are counted (see DensityRatioModel::uncovered_target_count) instead
  /// of raising CoverageError.
  bool strict_coverage = true;
};

struct ClassifierOptions {
  int max_iterations = 10000;
  double tolerance = 1e-8;
  /// L2 penalty on the non-intercept logistic weights.
  double l2 = 1e-2;
};

/// A fitted estimate of p(tau | pi_e) / p(tau | pi_b), clipped to [0, clip_max].
class DensityRatioModel {
 public:
  RatioKind kind() const noexcept { return kind_; }
  double clip_max() const noexcept { return clip_max_; }
  std::size_t behavior_size() const noexcept { return behavior_size_; }
  std::size_t target_size() const noexcept { return target_size_; }

  double ratio(const Trajectory& prefix) const;

  /// Histogram and tabular kinds: per-cell target counts, behavior counts
  /// (possibly perturbed) and resulting ratios.
  std::span<const double> numerator_counts() const noexcept { return numerator_; }
  std::span<const double> denominator_counts() const noexcept { return denominator_; }
  std::span<const double> cell_ratios() const noexcept { return cell_ratio_; }
  /// Target samples whose cell holds no behavior samples.
  std::size_t uncovered_target_count() const noexcept { return uncovered_; }
  const BinGrid& grid() const noexcept { return grid_; }
  /// Cell index for tabular and histogram kinds; -1 for unseen tabular keys.
  int cell_of(const Trajectory& prefix) const;

  /// `bin_index_s0,bin_index_s1,count_b,count_e,ratio` for each histogram bin.
  void dump_histogram_csv(std::ostream& out) const;

  friend DensityRatioModel fit_histogram_ratio(const BehaviorDataset&, const TargetDataset&,
                                               const BinGrid&, const RatioOptions&);
  friend DensityRatioModel fit_tabular_ratio(const BehaviorDataset&, const TargetDataset&,
                                             const KeyFunction&, const RatioOptions&);
  friend DensityRatioModel fit_classifier_ratio(const BehaviorDataset&, const TargetDataset&,
                                                const FeatureMap&, const RatioOptions&,
                                                const ClassifierOptions&);
  friend DensityRatioModel corrupt_density_denominator(const DensityRatioModel&,
                                                       std::span<const double>);

 private:
  void recompute_cell_ratios();
  double clip(double r) const;

  RatioKind kind_ = RatioKind::kHistogram;
  double clip_max_ = 100.0;
  std::size_t behavior_size_ = 0;
  std::size_t target_size_ = 0;
  std::size_t uncovered_ = 0;

  // histogram / tabular
  BinGrid grid_;
  KeyFunction key_;
  std::unordered_map<TrajectoryKey, int> key_index_;
  std::vector<double> numerator_;
  std::vector<double> denominator_;
  std::vector<double> raw_behavior_count_;
  std::vector<double> cell_ratio_;

  // classifier
  FeatureMap features_;
  std::vector<double> feature_mean_;
  std::vector<double> feature_scale_;
  std::vector<double> weights_;
  double bias_ = 0.0;
  double prior_factor_ = 1.0;
};

DensityRatioModel fit_histogram_ratio(const BehaviorDataset& behavior, const TargetDataset& target,
                                      const BinGrid& grid, const RatioOptions& options = {});

/// Frequency ratio keyed by exact trajectory identity (or any key function).
DensityRatioModel fit_tabular_ratio(const BehaviorDataset& behavior, const TargetDataset& target,
                                    const KeyFunction& key, const RatioOptions& options = {});

/// Logistic classifier separating behavior (label 0) from target (label 1)
/// prefixes, trained by fixed-step gradient descent on standardized features;
/// ratio = p / (1 - p) * N / M.
DensityRatioModel fit_classifier_ratio(const BehaviorDataset& behavior, const TargetDataset& target,
                                       const FeatureMap& features,
                                       const RatioOptions& options = {},
                                       const ClassifierOptions& classifier = {});

/// Adds `perturbations[b]` to the behavior count of every cell b before the
/// ratio is re-formed. Perturbed denominators below 1e-3 are raised to 1e-3.
DensityRatioModel corrupt_density_denominator(const DensityRatioModel& model,
                                              std::span<const double> perturbations);

/// Same, with one independent N(10, 10) draw per cell from a stream seeded by `seed`.
DensityRatioModel corrupt_density_denominator(const DensityRatioModel& model, std::uint64_t seed);

struct WeightDiagnostic {
  double mean = 0.0;
  bool flagged = false;
};

/// (1/N) sum_i ratio(tau_i) over behavior data; flagged outside [0.8, 1.2].
WeightDiagnostic mean_weight_diagnostic(const std::function<double(const Trajectory&)>& ratio,
                                        const BehaviorDataset& behavior);
WeightDiagnostic mean_weight_diagnostic(const DensityRatioModel& model,
                                        const BehaviorDataset& behavior);

/// Choice of density-ratio estimator used by the estimators.
struct RatioConfig {
  RatioKind kind = RatioKind::kHistogram;
  BinGrid grid = BinGrid::toy_default();
  KeyFunction key;
  FeatureMap features;
  RatioOptions options;
  ClassifierOptions classifier;
  /// Perturb fitted denominators with N(10, 10) noise (histogram/tabular only).
  bool corrupt_denominator = false;
};

/// Fits the configured model; `corruption_seed` drives the denominator noise
/// when `config.corrupt_denominator` is set.
DensityRatioModel fit_ratio(const RatioConfig& config, const BehaviorDataset& behavior,
                            const TargetDataset& target, std::uint64_t corruption_seed = 0);

}  // namespace shortlong
