#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "shortlong/data_model.hpp"

namespace shortlong {

using TrajectoryKey = std::string;
using KeyFunction = std::function<TrajectoryKey(const Trajectory&)>;

/// Maps a trajectory prefix to a fixed-length real feature vector.
struct FeatureMap {
  std::string name;
  /// Prefix horizon the map expects; -1 accepts any horizon.
  int arity = -1;
  int dim = 0;
  std::function<void(const Trajectory&, std::span<double>)> fill;

  std::vector<double> apply(const Trajectory& prefix) const;
  void apply_into(const Trajectory& prefix, std::span<double> out) const;
};

/// [s0, s1, s1^2] for the two-state toy prefix.
FeatureMap toy_quadratic_features();
/// [s0, s1] for the two-state toy prefix.
FeatureMap toy_linear_features();

/// Key built from every state and reward of the prefix.
TrajectoryKey exact_trajectory_key(const Trajectory& prefix);

struct LeastSquaresOptions {
  bool intercept = true;
  double ridge = 1e-10;
  /// Return the minimum-norm least-squares solution instead of raising when
  /// the weighted design is rank deficient or has too few weighted rows.
  bool minimum_norm_fallback = false;
};

/// f(tau) = theta' phi(tau) + b.
struct LinearModel {
  FeatureMap features;
  std::vector<double> coefficients;
  double intercept = 0.0;
  bool has_intercept = true;

  double predict(const Trajectory& prefix) const;
  /// Feature-map name followed by the coefficient list, one per line.
  void dump(std::ostream& out) const;
};

struct TabularCell {
  double mean = 0.0;
  double count = 0.0;
};

/// Per-key empirical mean of the return; `default_value` for unseen keys.
struct TabularModel {
  KeyFunction key;
  std::map<TrajectoryKey, TabularCell> table;
  double default_value = 0.0;

  double predict(const Trajectory& prefix) const;
};

using Regressor = std::variant<LinearModel, TabularModel>;

double predict(const Regressor& model, const Trajectory& prefix);

/// Solution of min_theta sum_i w_i (theta' x_i + b - y_i)^2.
struct LinearSolution {
  std::vector<double> coefficients;
  double intercept = 0.0;
};

/// Weighted least squares on an explicit design. Rank deficiency of the
/// weighted design (with the intercept column when requested) raises
/// RankDeficientError mentioning `basis_name` unless the options ask for the
/// minimum-norm fallback.
LinearSolution solve_weighted_least_squares(const Eigen::MatrixXd& design,
                                            const Eigen::VectorXd& targets,
                                            std::optional<std::span<const double>> weights,
                                            const LeastSquaresOptions& options,
                                            const std::string& basis_name);

LinearModel fit_least_squares(const BehaviorDataset& data, const FeatureMap& features,
                              std::optional<std::span<const double>> weights = std::nullopt,
                              const LeastSquaresOptions& options = {});

/// Weighted per-key means when weights are given; keys whose weights are all
/// zero are left out of the table.
TabularModel fit_tabular(const BehaviorDataset& data, KeyFunction key,
                         std::optional<std::span<const double>> weights = std::nullopt);

/// Choice of regressor used by the estimators.
struct RegressorConfig {
  enum class Kind { kLinear, kTabular };
  Kind kind = Kind::kLinear;
  FeatureMap features;
  KeyFunction key;
  LeastSquaresOptions options;
};

Regressor fit_regressor(const RegressorConfig& config, const BehaviorDataset& data,
                        std::optional<std::span<const double>> weights = std::nullopt);

}  // namespace shortlong
