#include "shortlong/density_ratio.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"

namespace shortlong {

BinGrid BinGrid::toy_default() { return BinGrid{{50, 50}, {{-0.5, 2.0}, {-0.5, 2.0}}}; }

int BinGrid::total_bins() const {
  int total = 1;
  for (const int b : bins) total *= b;
  return total;
}

void BinGrid::validate() const {
  if (bins.empty() || bins.size() != ranges.size()) {
    throw InvalidArgument("bin grid needs one range per axis");
  }
  for (std::size_t d = 0; d < bins.size(); ++d) {
    if (bins[d] < 1) throw InvalidArgument("bin count must be >= 1");
    const auto [lo, hi] = ranges[d];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw InvalidArgument("bin range must be finite and non-empty");
    }
  }
}

int BinGrid::bin_of(const Trajectory& prefix) const {
  const auto values = prefix.states();
  if (static_cast<int>(values.size()) != dims()) {
    throw InvalidArgument("bin grid has " + std::to_string(dims()) + " axes but the prefix has " +
                          std::to_string(values.size()) + " state values");
  }
  int flat = 0;
  for (int d = 0; d < dims(); ++d) {
    const auto [lo, hi] = ranges[static_cast<std::size_t>(d)];
    const int nb = bins[static_cast<std::size_t>(d)];
    const double pos = (values[static_cast<std::size_t>(d)] - lo) / (hi - lo) * nb;
    int index = std::isfinite(pos) ? static_cast<int>(std::floor(pos)) : (pos > 0 ? nb - 1 : 0);
    index = std::clamp(index, 0, nb - 1);
    flat = flat * nb + index;
  }
  return flat;
}

std::vector<int> BinGrid::coordinates(int flat_bin) const {
  std::vector<int> coords(bins.size());
  for (int d = dims() - 1; d >= 0; --d) {
    const int nb = bins[static_cast<std::size_t>(d)];
    coords[static_cast<std::size_t>(d)] = flat_bin % nb;
    flat_bin /= nb;
  }
  return coords;
}

double DensityRatioModel::clip(double r) const {
  if (!(r > 0.0)) return 0.0;
  return std::min(r, clip_max_);
}

void DensityRatioModel::recompute_cell_ratios() {
  const double n = static_cast<double>(behavior_size_);
  const double m = static_cast<double>(target_size_);
  cell_ratio_.assign(numerator_.size(), 0.0);
  for (std::size_t c = 0; c < numerator_.size(); ++c) {
    if (denominator_[c] > 0.0 && numerator_[c] > 0.0) {
      cell_ratio_[c] = clip((numerator_[c] / m) / (denominator_[c] / n));
    }
  }
}

int DensityRatioModel::cell_of(const Trajectory& prefix) const {
  switch (kind_) {
    case RatioKind::kHistogram:
      return grid_.bin_of(prefix);
    case RatioKind::kTabular: {
      const auto it = key_index_.find(key_(prefix));
      return it == key_index_.end() ? -1 : it->second;
    }
    case RatioKind::kClassifier:
      break;
  }
  throw InvalidArgument("classifier density ratios have no cells");
}

double DensityRatioModel::ratio(const Trajectory& prefix) const {
  if (kind_ == RatioKind::kClassifier) {
    const auto phi = features_.apply(prefix);
    double z = bias_;
    for (std::size_t j = 0; j < phi.size(); ++j) {
      z += weights_[j] * (phi[j] - feature_mean_[j]) / feature_scale_[j];
    }
    // p / (1 - p) = exp(z); cap the exponent before clipping to avoid overflow.
    return clip(std::exp(std::min(z, 700.0)) * prior_factor_);
  }
  const int cell = cell_of(prefix);
  return cell < 0 ? 0.0 : cell_ratio_[static_cast<std::size_t>(cell)];
}

void DensityRatioModel::dump_histogram_csv(std::ostream& out) const {
  if (kind_ != RatioKind::kHistogram) {
    throw InvalidArgument("histogram dump requested for a non-histogram ratio model");
  }
  out << "bin_index_s0,bin_index_s1,count_b,count_e,ratio\n";
  out.precision(12);
  for (int b = 0; b < grid_.total_bins(); ++b) {
    const auto coords = grid_.coordinates(b);
    const auto ub = static_cast<std::size_t>(b);
    out << coords[0] << ',' << (coords.size() > 1 ? coords[1] : 0) << ',' << denominator_[ub]
        << ',' << numerator_[ub] << ',' << cell_ratio_[ub] << '\n';
  }
}

namespace {

void check_clip(const RatioOptions& options) {
  if (!(options.clip_max > 0.0)) throw InvalidArgument("clip_max must be positive");
}

}  // namespace

DensityRatioModel fit_histogram_ratio(const BehaviorDataset& behavior, const TargetDataset& target,
                                      const BinGrid& grid, const RatioOptions& options) {
  grid.validate();
  check_clip(options);
  DensityRatioModel model;
  model.kind_ = RatioKind::kHistogram;
  model.clip_max_ = options.clip_max;
  model.grid_ = grid;
  model.behavior_size_ = behavior.size();
  model.target_size_ = target.size();
  const auto cells = static_cast<std::size_t>(grid.total_bins());
  model.numerator_.assign(cells, 0.0);
  model.denominator_.assign(cells, 0.0);
  for (const auto& item : behavior.items()) {
    model.denominator_[static_cast<std::size_t>(grid.bin_of(item.prefix))] += 1.0;
  }
  for (const auto& tr : target.items()) {
    const auto b = static_cast<std::size_t>(grid.bin_of(tr));
    model.numerator_[b] += 1.0;
    if (model.denominator_[b] == 0.0) {
      if (options.strict_coverage) {
        const auto coords = grid.coordinates(static_cast<int>(b));
        std::string where;
        for (const int c : coords) where += (where.empty() ? "" : ", ") + std::to_string(c);
        throw CoverageError("target sample falls in bin (" + where +
                            ") which holds no behavior samples");
      }
      ++model.uncovered_;
    }
  }
  model.raw_behavior_count_ = model.denominator_;
  model.recompute_cell_ratios();
  return model;
}

DensityRatioModel fit_tabular_ratio(const BehaviorDataset& behavior, const TargetDataset& target,
                                    const KeyFunction& key, const RatioOptions& options) {
  if (!key) throw InvalidArgument("tabular density ratio needs a key function");
  check_clip(options);
  DensityRatioModel model;
  model.kind_ = RatioKind::kTabular;
  model.clip_max_ = options.clip_max;
  model.key_ = key;
  model.behavior_size_ = behavior.size();
  model.target_size_ = target.size();
  auto index_of = [&](const Trajectory& tr) {
    const auto [it, inserted] =
        model.key_index_.try_emplace(key(tr), static_cast<int>(model.key_index_.size()));
    if (inserted) {
      model.numerator_.push_back(0.0);
      model.denominator_.push_back(0.0);
    }
    return static_cast<std::size_t>(it->second);
  };
  for (const auto& item : behavior.items()) model.denominator_[index_of(item.prefix)] += 1.0;
  for (const auto& tr : target.items()) {
    const auto c = index_of(tr);
    model.numerator_[c] += 1.0;
    if (model.denominator_[c] == 0.0) {
      if (options.strict_coverage) {
        throw CoverageError("target trajectory with key '" + key(tr) +
                            "' never occurs in the behavior data");
      }
      ++model.uncovered_;
    }
  }
  model.raw_behavior_count_ = model.denominator_;
  model.recompute_cell_ratios();
  return model;
}

DensityRatioModel fit_classifier_ratio(const BehaviorDataset& behavior, const TargetDataset& target,
                                       const FeatureMap& features, const RatioOptions& options,
                                       const ClassifierOptions& classifier) {
  check_clip(options);
  const auto n_b = static_cast<Eigen::Index>(behavior.size());
  const auto n_e = static_cast<Eigen::Index>(target.size());
  const Eigen::Index n = n_b + n_e;
  const Eigen::Index d = features.dim;

  Eigen::MatrixXd x(n, d + 1);
  Eigen::VectorXd y(n);
  std::vector<double> phi(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trajectory& tr = i < n_b ? behavior[static_cast<std::size_t>(i)].prefix
                                   : target[static_cast<std::size_t>(i - n_b)];
    features.apply_into(tr, phi);
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = phi[static_cast<std::size_t>(j)];
    x(i, d) = 1.0;
    y(i) = i < n_b ? 0.0 : 1.0;
  }

  DensityRatioModel model;
  model.kind_ = RatioKind::kClassifier;
  model.clip_max_ = options.clip_max;
  model.features_ = features;
  model.behavior_size_ = behavior.size();
  model.target_size_ = target.size();
  model.prior_factor_ = static_cast<double>(n_b) / static_cast<double>(n_e);
  model.feature_mean_.assign(static_cast<std::size_t>(d), 0.0);
  model.feature_scale_.assign(static_cast<std::size_t>(d), 1.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mean).square().mean());
    model.feature_mean_[static_cast<std::size_t>(j)] = mean;
    model.feature_scale_[static_cast<std::size_t>(j)] = sd > 0.0 ? sd : 1.0;
    x.col(j) = (x.col(j).array() - mean) / model.feature_scale_[static_cast<std::size_t>(j)];
  }

  // Fixed step 1/L, L the Lipschitz constant of the penalized logistic loss gradient.
  const Eigen::MatrixXd hessian_bound = x.transpose() * x / static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_bound, Eigen::EigenvaluesOnly);
  const double lipschitz = 0.25 * eig.eigenvalues().maxCoeff() + classifier.l2;
  const double step = 1.0 / lipschitz;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd grad(d + 1);
  double grad_norm = 0.0;
  bool converged = false;
  for (int iter = 0; iter < classifier.max_iterations; ++iter) {
    const Eigen::VectorXd z = x * w;
    const Eigen::VectorXd p = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    grad = x.transpose() * (p - y) / static_cast<double>(n);
    grad.head(d) += classifier.l2 * w.head(d);
    grad_norm = grad.norm();
    if (grad_norm <= classifier.tolerance) {
      converged = true;
      break;
    }
    w -= step * grad;
  }
  if (!converged) {
    throw ConvergenceError("logistic density-ratio classifier did not converge in " +
                               std::to_string(classifier.max_iterations) +
                               " iterations (gradient norm " + std::to_string(grad_norm) + ")",
                           grad_norm);
  }
  model.weights_.assign(w.data(), w.data() + d);
  model.bias_ = w(d);
  return model;
}

DensityRatioModel corrupt_density_denominator(const DensityRatioModel& model,
                                              std::span<const double> perturbations) {
  if (model.kind() == RatioKind::kClassifier) {
    throw InvalidArgument("denominator corruption applies to count-based ratio models only");
  }
  if (perturbations.size() != model.denominator_.size()) {
    throw InvalidArgument("need one perturbation per ratio cell");
  }
  constexpr double kFloor = 1e-3;
  DensityRatioModel out = model;
  for (std::size_t c = 0; c < out.denominator_.size(); ++c) {
    out.denominator_[c] = std::max(out.denominator_[c] + perturbations[c], kFloor);
  }
  out.recompute_cell_ratios();
  return out;
}

DensityRatioModel corrupt_density_denominator(const DensityRatioModel& model, std::uint64_t seed) {
  Rng rng = make_stream(seed, "ratio/denominator-noise");
  std::normal_distribution<double> noise(10.0, 10.0);
  std::vector<double> perturbations(model.denominator_counts().size());
  for (auto& p : perturbations) p = noise(rng);
  return corrupt_density_denominator(model, perturbations);
}

WeightDiagnostic mean_weight_diagnostic(const std::function<double(const Trajectory&)>& ratio,
                                        const BehaviorDataset& behavior) {
  double total = 0.0;
  for (const auto& item : behavior.items()) total += ratio(item.prefix);
  const double mean = total / static_cast<double>(behavior.size());
  return WeightDiagnostic{mean, mean < 0.8 || mean > 1.2};
}

WeightDiagnostic mean_weight_diagnostic(const DensityRatioModel& model,
                                        const BehaviorDataset& behavior) {
  return mean_weight_diagnostic([&](const Trajectory& tr) { return model.ratio(tr); }, behavior);
}

DensityRatioModel fit_ratio(const RatioConfig& config, const BehaviorDataset& behavior,
                            const TargetDataset& target, std::uint64_t corruption_seed) {
  DensityRatioModel model;
  switch (config.kind) {
    case RatioKind::kHistogram:
      model = fit_histogram_ratio(behavior, target, config.grid, config.options);
      break;
    case RatioKind::kTabular:
      model = fit_tabular_ratio(behavior, target, config.key, config.options);
      break;
    case RatioKind::kClassifier:
      model = fit_classifier_ratio(behavior, target, config.features, config.options,
                                   config.classifier);
      break;
  }
  if (config.corrupt_denominator) model = corrupt_density_denominator(model, corruption_seed);
  return model;
}

}  // namespace shortlong
