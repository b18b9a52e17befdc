#include "shortlong/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"

namespace shortlong {

namespace {

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<double> ratios_on(const DensityRatioModel& model, const BehaviorDataset& behavior) {
  std::vector<double> w(behavior.size());
  for (std::size_t i = 0; i < behavior.size(); ++i) w[i] = model.ratio(behavior[i].prefix);
  return w;
}

void add_ratio_diagnostics(ValueEstimate& est, const DensityRatioModel& model,
                           std::span<const double> weights, const std::string& suffix = "") {
  const double mean = mean_of(weights);
  const auto clipped = std::count_if(weights.begin(), weights.end(),
                                     [&](double w) { return w >= model.clip_max(); });
  est.diagnostics["mean_weight" + suffix] = mean;
  est.diagnostics["clip_rate" + suffix] =
      static_cast<double>(clipped) / static_cast<double>(weights.size());
  est.diagnostics["uncovered_target" + suffix] = static_cast<double>(model.uncovered_target_count());
}

std::vector<double> checked_weights_for_fit(std::vector<double> w) {
  if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) {
    throw InvalidArgument("every density-ratio weight on the behavior data is zero");
  }
  return w;
}

// Re-raise a fitting error with the fold named, keeping its type.
template <typename Fn>
auto in_fold(int fold, Fn&& fn) {
  const auto tag = [fold](const std::exception& e) {
    return "fold " + std::to_string(fold) + ": " + e.what();
  };
  try {
    return fn();
  } catch (const InsufficientData& e) {
    throw InsufficientData(tag(e));
  } catch (const RankDeficientError& e) {
    throw RankDeficientError(tag(e));
  } catch (const CoverageError& e) {
    throw CoverageError(tag(e));
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(tag(e), e.final_gradient_norm());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(tag(e));
  }
}

}  // namespace

ValueEstimate estimate_soft(const BehaviorDataset& behavior, const TargetDataset& target,
                            const RegressorConfig& regressor) {
  const auto model = fit_regressor(regressor, behavior);
  ValueEstimate est;
  est.estimator_id = "soft";
  est.per_trajectory_predictions.reserve(target.size());
  for (const auto& tr : target.items()) est.per_trajectory_predictions.push_back(predict(model, tr));
  est.value = mean_of(est.per_trajectory_predictions);
  return est;
}

ValueEstimate estimate_w_soft(const BehaviorDataset& behavior, const TargetDataset& target,
                              const RegressorConfig& regressor, const RatioConfig& ratio,
                              std::uint64_t corruption_seed) {
  const auto ratio_model = fit_ratio(ratio, behavior, target, corruption_seed);
  const auto weights = checked_weights_for_fit(ratios_on(ratio_model, behavior));
  const auto model = fit_regressor(regressor, behavior, std::span<const double>(weights));
  ValueEstimate est;
  est.estimator_id = "w-soft";
  for (const auto& tr : target.items()) est.per_trajectory_predictions.push_back(predict(model, tr));
  est.value = mean_of(est.per_trajectory_predictions);
  add_ratio_diagnostics(est, ratio_model, weights);
  return est;
}

double dr_fold_value(std::span<const double> ratios, std::span<const double> returns,
                     std::span<const double> behavior_predictions,
                     std::span<const double> baseline_values) {
  if (ratios.size() != returns.size() || returns.size() != behavior_predictions.size() ||
      returns.empty() || baseline_values.empty()) {
    throw InvalidArgument("DR fold inputs have mismatched or empty lengths");
  }
  double correction = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    correction += ratios[i] * (returns[i] - behavior_predictions[i]);
  }
  return correction / static_cast<double>(returns.size()) + mean_of(baseline_values);
}

ValueEstimate estimate_dr(const BehaviorDataset& behavior, const TargetDataset& target,
                          const FoldPlan& plan, const NuisanceFitter& fit, BaselineTerm baseline) {
  if (plan.behavior_fold_of.size() != behavior.size() ||
      plan.target_fold_of.size() != target.size()) {
    throw InvalidArgument("fold plan does not match the dataset sizes");
  }
  ValueEstimate est;
  est.estimator_id = "dr";
  for (int k = 0; k < plan.k; ++k) {
    const auto b_in = plan.behavior_in(k);
    const auto e_in = plan.target_in(k);
    if (b_in.empty() || e_in.empty()) {
      throw InsufficientData("fold " + std::to_string(k) + " holds no behavior or no target items");
    }
    const auto b_out = plan.behavior_not_in(k);
    const auto e_out = plan.target_not_in(k);
    if (b_out.empty() || e_out.empty()) {
      throw InsufficientData("fold " + std::to_string(k) + " leaves no data to train nuisances");
    }
    const auto nuisances = in_fold(k, [&] {
      return fit(behavior.subset(b_out), target.subset(e_out), k);
    });

    std::vector<double> h(b_in.size());
    std::vector<double> g(b_in.size());
    std::vector<double> f(b_in.size());
    for (std::size_t j = 0; j < b_in.size(); ++j) {
      const auto& item = behavior[b_in[j]];
      h[j] = nuisances.h(item.prefix);
      g[j] = item.full_return;
      f[j] = nuisances.f(item.prefix);
    }
    std::vector<double> base;
    if (baseline == BaselineTerm::kTarget) {
      for (const std::size_t i : e_in) base.push_back(nuisances.f(target[i]));
    } else {
      for (std::size_t j = 0; j < b_in.size(); ++j) base.push_back(h[j] * f[j]);
    }
    est.per_fold_values.push_back(dr_fold_value(h, g, f, base));
    est.diagnostics["mean_weight_fold" + std::to_string(k)] = mean_of(h);
    est.diagnostics["behavior_fold_size" + std::to_string(k)] = static_cast<double>(b_in.size());
    est.diagnostics["target_fold_size" + std::to_string(k)] = static_cast<double>(e_in.size());
  }
  est.value = mean_of(est.per_fold_values);
  return est;
}

ValueEstimate estimate_dr(const BehaviorDataset& behavior, const TargetDataset& target,
                          const RegressorConfig& regressor, const RatioConfig& ratio,
                          const DrOptions& options) {
  const auto plan = make_fold_plan(behavior.size(), target.size(), options.k, options.seed);
  std::vector<std::size_t> uncovered(static_cast<std::size_t>(options.k), 0);
  const NuisanceFitter fit = [&](const BehaviorDataset& b, const TargetDataset& e, int fold) {
    auto ratio_model = std::make_shared<const DensityRatioModel>(
        fit_ratio(ratio, b, e, derive_seed({options.seed, static_cast<std::uint64_t>(fold)})));
    uncovered[static_cast<std::size_t>(fold)] = ratio_model->uncovered_target_count();
    std::shared_ptr<const Regressor> model;
    if (options.weighted) {
      const auto w = checked_weights_for_fit(ratios_on(*ratio_model, b));
      model = std::make_shared<const Regressor>(fit_regressor(regressor, b, std::span<const double>(w)));
    } else {
      model = std::make_shared<const Regressor>(fit_regressor(regressor, b));
    }
    return FoldNuisances{[model](const Trajectory& tr) { return predict(*model, tr); },
                         [ratio_model](const Trajectory& tr) { return ratio_model->ratio(tr); }};
  };
  auto est = estimate_dr(behavior, target, plan, fit, options.baseline);
  est.estimator_id = options.weighted ? "dr-w-soft" : "dr-soft";
  double total_uncovered = 0.0;
  for (const auto u : uncovered) total_uncovered += static_cast<double>(u);
  est.diagnostics["uncovered_target"] = total_uncovered;
  return est;
}

ValueEstimate estimate_mc(const BehaviorDataset& target_full) {
  ValueEstimate est;
  est.estimator_id = "mc";
  est.per_trajectory_predictions = target_full.returns();
  est.value = mean_of(est.per_trajectory_predictions);
  return est;
}

double lope_value(std::span<const double> ratios, std::span<const double> returns,
                  std::span<const double> taken_predictions,
                  std::span<const double> expected_predictions) {
  if (ratios.size() != returns.size() || returns.size() != taken_predictions.size() ||
      returns.size() != expected_predictions.size() || returns.empty()) {
    throw InvalidArgument("LOPE inputs have mismatched or empty lengths");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    total += ratios[i] * (returns[i] - taken_predictions[i]) + expected_predictions[i];
  }
  return total / static_cast<double>(returns.size());
}

ValueEstimate estimate_lope(const BehaviorDataset& behavior, const TargetDataset& target,
                            const LopeConfig& lope, const RatioConfig& ratio,
                            std::uint64_t corruption_seed) {
  if (!lope.bucket_of || !lope.target_action_probs || lope.action_buckets < 1) {
    throw InvalidArgument("LOPE needs action buckets and the target policy's action probabilities");
  }
  const int p = lope.state_features.dim;
  const int q = p + lope.action_buckets;
  const auto n = static_cast<Eigen::Index>(behavior.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd targets(n);
  std::vector<double> phi(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& item = behavior[static_cast<std::size_t>(i)];
    if (!item.prefix.next_action()) {
      throw InvalidArgument("LOPE needs the action taken after each behavior prefix (item " +
                            std::to_string(i) + " has none)");
    }
    lope.state_features.apply_into(item.prefix, phi);
    for (int j = 0; j < p; ++j) design(i, j) = phi[static_cast<std::size_t>(j)];
    const int bucket = lope.bucket_of(*item.prefix.next_action());
    if (bucket < 0 || bucket >= lope.action_buckets) throw InvalidArgument("action bucket out of range");
    design(i, p + bucket) = 1.0;
    targets(i) = item.full_return;
  }
  const auto sol = solve_weighted_least_squares(design, targets, std::nullopt, lope.options,
                                                lope.state_features.name + "+action");
  const auto f_of = [&](std::span<const double> features, int bucket) {
    double v = sol.intercept;
    for (int j = 0; j < p; ++j) v += sol.coefficients[static_cast<std::size_t>(j)] * features[static_cast<std::size_t>(j)];
    return v + sol.coefficients[static_cast<std::size_t>(p + bucket)];
  };

  const auto ratio_model = fit_ratio(ratio, behavior, target, corruption_seed);
  const auto h = ratios_on(ratio_model, behavior);
  std::vector<double> g(behavior.size());
  std::vector<double> taken(behavior.size());
  std::vector<double> expected(behavior.size());
  for (std::size_t i = 0; i < behavior.size(); ++i) {
    const auto& item = behavior[i];
    lope.state_features.apply_into(item.prefix, phi);
    g[i] = item.full_return;
    taken[i] = f_of(phi, lope.bucket_of(*item.prefix.next_action()));
    const auto probs = lope.target_action_probs(item.prefix);
    double e = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      if (probs[a] > 0.0) e += probs[a] * f_of(phi, lope.bucket_of(static_cast<int>(a)));
    }
    expected[i] = e;
  }
  ValueEstimate est;
  est.estimator_id = "lope";
  est.value = lope_value(h, g, taken, expected);
  add_ratio_diagnostics(est, ratio_model, h);
  return est;
}

ModelBasedConfig model_based_config(const MdpSpec& spec, const Policy& target_policy) {
  ModelBasedConfig c;
  c.n_states = spec.n_states;
  c.n_actions = spec.target_actions;
  c.reward = spec.reward;
  c.terminal = spec.terminal;
  c.target_policy = target_policy;
  c.full_h = spec.horizon;
  c.discount = spec.discount;
  return c;
}

namespace {

int discrete_state(double value, int n_states) {
  if (value != std::floor(value) || value < 0 || value >= n_states) {
    throw UnsupportedDomain("model-based baseline needs discrete state ids in [0, " +
                            std::to_string(n_states) + "), got " + std::to_string(value));
  }
  return static_cast<int>(value);
}

}  // namespace

MdpSpec estimate_transition_model(const TargetDataset& target, const ModelBasedConfig& config) {
  if (config.n_states < 1 || config.n_actions < 1 ||
      config.reward.size() != static_cast<std::size_t>(config.n_states) ||
      config.terminal.size() != static_cast<std::size_t>(config.n_states)) {
    throw InvalidArgument("model-based config tables do not match the state count");
  }
  const auto ns = static_cast<std::size_t>(config.n_states);
  const auto na = static_cast<std::size_t>(config.n_actions);
  std::vector<std::map<int, double>> counts(ns * na);
  std::vector<double> initial(ns, 0.0);
  for (const auto& tr : target.items()) {
    if (tr.state_dim() != 1) throw UnsupportedDomain("model-based baseline needs 1-dimensional discrete states");
    if (!tr.has_actions() && tr.horizon() > 0) {
      throw InvalidArgument("model-based baseline needs actions on target prefixes");
    }
    const int s0 = discrete_state(tr.scalar_state(0), config.n_states);
    initial[static_cast<std::size_t>(s0)] += 1.0;
    for (int t = 0; t < tr.horizon(); ++t) {
      const int s = discrete_state(tr.scalar_state(t), config.n_states);
      const int nx = discrete_state(tr.scalar_state(t + 1), config.n_states);
      const int a = tr.actions()[static_cast<std::size_t>(t)];
      if (a < 0 || a >= config.n_actions) throw InvalidArgument("target action id out of range");
      if (config.terminal[static_cast<std::size_t>(s)]) continue;
      counts[static_cast<std::size_t>(s) * na + static_cast<std::size_t>(a)][nx] += 1.0;
    }
  }
  MdpSpec model;
  model.n_states = config.n_states;
  model.behavior_actions = config.n_actions;
  model.target_actions = config.n_actions;
  model.reward = config.reward;
  model.terminal = config.terminal;
  model.horizon = config.full_h;
  model.discount = config.discount;
  for (double& p : initial) p /= static_cast<double>(target.size());
  model.initial = std::move(initial);
  model.transition.resize(ns * na);
  std::vector<int> all_states(ns);
  std::iota(all_states.begin(), all_states.end(), 0);
  const std::vector<double> uniform(ns, 1.0 / static_cast<double>(ns));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      auto& row = model.transition[s * na + a];
      if (config.terminal[s]) {
        row.next = {static_cast<int>(s)};
        row.prob = {1.0};
        continue;
      }
      const auto& c = counts[s * na + a];
      if (c.empty()) {
        row.next = all_states;
        row.prob = uniform;
        continue;
      }
      double total = 0.0;
      for (const auto& [nx, cnt] : c) total += cnt;
      for (const auto& [nx, cnt] : c) {
        row.next.push_back(nx);
        row.prob.push_back(cnt / total);
      }
    }
  }
  return model;
}

ValueEstimate estimate_model_based(const TargetDataset& target, const ModelBasedConfig& config) {
  const auto model = estimate_transition_model(target, config);
  if (config.target_policy.n_states != config.n_states ||
      config.target_policy.n_actions > config.n_actions) {
    throw InvalidArgument("target policy does not fit the model-based config");
  }
  ValueEstimate est;
  est.estimator_id = "model-based";
  est.value = exact_policy_value(model, config.target_policy, model.initial);
  std::size_t seen = 0;
  for (std::size_t s = 0; s < static_cast<std::size_t>(config.n_states); ++s) {
    if (config.terminal[s]) continue;
    for (std::size_t a = 0; a < static_cast<std::size_t>(config.n_actions); ++a) {
      if (model.transition[s * static_cast<std::size_t>(config.n_actions) + a].next.size() !=
          static_cast<std::size_t>(config.n_states)) {
        ++seen;
      }
    }
  }
  est.diagnostics["seen_state_actions"] = static_cast<double>(seen);
  return est;
}

ValueEstimate estimate_extrapolation(const TargetDataset& target, ExtrapolationMode mode,
                                     int full_h, double discount) {
  if (full_h < 1) throw InvalidArgument("full horizon must be >= 1");
  ValueEstimate est;
  est.estimator_id = mode == ExtrapolationMode::kAverage ? "extrap-avg" : "extrap-last";
  std::size_t known = 0;
  for (const auto& tr : target.items()) {
    if (!tr.has_rewards() && tr.horizon() > 0) {
      throw InvalidArgument("reward extrapolation needs per-step rewards on target prefixes");
    }
    double prediction = 0.0;
    if (tr.terminated()) {
      prediction = discounted_return(tr.rewards(), discount);
      ++known;
    } else if (tr.horizon() > 0) {
      const auto r = tr.rewards();
      const double per_step = mode == ExtrapolationMode::kAverage ? mean_of(r) : r.back();
      prediction = per_step * static_cast<double>(full_h);
    }
    est.per_trajectory_predictions.push_back(prediction);
  }
  est.value = mean_of(est.per_trajectory_predictions);
  est.diagnostics["outcome_known"] =
      static_cast<double>(known) / static_cast<double>(target.size());
  return est;
}

}  // namespace shortlong
