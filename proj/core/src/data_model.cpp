#include "shortlong/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"

namespace shortlong {

Trajectory::Trajectory(int state_dim, std::vector<double> states, std::vector<double> rewards,
                       std::vector<int> actions, std::optional<int> next_action,
                       std::optional<int> absorbed_at)
    : state_dim_(state_dim),
      states_(std::move(states)),
      rewards_(std::move(rewards)),
      actions_(std::move(actions)),
      next_action_(next_action),
      absorbed_at_(absorbed_at) {
  if (state_dim_ < 1) throw InvalidArgument("trajectory state_dim must be >= 1");
  if (states_.empty() || states_.size() % static_cast<std::size_t>(state_dim_) != 0) {
    throw InvalidArgument("trajectory states must hold a whole number of states (at least one)");
  }
  horizon_ = static_cast<int>(states_.size() / static_cast<std::size_t>(state_dim_)) - 1;
  if (!rewards_.empty() && static_cast<int>(rewards_.size()) != horizon_) {
    throw InvalidArgument("trajectory has " + std::to_string(rewards_.size()) +
                          " rewards for horizon " + std::to_string(horizon_));
  }
  if (!actions_.empty() && static_cast<int>(actions_.size()) != horizon_) {
    throw InvalidArgument("trajectory has " + std::to_string(actions_.size()) +
                          " actions for horizon " + std::to_string(horizon_));
  }
  if (absorbed_at_ && (*absorbed_at_ < 0 || *absorbed_at_ > horizon_)) {
    throw InvalidArgument("absorption index outside the prefix");
  }
}

std::span<const double> Trajectory::state(int t) const {
  if (t < 0 || t > horizon_) {
    throw InvalidArgument("state index " + std::to_string(t) + " outside prefix of horizon " +
                          std::to_string(horizon_));
  }
  return std::span<const double>(states_).subspan(static_cast<std::size_t>(t * state_dim_),
                                                  static_cast<std::size_t>(state_dim_));
}

BehaviorDataset::BehaviorDataset(std::vector<LabeledTrajectory> items) : items_(std::move(items)) {
  if (items_.empty()) throw InsufficientData("behavior dataset must hold at least one trajectory");
  for (const auto& item : items_) {
    if (!std::isfinite(item.full_return)) {
      throw InvalidArgument("behavior trajectory has a non-finite return");
    }
  }
}

std::vector<double> BehaviorDataset::returns() const {
  std::vector<double> out;
  out.reserve(items_.size());
  for (const auto& item : items_) out.push_back(item.full_return);
  return out;
}

BehaviorDataset BehaviorDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<LabeledTrajectory> picked;
  picked.reserve(indices.size());
  for (const std::size_t i : indices) picked.push_back(items_.at(i));
  return BehaviorDataset(std::move(picked));
}

TargetDataset::TargetDataset(std::vector<Trajectory> items) : items_(std::move(items)) {
  if (items_.empty()) throw InsufficientData("target dataset must hold at least one trajectory");
}

TargetDataset TargetDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Trajectory> picked;
  picked.reserve(indices.size());
  for (const std::size_t i : indices) picked.push_back(items_.at(i));
  return TargetDataset(std::move(picked));
}

namespace {

std::vector<std::size_t> select(const std::vector<int>& fold_of, int fold, bool inside) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if ((fold_of[i] == fold) == inside) out.push_back(i);
  }
  return out;
}

std::vector<int> assign_folds(std::size_t count, int k, Rng rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = count; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<int> fold_of(count);
  for (std::size_t pos = 0; pos < count; ++pos) {
    fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return fold_of;
}

}  // namespace

std::vector<std::size_t> FoldPlan::behavior_in(int fold) const {
  return select(behavior_fold_of, fold, true);
}
std::vector<std::size_t> FoldPlan::behavior_not_in(int fold) const {
  return select(behavior_fold_of, fold, false);
}
std::vector<std::size_t> FoldPlan::target_in(int fold) const {
  return select(target_fold_of, fold, true);
}
std::vector<std::size_t> FoldPlan::target_not_in(int fold) const {
  return select(target_fold_of, fold, false);
}

void HorizonConfig::validate() const {
  if (short_h < 1) throw InvalidArgument("short horizon must be >= 1");
  if (full_h < short_h) throw InvalidArgument("full horizon must be >= short horizon");
  if (!(discount > 0.0 && discount <= 1.0)) throw InvalidArgument("discount must lie in (0, 1]");
}

FoldPlan make_fold_plan(std::size_t n, std::size_t m, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("cross-fitting needs k >= 2 folds, got " + std::to_string(k));
  const auto kk = static_cast<std::size_t>(k);
  if (n < kk || m < kk) {
    throw InsufficientData("cannot split datasets of sizes " + std::to_string(n) + " and " +
                           std::to_string(m) + " into " + std::to_string(k) + " folds");
  }
  FoldPlan plan;
  plan.k = k;
  plan.behavior_fold_of = assign_folds(n, k, make_stream(seed, "folds/behavior"));
  plan.target_fold_of = assign_folds(m, k, make_stream(seed, "folds/target"));
  return plan;
}

Trajectory truncate(const Trajectory& trajectory, int h) {
  if (h < 0 || h > trajectory.horizon()) {
    throw InvalidArgument("cannot truncate a horizon-" + std::to_string(trajectory.horizon()) +
                          " trajectory to h=" + std::to_string(h));
  }
  const auto dim = static_cast<std::size_t>(trajectory.state_dim());
  const auto states = trajectory.states();
  std::vector<double> kept_states(states.begin(),
                                  states.begin() + static_cast<std::ptrdiff_t>((h + 1) * dim));
  std::vector<double> kept_rewards;
  if (trajectory.has_rewards()) {
    kept_rewards.assign(trajectory.rewards().begin(), trajectory.rewards().begin() + h);
  }
  std::vector<int> kept_actions;
  std::optional<int> next = trajectory.next_action();
  if (trajectory.has_actions()) {
    kept_actions.assign(trajectory.actions().begin(), trajectory.actions().begin() + h);
    if (h < trajectory.horizon()) next = trajectory.actions()[static_cast<std::size_t>(h)];
  }
  std::optional<int> absorbed = trajectory.absorbed_at();
  if (absorbed && *absorbed > h) absorbed.reset();
  return Trajectory(trajectory.state_dim(), std::move(kept_states), std::move(kept_rewards),
                    std::move(kept_actions), next, absorbed);
}

LabeledTrajectory truncate(const LabeledTrajectory& labeled, int h) {
  return LabeledTrajectory{truncate(labeled.prefix, h), labeled.full_return};
}

double discounted_return(std::span<const double> rewards, double discount) {
  double total = 0.0;
  double weight = 1.0;
  for (const double r : rewards) {
    total += weight * r;
    weight *= discount;
  }
  return total;
}

}  // namespace shortlong
