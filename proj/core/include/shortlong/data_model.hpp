#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace shortlong {

/// A state-reward prefix tau_{0:h}.
///
/// States are stored as one flat real vector of `(h + 1) * state_dim` values.
/// Discrete MDP states are encoded as their integer id in a 1-dimensional
/// state. Per-step rewards are either absent (the toy domain, which has no
/// intermediate rewards) or exactly `h` values, `r_t` being the reward earned
/// on the transition `s_t -> s_{t+1}`. Actions are optional and, when present,
/// also number `h`; `next_action` is the action taken at step `h`, the one
/// right after the prefix.
///
/// Trajectories that reach an absorbing state before `h` are padded with that
/// state and zero rewards, so every prefix in a dataset has the same shape.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int state_dim, std::vector<double> states, std::vector<double> rewards,
             std::vector<int> actions = {}, std::optional<int> next_action = std::nullopt,
             std::optional<int> absorbed_at = std::nullopt);

  int horizon() const noexcept { return horizon_; }
  int state_dim() const noexcept { return state_dim_; }
  int state_count() const noexcept { return horizon_ + 1; }

  std::span<const double> state(int t) const;
  /// First component of state t; the whole state for 1-dimensional domains.
  double scalar_state(int t) const { return state(t)[0]; }
  std::span<const double> states() const noexcept { return states_; }
  std::span<const double> rewards() const noexcept { return rewards_; }
  std::span<const int> actions() const noexcept { return actions_; }
  std::optional<int> next_action() const noexcept { return next_action_; }
  bool has_rewards() const noexcept { return !rewards_.empty(); }
  bool has_actions() const noexcept { return !actions_.empty(); }
  /// Index of the first absorbing state within the prefix, if one was reached.
  std::optional<int> absorbed_at() const noexcept { return absorbed_at_; }
  bool terminated() const noexcept { return absorbed_at_.has_value(); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  int state_dim_ = 1;
  int horizon_ = 0;
  std::vector<double> states_{0.0};
  std::vector<double> rewards_;
  std::vector<int> actions_;
  std::optional<int> next_action_;
  std::optional<int> absorbed_at_;
};

struct LabeledTrajectory {
  Trajectory prefix;
  /// Return over the full horizon H, discounted where the domain discounts.
  double full_return = 0.0;

  friend bool operator==(const LabeledTrajectory&, const LabeledTrajectory&) = default;
};

/// D_b: full-horizon historical trajectories collected under the behavior policy.
class BehaviorDataset {
 public:
  explicit BehaviorDataset(std::vector<LabeledTrajectory> items);

  std::size_t size() const noexcept { return items_.size(); }
  const LabeledTrajectory& operator[](std::size_t i) const { return items_[i]; }
  std::span<const LabeledTrajectory> items() const noexcept { return items_; }
  std::vector<double> returns() const;

  /// Items at `indices`, in that order.
  BehaviorDataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<LabeledTrajectory> items_;
};

/// D_e: short-horizon on-policy prefixes collected under the target policy.
class TargetDataset {
 public:
  explicit TargetDataset(std::vector<Trajectory> items);

  std::size_t size() const noexcept { return items_.size(); }
  const Trajectory& operator[](std::size_t i) const { return items_[i]; }
  std::span<const Trajectory> items() const noexcept { return items_; }

  TargetDataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Trajectory> items_;
};

/// Assignment of every behavior and target item to one of k cross-fitting folds.
struct FoldPlan {
  int k = 2;
  std::vector<int> behavior_fold_of;
  std::vector<int> target_fold_of;

  std::vector<std::size_t> behavior_in(int fold) const;
  std::vector<std::size_t> behavior_not_in(int fold) const;
  std::vector<std::size_t> target_in(int fold) const;
  std::vector<std::size_t> target_not_in(int fold) const;
};

struct HorizonConfig {
  int short_h = 1;
  int full_h = 1;
  double discount = 1.0;

  void validate() const;
};

/// Seeded uniform shuffle followed by round-robin assignment, done
/// independently for the behavior (n) and target (m) index sets.
FoldPlan make_fold_plan(std::size_t n, std::size_t m, int k, std::uint64_t seed);

/// Cuts a labeled trajectory down to its first `h` steps; the return is kept.
LabeledTrajectory truncate(const LabeledTrajectory& labeled, int h);
Trajectory truncate(const Trajectory& trajectory, int h);

/// Sum_t discount^t * r_t.
double discounted_return(std::span<const double> rewards, double discount);

}  // namespace shortlong
