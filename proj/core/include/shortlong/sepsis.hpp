#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "shortlong/data_model.hpp"
#include "shortlong/regression.hpp"

namespace shortlong {

/// Patient state of the sepsis-like simulator.
///
/// Vitals: heart rate and blood pressure in {low, normal, high}, oxygen in
/// {low, normal}, glucose in {very low, low, normal, high, very high}. The
/// three treatment bits record which treatments are currently active.
/// Ids enumerate diabetic-major, then heart rate, blood pressure, oxygen,
/// glucose, antibiotics, vasopressors, ventilation (last varies fastest).
struct SepsisState {
  bool diabetic = false;
  int heart_rate = 1;
  int blood_pressure = 1;
  int oxygen = 1;
  int glucose = 2;
  bool antibiotics = false;
  bool vasopressors = false;
  bool ventilation = false;

  static constexpr int kStates = 1440;

  int encode() const;
  static SepsisState decode(int id);

  int abnormal_vitals() const noexcept;
  bool any_treatment() const noexcept { return antibiotics || vasopressors || ventilation; }
  bool dead() const noexcept { return abnormal_vitals() >= 3; }
  bool discharged() const noexcept { return abnormal_vitals() == 0 && !any_treatment(); }

  friend bool operator==(const SepsisState&, const SepsisState&) = default;
};

/// Action ids: bit 0 antibiotics, bit 1 ventilation, bit 2 vasopressors.
/// The behavior action set is {0..3}; the target set {0..7} adds vasopressors.
struct SepsisAction {
  bool antibiotics = false;
  bool ventilation = false;
  bool vasopressors = false;

  static SepsisAction decode(int id);
  int encode() const noexcept;
};

struct SparseRow {
  std::vector<int> next;
  std::vector<double> prob;
};

/// Finite discrete MDP. `reward[s']` is paid on entering s' from a
/// non-terminal state; terminal states self-loop with no further reward.
struct MdpSpec {
  int n_states = 0;
  int behavior_actions = 0;
  int target_actions = 0;
  /// Row (s, a) at index s * target_actions + a.
  std::vector<SparseRow> transition;
  std::vector<double> reward;
  std::vector<char> terminal;
  std::vector<double> initial;
  int horizon = 20;
  double discount = 0.99;

  int n_actions() const noexcept { return target_actions; }
  const SparseRow& row(int s, int a) const {
    return transition[static_cast<std::size_t>(s) * static_cast<std::size_t>(target_actions) +
                      static_cast<std::size_t>(a)];
  }
  /// Throws InvalidArgument when rows are not distributions, terminal states
  /// do not self-loop, or sizes disagree.
  void validate() const;
};

/// Kernel parameters of the sepsis-like simulator; probabilities per step.
struct SepsisDynamics {
  double antibiotic_recovery = 0.7;  // heart rate back to normal
  double vasopressor_recovery = 0.8;  // low blood pressure back to normal
  double ventilation_recovery = 0.8;  // low oxygen back to normal
  double vasopressor_overshoot = 0.05;  // normal blood pressure pushed high
  double spontaneous_recovery = 0.03;  // any untreated abnormal vital
  double heart_rate_drift = 0.03;
  double blood_pressure_drift = 0.03;
  double oxygen_drift = 0.02;
  double glucose_drift = 0.02;
  double glucose_drift_diabetic = 0.1;
  /// Each probability above is scaled by 1 + U(-jitter, jitter) per seed.
  double jitter = 0.1;
  int horizon = 20;
  double discount = 0.99;
};

MdpSpec build_sepsis_spec(const SepsisDynamics& dynamics, std::uint64_t seed);
MdpSpec build_default_spec(std::uint64_t seed);

/// Stochastic policy over the first `n_actions` action ids of a spec.
struct Policy {
  int n_states = 0;
  int n_actions = 0;
  double epsilon = 0.0;
  std::vector<double> probs;  // n_states x n_actions, row major

  std::span<const double> row(int s) const {
    return std::span<const double>(probs).subspan(
        static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions),
        static_cast<std::size_t>(n_actions));
  }
};

Policy greedy_policy(std::span<const int> action_of, int n_actions);
/// (1 - epsilon) * policy + epsilon * uniform.
Policy soften(const Policy& policy, double epsilon);

/// Finite-horizon optimal values V_t(s), t = 0..H, by backward induction over
/// actions {0..policy_actions-1}; greedy[t][s] for t < H.
struct FiniteHorizonSolution {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<int>> greedy;
};
FiniteHorizonSolution value_iteration(const MdpSpec& spec, int policy_actions);

/// Infinite-horizon discounted solution.
struct DiscountedSolution {
  std::vector<double> values;
  std::vector<int> greedy;
  int iterations = 0;
};
DiscountedSolution discounted_value_iteration(const MdpSpec& spec, int policy_actions,
                                              double tolerance = 1e-13,
                                              int max_iterations = 100000);
/// Policy iteration on the discounted problem with exact (sparse LU) policy
/// evaluation; ties go to the lowest action id.
DiscountedSolution policy_iteration_solution(const MdpSpec& spec, int action_count);
Policy policy_iteration(const MdpSpec& spec, int action_count);

/// Finite-horizon discounted value of a stochastic policy at t = 0, per state.
std::vector<double> evaluate_policy(const MdpSpec& spec, const Policy& policy);
double exact_policy_value(const MdpSpec& spec, const Policy& policy,
                          std::span<const double> initial_distribution);
double exact_policy_value(const MdpSpec& spec, const Policy& policy);

/// Full-horizon rollouts. Trajectories that reach a terminal state keep
/// that state for the remaining steps with zero reward; actions keep being
/// drawn from the policy so every trajectory has H actions.
std::vector<LabeledTrajectory> rollout_full(const MdpSpec& spec, const Policy& policy,
                                            std::size_t n, std::uint64_t seed);

BehaviorDataset rollout_behavior(const MdpSpec& spec, const Policy& policy, std::size_t n,
                                 int h_record, std::uint64_t seed);

struct TargetRollout {
  TargetDataset data;
  /// Full-horizon discounted returns of the same rollouts; evaluation only.
  std::vector<double> full_returns;
};
TargetRollout rollout_target(const MdpSpec& spec, const Policy& policy, std::size_t n,
                             int h_record, std::uint64_t seed);

/// `# states=.. behavior_actions=.. target_actions=.. horizon=.. discount=..`,
/// then `state,action,next_state,prob`, `state,reward,terminal` and
/// `state,initial` sections.
void export_spec(std::ostream& out, const MdpSpec& spec);
MdpSpec import_spec(std::istream& in);

/// Last-state features of a sepsis prefix (the vasopressor bit is left out:
/// behavior data never sets it).
FeatureMap sepsis_features(double discount = 0.99);
/// Last state with the vasopressor bit cleared, plus the absorption step.
TrajectoryKey sepsis_key(const Trajectory& prefix);

}  // namespace shortlong
