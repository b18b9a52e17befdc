#include "shortlong/sepsis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"

namespace shortlong {

namespace {

constexpr int kLow = 0;
constexpr int kNormal3 = 1;
constexpr int kHigh = 2;
constexpr int kGlucoseNormal = 2;
constexpr double kTieTolerance = 1e-10;

}  // namespace

int SepsisState::encode() const {
  if (heart_rate < 0 || heart_rate > 2 || blood_pressure < 0 || blood_pressure > 2 || oxygen < 0 ||
      oxygen > 1 || glucose < 0 || glucose > 4) {
    throw InvalidArgument("sepsis state has an out-of-range vital level");
  }
  int id = diabetic ? 1 : 0;
  id = id * 3 + heart_rate;
  id = id * 3 + blood_pressure;
  id = id * 2 + oxygen;
  id = id * 5 + glucose;
  id = id * 2 + (antibiotics ? 1 : 0);
  id = id * 2 + (vasopressors ? 1 : 0);
  id = id * 2 + (ventilation ? 1 : 0);
  return id;
}

SepsisState SepsisState::decode(int id) {
  if (id < 0 || id >= kStates) {
    throw InvalidArgument("sepsis state id " + std::to_string(id) + " out of range");
  }
  SepsisState s;
  s.ventilation = id % 2 == 1;
  id /= 2;
  s.vasopressors = id % 2 == 1;
  id /= 2;
  s.antibiotics = id % 2 == 1;
  id /= 2;
  s.glucose = id % 5;
  id /= 5;
  s.oxygen = id % 2;
  id /= 2;
  s.blood_pressure = id % 3;
  id /= 3;
  s.heart_rate = id % 3;
  id /= 3;
  s.diabetic = id == 1;
  return s;
}

int SepsisState::abnormal_vitals() const noexcept {
  return (heart_rate != kNormal3 ? 1 : 0) + (blood_pressure != kNormal3 ? 1 : 0) +
         (oxygen != 1 ? 1 : 0) + (glucose != kGlucoseNormal ? 1 : 0);
}

SepsisAction SepsisAction::decode(int id) {
  if (id < 0 || id > 7) throw InvalidArgument("sepsis action id " + std::to_string(id) + " out of range");
  return SepsisAction{(id & 1) != 0, (id & 2) != 0, (id & 4) != 0};
}

int SepsisAction::encode() const noexcept {
  return (antibiotics ? 1 : 0) + (ventilation ? 2 : 0) + (vasopressors ? 4 : 0);
}

void MdpSpec::validate() const {
  if (n_states < 1 || target_actions < 1 || behavior_actions < 1 ||
      behavior_actions > target_actions) {
    throw InvalidArgument("MDP needs states and a behavior action set inside the target set");
  }
  const auto ns = static_cast<std::size_t>(n_states);
  if (transition.size() != ns * static_cast<std::size_t>(target_actions) || reward.size() != ns ||
      terminal.size() != ns || initial.size() != ns) {
    throw InvalidArgument("MDP tables do not match the state and action counts");
  }
  if (horizon < 1 || !(discount > 0.0 && discount <= 1.0)) {
    throw InvalidArgument("MDP horizon must be >= 1 and discount in (0, 1]");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < target_actions; ++a) {
      const auto& r = row(s, a);
      if (r.next.size() != r.prob.size() || r.next.empty()) {
        throw InvalidArgument("empty or malformed transition row");
      }
      double total = 0.0;
      for (std::size_t j = 0; j < r.next.size(); ++j) {
        if (r.next[j] < 0 || r.next[j] >= n_states || !(r.prob[j] >= 0.0)) {
          throw InvalidArgument("transition row holds an invalid entry");
        }
        total += r.prob[j];
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidArgument("transition row (" + std::to_string(s) + ", " + std::to_string(a) +
                              ") sums to " + std::to_string(total));
      }
      if (terminal[static_cast<std::size_t>(s)] && (r.next.size() != 1 || r.next[0] != s)) {
        throw InvalidArgument("terminal state " + std::to_string(s) + " does not self-loop");
      }
    }
  }
  double mass = 0.0;
  for (const double p : initial) {
    if (!(p >= 0.0)) throw InvalidArgument("negative initial probability");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw InvalidArgument("initial distribution does not sum to 1");
}

namespace {

// Next-level distributions of each vital, indexed by level.
using Dist3 = std::array<double, 3>;
using Dist2 = std::array<double, 2>;
using Dist5 = std::array<double, 5>;

struct Rates {
  double abx, vaso, vent, overshoot, recover, hr_drift, bp_drift, o2_drift, glu_drift,
      glu_drift_diab;
};

Dist3 three_level(int level, bool treated, double treat_recovery, double recover, double drift) {
  Dist3 d{0.0, 0.0, 0.0};
  if (level == kNormal3) {
    d[kLow] = drift / 2;
    d[kHigh] = drift / 2;
    d[kNormal3] = 1.0 - drift;
    return d;
  }
  const double back = treated ? treat_recovery : recover;
  d[kNormal3] = back;
  d[static_cast<std::size_t>(level)] = 1.0 - back;
  return d;
}

Dist3 blood_pressure_next(int level, bool vaso, const Rates& r) {
  if (!vaso) return three_level(level, false, 0.0, r.recover, r.bp_drift);
  Dist3 d{0.0, 0.0, 0.0};
  if (level == kLow) {
    d[kNormal3] = r.vaso;
    d[kLow] = 1.0 - r.vaso;
  } else if (level == kNormal3) {
    d[kHigh] = r.overshoot;
    d[kNormal3] = 1.0 - r.overshoot;
  } else {
    d[kHigh] = 1.0 - r.recover;
    d[kNormal3] = r.recover;
  }
  return d;
}

Dist2 oxygen_next(int level, bool vent, const Rates& r) {
  if (level == 1) return Dist2{vent ? 0.0 : r.o2_drift, vent ? 1.0 : 1.0 - r.o2_drift};
  const double back = vent ? r.vent : r.recover;
  return Dist2{1.0 - back, back};
}

Dist5 glucose_next(int level, bool diabetic, const Rates& r) {
  Dist5 d{0.0, 0.0, 0.0, 0.0, 0.0};
  const auto idx = [](int l) { return static_cast<std::size_t>(std::clamp(l, 0, 4)); };
  const double drift = diabetic ? r.glu_drift_diab : r.glu_drift;
  if (level == kGlucoseNormal) {
    d[idx(level - 1)] += drift / 2;
    d[idx(level + 1)] += drift / 2;
    d[idx(level)] += 1.0 - drift;
    return d;
  }
  const int toward = level < kGlucoseNormal ? level + 1 : level - 1;
  const int away = level < kGlucoseNormal ? level - 1 : level + 1;
  d[idx(toward)] += r.recover;
  d[idx(away)] += drift / 2;
  d[idx(level)] += 1.0 - r.recover - drift / 2;
  return d;
}

}  // namespace

MdpSpec build_sepsis_spec(const SepsisDynamics& dyn, std::uint64_t seed) {
  Rng rng = make_stream(seed, "sepsis/kernel-jitter");
  std::uniform_real_distribution<double> jitter(-dyn.jitter, dyn.jitter);
  const auto j = [&](double p) { return std::clamp(p * (1.0 + jitter(rng)), 0.0, 1.0); };
  Rates r{};
  r.abx = j(dyn.antibiotic_recovery);
  r.vaso = j(dyn.vasopressor_recovery);
  r.vent = j(dyn.ventilation_recovery);
  r.overshoot = j(dyn.vasopressor_overshoot);
  r.recover = j(dyn.spontaneous_recovery);
  r.hr_drift = j(dyn.heart_rate_drift);
  r.bp_drift = j(dyn.blood_pressure_drift);
  r.o2_drift = j(dyn.oxygen_drift);
  r.glu_drift = j(dyn.glucose_drift);
  r.glu_drift_diab = j(dyn.glucose_drift_diabetic);
  if (r.recover + std::max(r.glu_drift, r.glu_drift_diab) / 2 > 1.0) {
    throw InvalidArgument("glucose recovery and drift probabilities exceed 1");
  }

  MdpSpec spec;
  spec.n_states = SepsisState::kStates;
  spec.behavior_actions = 4;
  spec.target_actions = 8;
  spec.horizon = dyn.horizon;
  spec.discount = dyn.discount;
  const auto ns = static_cast<std::size_t>(spec.n_states);
  spec.reward.assign(ns, 0.0);
  spec.terminal.assign(ns, 0);
  spec.initial.assign(ns, 0.0);
  spec.transition.resize(ns * 8);

  std::size_t live = 0;
  for (int s = 0; s < spec.n_states; ++s) {
    const auto st = SepsisState::decode(s);
    const auto us = static_cast<std::size_t>(s);
    if (st.dead()) {
      spec.reward[us] = -1.0;
      spec.terminal[us] = 1;
    } else if (st.discharged()) {
      spec.reward[us] = 1.0;
      spec.terminal[us] = 1;
    } else {
      ++live;
    }
  }

  for (int s = 0; s < spec.n_states; ++s) {
    const auto st = SepsisState::decode(s);
    const auto us = static_cast<std::size_t>(s);
    for (int a = 0; a < 8; ++a) {
      auto& row = spec.transition[us * 8 + static_cast<std::size_t>(a)];
      if (spec.terminal[us]) {
        row.next = {s};
        row.prob = {1.0};
        continue;
      }
      const auto act = SepsisAction::decode(a);
      const Dist3 hr = three_level(st.heart_rate, act.antibiotics, r.abx, r.recover, r.hr_drift);
      const Dist3 bp = blood_pressure_next(st.blood_pressure, act.vasopressors, r);
      const Dist2 o2 = oxygen_next(st.oxygen, act.ventilation, r);
      const Dist5 glu = glucose_next(st.glucose, st.diabetic, r);
      std::map<int, double> out;
      for (int h = 0; h < 3; ++h) {
        for (int b = 0; b < 3; ++b) {
          for (int o = 0; o < 2; ++o) {
            for (int g = 0; g < 5; ++g) {
              const double p = hr[static_cast<std::size_t>(h)] * bp[static_cast<std::size_t>(b)] *
                               o2[static_cast<std::size_t>(o)] * glu[static_cast<std::size_t>(g)];
              if (p <= 0.0) continue;
              SepsisState nx{st.diabetic, h, b, o, g, act.antibiotics, act.vasopressors,
                             act.ventilation};
              out[nx.encode()] += p;
            }
          }
        }
      }
      for (const auto& [next, p] : out) {
        row.next.push_back(next);
        row.prob.push_back(p);
      }
    }
    if (!spec.terminal[us]) spec.initial[us] = 1.0 / static_cast<double>(live);
  }
  spec.validate();
  return spec;
}

MdpSpec build_default_spec(std::uint64_t seed) { return build_sepsis_spec(SepsisDynamics{}, seed); }

Policy greedy_policy(std::span<const int> action_of, int n_actions) {
  Policy p;
  p.n_states = static_cast<int>(action_of.size());
  p.n_actions = n_actions;
  p.probs.assign(action_of.size() * static_cast<std::size_t>(n_actions), 0.0);
  for (std::size_t s = 0; s < action_of.size(); ++s) {
    if (action_of[s] < 0 || action_of[s] >= n_actions) {
      throw InvalidArgument("greedy action outside the policy's action set");
    }
    p.probs[s * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(action_of[s])] = 1.0;
  }
  return p;
}

Policy soften(const Policy& policy, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
  Policy out = policy;
  out.epsilon = epsilon;
  const double uniform = epsilon / static_cast<double>(policy.n_actions);
  for (double& p : out.probs) p = (1.0 - epsilon) * p + uniform;
  return out;
}

namespace {

void check_actions(const MdpSpec& spec, int actions) {
  if (actions < 1 || actions > spec.target_actions) {
    throw InvalidArgument("action count " + std::to_string(actions) + " outside the spec");
  }
}

double backup(const MdpSpec& spec, int s, int a, const std::vector<double>& next_values) {
  const auto& row = spec.row(s, a);
  double q = 0.0;
  for (std::size_t j = 0; j < row.next.size(); ++j) {
    const auto n = static_cast<std::size_t>(row.next[j]);
    q += row.prob[j] * (spec.reward[n] + spec.discount * next_values[n]);
  }
  return q;
}

// Lowest action id within kTieTolerance of the best backup.
int greedy_action(const MdpSpec& spec, int s, int actions, const std::vector<double>& values,
                  double* best_value) {
  std::vector<double> q(static_cast<std::size_t>(actions));
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < actions; ++a) {
    q[static_cast<std::size_t>(a)] = backup(spec, s, a, values);
    best = std::max(best, q[static_cast<std::size_t>(a)]);
  }
  if (best_value != nullptr) *best_value = best;
  for (int a = 0; a < actions; ++a) {
    if (q[static_cast<std::size_t>(a)] >= best - kTieTolerance) return a;
  }
  return 0;
}

}  // namespace

FiniteHorizonSolution value_iteration(const MdpSpec& spec, int policy_actions) {
  check_actions(spec, policy_actions);
  const auto ns = static_cast<std::size_t>(spec.n_states);
  FiniteHorizonSolution sol;
  sol.values.assign(static_cast<std::size_t>(spec.horizon) + 1, std::vector<double>(ns, 0.0));
  sol.greedy.assign(static_cast<std::size_t>(spec.horizon), std::vector<int>(ns, 0));
  for (int t = spec.horizon - 1; t >= 0; --t) {
    const auto& next = sol.values[static_cast<std::size_t>(t) + 1];
    auto& cur = sol.values[static_cast<std::size_t>(t)];
    for (int s = 0; s < spec.n_states; ++s) {
      if (spec.terminal[static_cast<std::size_t>(s)]) continue;
      double best = 0.0;
      sol.greedy[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] =
          greedy_action(spec, s, policy_actions, next, &best);
      cur[static_cast<std::size_t>(s)] = best;
    }
  }
  return sol;
}

DiscountedSolution discounted_value_iteration(const MdpSpec& spec, int policy_actions,
                                              double tolerance, int max_iterations) {
  check_actions(spec, policy_actions);
  if (!(spec.discount < 1.0)) throw InvalidArgument("discounted solve needs discount < 1");
  const auto ns = static_cast<std::size_t>(spec.n_states);
  DiscountedSolution sol;
  sol.values.assign(ns, 0.0);
  std::vector<double> next(ns, 0.0);
  for (int it = 1; it <= max_iterations; ++it) {
    double change = 0.0;
    for (int s = 0; s < spec.n_states; ++s) {
      const auto us = static_cast<std::size_t>(s);
      if (spec.terminal[us]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < policy_actions; ++a) best = std::max(best, backup(spec, s, a, sol.values));
      next[us] = best;
      change = std::max(change, std::abs(best - sol.values[us]));
    }
    sol.values.swap(next);
    sol.iterations = it;
    if (change <= tolerance) break;
    if (it == max_iterations) {
      throw ConvergenceError("value iteration did not converge (last change " +
                                 std::to_string(change) + ")",
                             change);
    }
  }
  sol.greedy.assign(ns, 0);
  for (int s = 0; s < spec.n_states; ++s) {
    if (!spec.terminal[static_cast<std::size_t>(s)]) {
      sol.greedy[static_cast<std::size_t>(s)] =
          greedy_action(spec, s, policy_actions, sol.values, nullptr);
    }
  }
  return sol;
}

namespace {

std::vector<double> evaluate_deterministic(const MdpSpec& spec, const std::vector<int>& action_of) {
  const int n = spec.n_states;
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    entries.emplace_back(s, s, 1.0);
    if (spec.terminal[static_cast<std::size_t>(s)]) continue;
    const auto& row = spec.row(s, action_of[static_cast<std::size_t>(s)]);
    for (std::size_t j = 0; j < row.next.size(); ++j) {
      const int nx = row.next[j];
      rhs(s) += row.prob[j] * spec.reward[static_cast<std::size_t>(nx)];
      if (!spec.terminal[static_cast<std::size_t>(nx)]) {
        entries.emplace_back(s, nx, -spec.discount * row.prob[j]);
      }
    }
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) throw InvalidArgument("policy evaluation system is singular");
  const Eigen::VectorXd v = lu.solve(rhs);
  return std::vector<double>(v.data(), v.data() + n);
}

}  // namespace

DiscountedSolution policy_iteration_solution(const MdpSpec& spec, int action_count) {
  check_actions(spec, action_count);
  if (!(spec.discount < 1.0)) throw InvalidArgument("policy iteration needs discount < 1");
  const auto ns = static_cast<std::size_t>(spec.n_states);
  DiscountedSolution sol;
  sol.greedy.assign(ns, 0);
  for (int it = 1;; ++it) {
    sol.values = evaluate_deterministic(spec, sol.greedy);
    sol.iterations = it;
    bool stable = true;
    for (int s = 0; s < spec.n_states; ++s) {
      const auto us = static_cast<std::size_t>(s);
      if (spec.terminal[us]) continue;
      const double current = backup(spec, s, sol.greedy[us], sol.values);
      double best = 0.0;
      const int a = greedy_action(spec, s, action_count, sol.values, &best);
      if (best > current + kTieTolerance) {
        sol.greedy[us] = a;
        stable = false;
      }
    }
    if (stable) {
      for (int s = 0; s < spec.n_states; ++s) {
        if (!spec.terminal[static_cast<std::size_t>(s)]) {
          sol.greedy[static_cast<std::size_t>(s)] =
              greedy_action(spec, s, action_count, sol.values, nullptr);
        }
      }
      break;
    }
    if (it > 10000) throw ConvergenceError("policy iteration did not stabilise", 0.0);
  }
  return sol;
}

Policy policy_iteration(const MdpSpec& spec, int action_count) {
  const auto sol = policy_iteration_solution(spec, action_count);
  return greedy_policy(sol.greedy, action_count);
}

std::vector<double> evaluate_policy(const MdpSpec& spec, const Policy& policy) {
  check_actions(spec, policy.n_actions);
  if (policy.n_states != spec.n_states) throw InvalidArgument("policy and spec disagree on states");
  const auto ns = static_cast<std::size_t>(spec.n_states);
  std::vector<double> next(ns, 0.0);
  std::vector<double> cur(ns, 0.0);
  for (int t = spec.horizon - 1; t >= 0; --t) {
    for (int s = 0; s < spec.n_states; ++s) {
      const auto us = static_cast<std::size_t>(s);
      if (spec.terminal[us]) {
        cur[us] = 0.0;
        continue;
      }
      const auto probs = policy.row(s);
      double v = 0.0;
      for (int a = 0; a < policy.n_actions; ++a) {
        const double pa = probs[static_cast<std::size_t>(a)];
        if (pa > 0.0) v += pa * backup(spec, s, a, next);
      }
      cur[us] = v;
    }
    next.swap(cur);
  }
  return next;
}

double exact_policy_value(const MdpSpec& spec, const Policy& policy,
                          std::span<const double> initial_distribution) {
  if (initial_distribution.size() != static_cast<std::size_t>(spec.n_states)) {
    throw InvalidArgument("initial distribution has the wrong length");
  }
  const auto v = evaluate_policy(spec, policy);
  double total = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) total += initial_distribution[s] * v[s];
  return total;
}

double exact_policy_value(const MdpSpec& spec, const Policy& policy) {
  return exact_policy_value(spec, policy, spec.initial);
}

namespace {

int sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the running total: take the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

std::vector<LabeledTrajectory> rollout_full(const MdpSpec& spec, const Policy& policy,
                                            std::size_t n, std::uint64_t seed) {
  check_actions(spec, policy.n_actions);
  Rng init_rng = make_stream(seed, "sepsis/rollout/initial");
  Rng action_rng = make_stream(seed, "sepsis/rollout/action");
  Rng step_rng = make_stream(seed, "sepsis/rollout/transition");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int horizon = spec.horizon;

  std::vector<LabeledTrajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> states;
    std::vector<double> rewards;
    std::vector<int> actions;
    states.reserve(static_cast<std::size_t>(horizon) + 1);
    int s = sample_index(spec.initial, unit(init_rng));
    std::optional<int> absorbed;
    if (spec.terminal[static_cast<std::size_t>(s)]) absorbed = 0;
    states.push_back(s);
    for (int t = 0; t < horizon; ++t) {
      const int a = sample_index(policy.row(s), unit(action_rng));
      actions.push_back(a);
      const double u = unit(step_rng);
      if (spec.terminal[static_cast<std::size_t>(s)]) {
        rewards.push_back(0.0);
        states.push_back(s);
        continue;
      }
      const auto& row = spec.row(s, a);
      const int nx = row.next[static_cast<std::size_t>(sample_index(row.prob, u))];
      rewards.push_back(spec.reward[static_cast<std::size_t>(nx)]);
      states.push_back(nx);
      if (spec.terminal[static_cast<std::size_t>(nx)] && !absorbed) absorbed = t + 1;
      s = nx;
    }
    const double g = discounted_return(rewards, spec.discount);
    out.push_back(LabeledTrajectory{
        Trajectory(1, std::move(states), std::move(rewards), std::move(actions), std::nullopt,
                   absorbed),
        g});
  }
  return out;
}

BehaviorDataset rollout_behavior(const MdpSpec& spec, const Policy& policy, std::size_t n,
                                 int h_record, std::uint64_t seed) {
  if (h_record < 0 || h_record > spec.horizon) throw InvalidArgument("h_record outside [0, H]");
  auto full = rollout_full(spec, policy, n, seed);
  std::vector<LabeledTrajectory> items;
  items.reserve(full.size());
  for (const auto& tr : full) items.push_back(truncate(tr, h_record));
  return BehaviorDataset(std::move(items));
}

TargetRollout rollout_target(const MdpSpec& spec, const Policy& policy, std::size_t n,
                             int h_record, std::uint64_t seed) {
  if (h_record < 0 || h_record > spec.horizon) throw InvalidArgument("h_record outside [0, H]");
  auto full = rollout_full(spec, policy, n, seed);
  std::vector<Trajectory> prefixes;
  std::vector<double> returns;
  for (const auto& tr : full) {
    prefixes.push_back(truncate(tr.prefix, h_record));
    returns.push_back(tr.full_return);
  }
  return TargetRollout{TargetDataset(std::move(prefixes)), std::move(returns)};
}

void export_spec(std::ostream& out, const MdpSpec& spec) {
  out.precision(17);
  out << "# states=" << spec.n_states << " behavior_actions=" << spec.behavior_actions
      << " target_actions=" << spec.target_actions << " horizon=" << spec.horizon
      << " discount=" << spec.discount << '\n';
  out << "state,action,next_state,prob\n";
  for (int s = 0; s < spec.n_states; ++s) {
    for (int a = 0; a < spec.target_actions; ++a) {
      const auto& row = spec.row(s, a);
      for (std::size_t j = 0; j < row.next.size(); ++j) {
        out << s << ',' << a << ',' << row.next[j] << ',' << row.prob[j] << '\n';
      }
    }
  }
  out << "state,reward,terminal\n";
  for (int s = 0; s < spec.n_states; ++s) {
    const auto us = static_cast<std::size_t>(s);
    out << s << ',' << spec.reward[us] << ',' << (spec.terminal[us] ? 1 : 0) << '\n';
  }
  out << "state,initial\n";
  for (int s = 0; s < spec.n_states; ++s) {
    out << s << ',' << spec.initial[static_cast<std::size_t>(s)] << '\n';
  }
}

namespace {

std::vector<double> numbers_of(const std::string& line, std::size_t expected, std::size_t line_no) {
  std::vector<double> values;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos) {
        throw std::invalid_argument(cell);
      }
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    }
  }
  if (values.size() != expected) {
    throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                     " fields");
  }
  return values;
}

}  // namespace

MdpSpec import_spec(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw ParseError("spec file must start with a '# states=...' line");
  }
  MdpSpec spec;
  {
    std::istringstream meta(line.substr(2));
    std::string field;
    while (meta >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw ParseError("malformed header field '" + field + "'");
      const auto key = field.substr(0, eq);
      const auto value = field.substr(eq + 1);
      if (key == "states") spec.n_states = std::stoi(value);
      else if (key == "behavior_actions") spec.behavior_actions = std::stoi(value);
      else if (key == "target_actions") spec.target_actions = std::stoi(value);
      else if (key == "horizon") spec.horizon = std::stoi(value);
      else if (key == "discount") spec.discount = std::stod(value);
      else throw ParseError("unknown header field '" + key + "'");
    }
  }
  if (spec.n_states < 1 || spec.target_actions < 1) throw ParseError("header lacks sizes");
  const auto ns = static_cast<std::size_t>(spec.n_states);
  spec.transition.resize(ns * static_cast<std::size_t>(spec.target_actions));
  spec.reward.assign(ns, 0.0);
  spec.terminal.assign(ns, 0);
  spec.initial.assign(ns, 0.0);

  enum class Section { kNone, kTransition, kReward, kInitial } section = Section::kNone;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "state,action,next_state,prob") {
      section = Section::kTransition;
      continue;
    }
    if (line == "state,reward,terminal") {
      section = Section::kReward;
      continue;
    }
    if (line == "state,initial") {
      section = Section::kInitial;
      continue;
    }
    const auto check_state = [&](double v) {
      if (v < 0 || v >= spec.n_states || v != std::floor(v)) {
        throw ParseError("line " + std::to_string(line_no) + ": state out of range");
      }
      return static_cast<int>(v);
    };
    switch (section) {
      case Section::kNone:
        throw ParseError("line " + std::to_string(line_no) + ": data before a section header");
      case Section::kTransition: {
        const auto v = numbers_of(line, 4, line_no);
        const int s = check_state(v[0]);
        const int a = static_cast<int>(v[1]);
        if (a < 0 || a >= spec.target_actions) throw ParseError("action out of range");
        auto& row = spec.transition[static_cast<std::size_t>(s) *
                                        static_cast<std::size_t>(spec.target_actions) +
                                    static_cast<std::size_t>(a)];
        row.next.push_back(check_state(v[2]));
        row.prob.push_back(v[3]);
        break;
      }
      case Section::kReward: {
        const auto v = numbers_of(line, 3, line_no);
        const auto s = static_cast<std::size_t>(check_state(v[0]));
        spec.reward[s] = v[1];
        spec.terminal[s] = v[2] != 0.0 ? 1 : 0;
        break;
      }
      case Section::kInitial: {
        const auto v = numbers_of(line, 2, line_no);
        spec.initial[static_cast<std::size_t>(check_state(v[0]))] = v[1];
        break;
      }
    }
  }
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("imported spec is invalid: ") + e.what());
  }
  return spec;
}

FeatureMap sepsis_features(double discount) {
  // reward so far, alive, then alive-gated state indicators.
  return FeatureMap{
      "sepsis-last-state", -1, 15, [discount](const Trajectory& tr, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[0] = tr.has_rewards() ? discounted_return(tr.rewards(), discount) : 0.0;
        if (tr.terminated()) return;
        const auto st = SepsisState::decode(static_cast<int>(tr.scalar_state(tr.horizon())));
        out[1] = 1.0;
        out[2] = st.heart_rate == kLow ? 1.0 : 0.0;
        out[3] = st.heart_rate == kHigh ? 1.0 : 0.0;
        out[4] = st.blood_pressure == kLow ? 1.0 : 0.0;
        out[5] = st.blood_pressure == kHigh ? 1.0 : 0.0;
        out[6] = st.oxygen == 0 ? 1.0 : 0.0;
        out[7] = st.glucose == 0 ? 1.0 : 0.0;
        out[8] = st.glucose == 1 ? 1.0 : 0.0;
        out[9] = st.glucose == 3 ? 1.0 : 0.0;
        out[10] = st.glucose == 4 ? 1.0 : 0.0;
        out[11] = st.diabetic ? 1.0 : 0.0;
        out[12] = st.antibiotics ? 1.0 : 0.0;
        out[13] = st.ventilation ? 1.0 : 0.0;
        out[14] = st.abnormal_vitals() == 2 ? 1.0 : 0.0;
      }};
}

TrajectoryKey sepsis_key(const Trajectory& prefix) {
  auto st = SepsisState::decode(static_cast<int>(prefix.scalar_state(prefix.horizon())));
  st.vasopressors = false;
  std::string key = std::to_string(st.encode());
  if (prefix.absorbed_at()) key += "@" + std::to_string(*prefix.absorbed_at());
  return key;
}

}  // namespace shortlong
