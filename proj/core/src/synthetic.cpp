#include "shortlong/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"

namespace shortlong {

namespace {

constexpr double kPStay = 0.5;
constexpr double kPScale = 0.45;
constexpr double kPJump = 0.05;
constexpr double kJumpState = 1.5;
constexpr double kTargetSwitch = 1.25;
constexpr double kTargetHigh = 1.5;
constexpr double kTargetLow = 0.0;

double normal_pdf(double x, double sigma) {
  const double z = x / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

struct Streams {
  Rng grid;
  Rng branch;
  Rng scale;
  Rng state;
  Rng ret;
};

Streams streams_for(std::uint64_t seed, const std::string& side) {
  return Streams{make_stream(seed, "toy/" + side + "/grid-noise"),
                 make_stream(seed, "toy/" + side + "/branch"),
                 make_stream(seed, "toy/" + side + "/branch-uniform"),
                 make_stream(seed, "toy/" + side + "/state-noise"),
                 make_stream(seed, "toy/" + side + "/return-noise")};
}

}  // namespace

void ToyConfig::validate() const {
  if (n_behavior < 1 || n_target < 1) throw InvalidArgument("toy dataset sizes must be >= 1");
  if (!(noise_omega >= 0.0) || !std::isfinite(noise_omega)) {
    throw InvalidArgument("return noise omega must be finite and >= 0");
  }
  if (!(state_noise_sigma >= 0.0) || !std::isfinite(state_noise_sigma)) {
    throw InvalidArgument("state noise sigma must be finite and >= 0");
  }
}

double toy_true_return(double s0, double s1) noexcept { return 5.0 * s0 + s1 + s1 * s1; }

double toy_behavior_mean_next(double s0, ToyBranch branch, double u) noexcept {
  switch (branch) {
    case ToyBranch::kStay:
      return s0;
    case ToyBranch::kScale:
      return (-0.6 + 0.1 * u) * s0;
    case ToyBranch::kJump:
      return kJumpState;
  }
  return s0;
}

double toy_target_mean_next(double s0) noexcept {
  return s0 < kTargetSwitch ? kTargetHigh : kTargetLow;
}

std::vector<double> toy_grid(std::size_t n) {
  std::vector<double> grid(n, 0.0);
  if (n == 1) return grid;
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = 1.5 * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return grid;
}

Trajectory toy_prefix(double s0, double s1) { return Trajectory(1, {s0, s1}, {}); }

std::vector<ToySample> draw_behavior_samples(const ToyConfig& config) {
  config.validate();
  auto rng = streams_for(config.seed, "behavior");
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sigma = config.suppress_state_noise ? 0.0 : config.state_noise_sigma;
  const auto grid = toy_grid(config.n_behavior);

  std::vector<ToySample> out(config.n_behavior);
  for (std::size_t i = 0; i < config.n_behavior; ++i) {
    auto& x = out[i];
    x.s0 = grid[i] + sigma * std_normal(rng.grid);
    const double pick = unit(rng.branch);
    const double u = unit(rng.scale);
    x.branch = pick < kPStay ? ToyBranch::kStay
               : pick < kPStay + kPScale ? ToyBranch::kScale
                                         : ToyBranch::kJump;
    if (config.forced_branch) x.branch = *config.forced_branch;
    x.s1 = toy_behavior_mean_next(x.s0, x.branch, u) + sigma * std_normal(rng.state);
    x.true_return = toy_true_return(x.s0, x.s1);
    x.observed_return = x.true_return + config.noise_omega * std_normal(rng.ret);
  }
  return out;
}

std::vector<ToySample> draw_target_samples(const ToyConfig& config) {
  config.validate();
  auto rng = streams_for(config.seed, "target");
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const double sigma = config.suppress_state_noise ? 0.0 : config.state_noise_sigma;
  const auto grid = toy_grid(config.n_target);

  std::vector<ToySample> out(config.n_target);
  for (std::size_t i = 0; i < config.n_target; ++i) {
    auto& x = out[i];
    x.s0 = grid[i] + sigma * std_normal(rng.grid);
    x.s1 = toy_target_mean_next(x.s0) + sigma * std_normal(rng.state);
    x.true_return = toy_true_return(x.s0, x.s1);
    x.observed_return = x.true_return + config.noise_omega * std_normal(rng.ret);
  }
  return out;
}

BehaviorDataset sample_behavior(const ToyConfig& config) {
  const auto samples = draw_behavior_samples(config);
  std::vector<LabeledTrajectory> items;
  items.reserve(samples.size());
  for (const auto& x : samples) items.push_back({toy_prefix(x.s0, x.s1), x.observed_return});
  return BehaviorDataset(std::move(items));
}

ToyTargetDraw sample_target(const ToyConfig& config) {
  const auto samples = draw_target_samples(config);
  std::vector<Trajectory> prefixes;
  std::vector<double> truth;
  std::vector<double> observed;
  for (const auto& x : samples) {
    prefixes.push_back(toy_prefix(x.s0, x.s1));
    truth.push_back(x.true_return);
    observed.push_back(x.observed_return);
  }
  return ToyTargetDraw{TargetDataset(std::move(prefixes)), std::move(truth), std::move(observed)};
}

// s0 marginals are tabulated once per (grid size, sigma) on a fine lattice
// and linearly interpolated.
namespace {

constexpr double kTableLo = -1.5;
constexpr double kTableHi = 3.0;
constexpr double kTableStep = 2e-4;

std::shared_ptr<const std::vector<double>> mixture_table(std::size_t n, double sigma) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, double>, std::shared_ptr<const std::vector<double>>>
      cache;
  const std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n, sigma}];
  if (slot) return slot;

  const auto grid = toy_grid(n);
  const auto points = static_cast<std::size_t>(std::lround((kTableHi - kTableLo) / kTableStep)) + 1;
  auto table = std::make_shared<std::vector<double>>(points, 0.0);
  const double reach = 9.0 * sigma;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t p = 0; p < points; ++p) {
    const double x = kTableLo + kTableStep * static_cast<double>(p);
    const auto first = std::lower_bound(grid.begin(), grid.end(), x - reach);
    const auto last = std::upper_bound(grid.begin(), grid.end(), x + reach);
    double total = 0.0;
    for (auto it = first; it != last; ++it) total += normal_pdf(x - *it, sigma);
    (*table)[p] = total * inv_n;
  }
  slot = std::move(table);
  return slot;
}

}  // namespace

ToyDensityOracle::ToyDensityOracle(std::size_t n_behavior, std::size_t n_target, double sigma)
    : n_behavior_(n_behavior), n_target_(n_target), sigma_(sigma), lo_(kTableLo), step_(kTableStep) {
  if (n_behavior < 1 || n_target < 1) throw InvalidArgument("toy oracle sizes must be >= 1");
  if (!(sigma > 0.0)) throw InvalidArgument("toy oracle needs positive state noise");
  behavior_s0_ = *mixture_table(n_behavior, sigma);
  target_s0_ = *mixture_table(n_target, sigma);
}

double ToyDensityOracle::mixture_density(const std::vector<double>& table, double s0) const {
  const double pos = (s0 - lo_) / step_;
  if (!(pos >= 0.0) || pos >= static_cast<double>(table.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return (1.0 - frac) * table[i] + frac * table[i + 1];
}

double ToyDensityOracle::behavior_transition(double s0, double s1) const {
  double scale_term;
  if (std::abs(s0) < 1e-9) {
    scale_term = normal_pdf(s1 + 0.55 * s0, sigma_);
  } else {
    const double a = -0.6 * s0;
    const double b = -0.5 * s0;
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    scale_term = (normal_cdf((s1 - lo) / sigma_) - normal_cdf((s1 - hi) / sigma_)) /
                 (0.1 * std::abs(s0));
  }
  return kPStay * normal_pdf(s1 - s0, sigma_) + kPScale * scale_term +
         kPJump * normal_pdf(s1 - kJumpState, sigma_);
}

double ToyDensityOracle::target_transition(double s0, double s1) const {
  return normal_pdf(s1 - toy_target_mean_next(s0), sigma_);
}

double ToyDensityOracle::behavior_density(double s0, double s1) const {
  return mixture_density(behavior_s0_, s0) * behavior_transition(s0, s1);
}

double ToyDensityOracle::target_density(double s0, double s1) const {
  return mixture_density(target_s0_, s0) * target_transition(s0, s1);
}

double ToyDensityOracle::ratio(double s0, double s1) const {
  const double pb = behavior_density(s0, s1);
  if (!(pb > 0.0)) return 0.0;
  return target_density(s0, s1) / pb;
}

double ToyDensityOracle::ratio(const Trajectory& prefix) const {
  return ratio(prefix.scalar_state(0), prefix.scalar_state(1));
}

double ToyDensityOracle::target_value() const {
  const auto grid = toy_grid(n_target_);
  double p_high = 0.0;
  for (const double g : grid) p_high += normal_cdf((kTargetSwitch - g) / sigma_);
  p_high /= static_cast<double>(grid.size());
  const double high = kTargetHigh + kTargetHigh * kTargetHigh;
  const double low = kTargetLow + kTargetLow * kTargetLow;
  double mean_s0 = 0.0;
  for (const double g : grid) mean_s0 += g;
  mean_s0 /= static_cast<double>(grid.size());
  return 5.0 * mean_s0 + p_high * high + (1.0 - p_high) * low + sigma_ * sigma_;
}

double ToyDensityOracle::behavior_value() const {
  const auto grid = toy_grid(n_behavior_);
  double m1 = 0.0;
  double m2 = 0.0;
  for (const double g : grid) {
    m1 += g;
    m2 += g * g;
  }
  m1 /= static_cast<double>(grid.size());
  m2 = m2 / static_cast<double>(grid.size()) + sigma_ * sigma_;
  const double s2 = sigma_ * sigma_;
  // E[c] and E[c^2] for c ~ U[-0.6, -0.5).
  const double c1 = -0.55;
  const double c2 = 0.01 / 12.0 + c1 * c1;
  const double stay = m1 + m2 + s2;
  const double scale = c1 * m1 + c2 * m2 + s2;
  const double jump = kJumpState + kJumpState * kJumpState + s2;
  return 5.0 * m1 + kPStay * stay + kPScale * scale + kPJump * jump;
}

}  // namespace shortlong
