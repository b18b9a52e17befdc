// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "shortlong/estimators.hpp"
#include "shortlong/experiment.hpp"
#include "shortlong/rng.hpp"
#include "shortlong/sepsis.hpp"
#include "shortlong/stats.hpp"
#include "shortlong/synthetic.hpp"
#include "shortlong/theory.hpp"

using namespace shortlong;

namespace {

int failures = 0;

struct Checks {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (cond ? "" : " [x]");
    ok = ok && cond;
  }
};

std::string num(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

void report(int id, const std::function<Checks()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Checks c;
  try {
    c = body();
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("threw: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("criterion %d: %s  (%s; %.1fs)\n", id, c.ok ? "PASS" : "FAIL", c.detail.c_str(), secs);
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

ExperimentReport toy(Scenario scenario, std::vector<std::string> estimators) {
  auto c = default_config(Environment::kToy);
  c.scenario = scenario;
  c.estimators = std::move(estimators);
  return run_experiment(c);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Checks noise_table() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = toy(Scenario::kNoiseSweep, {"soft", "mc"});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Checks c;
  const double s1 = r.cell("omega=1", "soft").mean;
  const double m1 = r.cell("omega=1", "mc").mean;
  const double s10 = r.cell("omega=10", "soft").mean;
  const double m10 = r.cell("omega=10", "mc").mean;
  c.expect(within(s1, 0.0, 0.012), "soft w=1 " + num(s1));
  c.expect(within(m1, 0.85, 1.12), "mc w=1 " + num(m1));
  c.expect(within(s10, 0.05, 0.9), "soft w=10 " + num(s10));
  c.expect(within(m10, 85, 112), "mc w=10 " + num(m10));
  c.expect(secs < 120.0, "200 seeds in " + num(secs, 1) + "s");
  return c;
}

Checks weighted_table() {
  Checks c;
  const std::vector<std::string> ids{"soft", "w-soft", "dr-soft"};
  const auto real = toy(Scenario::kRealizable, ids);
  const auto reg = toy(Scenario::kRegressorMisspecified, ids);
  const auto rat = toy(Scenario::kRatioMisspecified, ids);
  const auto m = [](const ExperimentReport& r, const char* id) { return r.settings.empty() ? 0.0 : r.cell(r.settings[0], id).mean; };
  c.expect(within(m(real, "soft"), 0.0, 0.012), "realizable soft " + num(m(real, "soft")));
  c.expect(within(m(real, "w-soft"), 0.02, 0.25), "w-soft " + num(m(real, "w-soft")));
  c.expect(within(m(real, "dr-soft"), 0.002, 0.03), "dr " + num(m(real, "dr-soft")));
  c.expect(within(m(reg, "soft"), 0.80, 1.05), "reg-missp soft " + num(m(reg, "soft")));
  c.expect(within(m(reg, "w-soft"), 0.02, 0.25), "w-soft " + num(m(reg, "w-soft")));
  c.expect(within(m(reg, "dr-soft"), 0.002, 0.03), "dr " + num(m(reg, "dr-soft")));
  c.expect(within(m(rat, "soft"), 0.0, 0.012), "ratio-missp soft " + num(m(rat, "soft")));
  c.expect(within(m(rat, "w-soft"), 0.1, 1.2), "w-soft " + num(m(rat, "w-soft")));
  c.expect(within(m(rat, "dr-soft"), 0.002, 0.03), "dr " + num(m(rat, "dr-soft")));
  return c;
}

Checks data_size_trend() {
  Checks c;
  const auto r = toy(Scenario::kDataSizeSweep, {"w-soft"});
  const double a = r.cell("N=500", "w-soft").mean;
  const double b = r.cell("N=1000", "w-soft").mean;
  const double d = r.cell("N=50000", "w-soft").mean;
  c.expect(a > b && b > d, "w-soft " + num(a) + " > " + num(b) + " > " + num(d));
  c.expect(a > 1.0, "N=500 above 1");
  c.expect(d < 0.6, "N=50000 below 0.6");
  return c;
}

Checks oracle_unbiased() {
  const ToyDensityOracle oracle(5000, 100, 0.1);
  const double truth = oracle.target_value();
  const NuisanceFitter exact = [&oracle](const BehaviorDataset&, const TargetDataset&, int) {
    return FoldNuisances{[](const Trajectory& t) { return toy_true_return(t.scalar_state(0), t.scalar_state(1)); },
                         [&oracle](const Trajectory& t) { return oracle.ratio(t); }};
  };
  std::vector<double> err;
  for (std::uint64_t s = 0; s < 500; ++s) {
    ToyConfig toy;
    toy.seed = derive_seed({s, stream_id("oracle-dr")});
    const auto b = sample_behavior(toy);
    const auto e = sample_target(toy).data;
    const auto plan = make_fold_plan(b.size(), e.size(), 2, s);
    err.push_back(estimate_dr(b, e, plan, exact).value - truth);
  }
  const double bias = mean(err);
  const double se = sample_sd(err) / std::sqrt(500.0);
  Checks c;
  c.expect(std::abs(bias) <= 3.0 * se, "bias " + num(bias, 4) + ", 3 SE " + num(3 * se, 4));
  return c;
}

// 10 discrete prefixes; fold k uses f + delta_f[k] and h * ratio_rel[k].
Checks bias_identity() {
  constexpr int kS = 10;
  std::vector<double> pb(kS);
  std::vector<double> pe(kS);
  std::vector<double> f(kS);
  for (int s = 0; s < kS; ++s) {
    pb[s] = 1.0 + 0.2 * s;
    pe[s] = 3.0 - 0.25 * s;
    f[s] = 0.5 * s - 0.03 * s * s;
  }
  const auto normalize = [](std::vector<double>& p) {
    double t = 0.0;
    for (const double x : p) t += x;
    for (auto& x : p) x /= t;
  };
  normalize(pb);
  normalize(pe);
  std::vector<double> h(kS);
  for (int s = 0; s < kS; ++s) h[s] = pe[s] / pb[s];
  const std::vector<std::vector<double>> df{{0.4, -0.2, 0.3, 0.5, 0.1, -0.3, 0.6, 0.2, 0.0, 0.4},
                                            {0.2, 0.3, -0.4, 0.1, 0.5, 0.2, -0.1, 0.3, 0.6, -0.2}};
  const std::vector<std::vector<double>> rel_planted{{0.5, 1.2, 0.7, 0.6, 1.0, 1.3, 0.4, 0.8, 1.1, 0.9},
                                                     {1.4, 0.6, 1.2, 0.5, 0.7, 0.9, 1.5, 0.6, 0.8, 1.3}};
  std::vector<std::vector<double>> rel;
  for (int k = 0; k < 2; ++k) {
    std::vector<double> est(kS);
    for (int s = 0; s < kS; ++s) est[s] = h[s] * rel_planted[k][s];
    rel.push_back(relative_ratio(pe, est, h));
  }
  const double predicted = product_bias(pe, df, rel);
  double truth = 0.0;
  for (int s = 0; s < kS; ++s) truth += pe[s] * f[s];

  const NuisanceFitter planted = [&](const BehaviorDataset&, const TargetDataset&, int k) {
    const auto ku = static_cast<std::size_t>(k);
    return FoldNuisances{
        [&, ku](const Trajectory& t) {
          const auto s = static_cast<std::size_t>(t.scalar_state(0));
          return f[s] + df[ku][s];
        },
        [&, ku](const Trajectory& t) {
          const auto s = static_cast<std::size_t>(t.scalar_state(0));
          return h[s] * rel[ku][s];
        }};
  };
  const std::size_t runs = 10000;
  std::vector<double> err;
  err.reserve(runs);
  std::discrete_distribution<int> draw_b(pb.begin(), pb.end());
  std::discrete_distribution<int> draw_e(pe.begin(), pe.end());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng(derive_seed({r, stream_id("bias-identity")}));
    std::vector<LabeledTrajectory> b;
    for (int i = 0; i < 200; ++i) {
      const int s = draw_b(rng);
      b.push_back({Trajectory(1, {double(s), double(s)}, {}), f[s] + noise(rng)});
    }
    std::vector<Trajectory> e;
    for (int i = 0; i < 100; ++i) {
      const int s = draw_e(rng);
      e.push_back(Trajectory(1, {double(s), double(s)}, {}));
    }
    const auto plan = make_fold_plan(b.size(), e.size(), 2, r);
    err.push_back(estimate_dr(BehaviorDataset(std::move(b)), TargetDataset(std::move(e)), plan, planted).value -
                  truth);
  }
  const double bias = mean(err);
  const double se = sample_sd(err) / std::sqrt(static_cast<double>(runs));
  Checks c;
  c.expect(std::abs(bias - predicted) <= 3.0 * se,
           "empirical " + num(bias, 4) + " vs product " + num(predicted, 4) + " (SE " + num(se, 4) + ")");
  c.expect(std::abs(predicted) > 10.0 * se, "planted bias is resolvable");
  const std::vector<double> two{0.5, 0.5};
  const double hand = product_bias(two, {{1.0, 2.0}}, {{0.5, 2.0}});
  c.expect(hand == -0.75, "hand case " + num(hand, 2));
  return c;
}

Checks bound_coverage() {
  CoverageSettings s;
  s.delta = 0.05;
  s.n_seeds = 200;
  const auto r = empirical_bound_coverage(s);
  Checks c;
  c.expect(r.coverage >= 0.92, "coverage " + num(r.coverage));
  bool dominates = true;
  for (const auto& row : r.rows) {
    if (row.covered && !(row.bound.total > row.empirical_error)) dominates = false;
  }
  c.expect(dominates, "bound above error in covered seeds");
  return c;
}

Checks sepsis_properties() {
  const auto config = default_config(Environment::kSepsis);
  const auto r = run_experiment(config);
  const auto med = [&](const std::string& id) {
    std::vector<double> v;
    for (const auto& row : r.rows) {
      if (row.estimator == id) v.push_back(row.metric);
    }
    return median(v);
  };
  Checks c;
  const double baseline = std::min({med("extrap-avg"), med("extrap-last"), med("model-based")});
  for (const char* id : {"soft", "w-soft", "dr-soft", "dr-w-soft"}) {
    c.expect(med(id) < baseline, std::string(id) + " " + num(med(id), 4));
  }
  c.expect(true, "best baseline " + num(baseline, 4));

  // (b) per-trajectory soft predictions against behavior returns
  const auto spec = build_default_spec(config.spec_seed);
  const auto pb = soften(policy_iteration(spec, spec.behavior_actions), config.eps_b);
  const auto pe = soften(policy_iteration(spec, spec.target_actions), config.eps_e);
  const double gap = exact_policy_value(spec, pe) - exact_policy_value(spec, pb);
  RegressorConfig regressor;
  regressor.features = sepsis_features(spec.discount);
  regressor.options.intercept = false;
  double worst_p = 0.0;
  for (std::size_t idx = 0; idx < config.n_seeds; ++idx) {
    const auto data_seed = derive_seed({config.base_seed, idx, stream_id("data")});
    const auto b = rollout_behavior(spec, pb, config.n_behavior, config.short_h, derive_seed({data_seed, 1}));
    const auto e = rollout_target(spec, pe, config.n_target, config.short_h, derive_seed({data_seed, 2}));
    const auto est = estimate_soft(b, e.data, regressor);
    const auto returns = b.returns();
    worst_p = std::max(worst_p, t_test_independent(est.per_trajectory_predictions, returns).p_value);
  }
  if (std::abs(gap) > 0.1) {
    c.expect(worst_p < 0.01, "gap " + num(gap, 3) + ", largest p " + std::to_string(worst_p));
  } else {
    c.expect(true, "gap " + num(gap, 3) + " below 0.1, test not required");
  }
  return c;
}

Checks dp_oracles() {
  const auto spec = build_default_spec(0);
  Checks c;
  for (const int actions : {spec.behavior_actions, spec.target_actions}) {
    const auto vi = discounted_value_iteration(spec, actions);
    const auto pi = policy_iteration_solution(spec, actions);
    double diff = 0.0;
    for (int s = 0; s < spec.n_states; ++s) diff = std::max(diff, std::abs(vi.values[s] - pi.values[s]));
    c.expect(diff <= 1e-9, std::to_string(actions) + " actions: max |VI - PI| " + std::to_string(diff));
  }
  const auto pe = soften(policy_iteration(spec, spec.target_actions), 0.15);
  const double exact = exact_policy_value(spec, pe);
  const auto runs = rollout_full(spec, pe, 100000, 99);
  std::vector<double> g;
  for (const auto& r : runs) g.push_back(r.full_return);
  const double m = mean(g);
  const double se = sample_sd(g) / std::sqrt(static_cast<double>(g.size()));
  c.expect(std::abs(m - exact) <= 3 * se, "rollout " + num(m, 4) + " vs exact " + num(exact, 4) + " (SE " + num(se, 4) + ")");
  return c;
}

Checks statistics() {
  Checks c;
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{2, 3, 4, 5};
  const auto ind = t_test_independent(a, b);
  c.expect(num(ind.t_statistic, 4) == "-1.0954" && ind.degrees_of_freedom == 6 && num(ind.p_value, 4) == "0.3153",
           "independent t " + num(ind.t_statistic, 4) + " p " + num(ind.p_value, 4));
  const std::vector<double> x{2, 4, 6};
  const std::vector<double> y{1, 2, 3};
  const auto pair = t_test_paired(x, y);
  c.expect(num(pair.t_statistic, 4) == "3.4641" && num(pair.p_value, 4) == "0.0742",
           "paired t " + num(pair.t_statistic, 4) + " p " + num(pair.p_value, 4));
  Rng rng(derive_seed({9, stream_id("null-calibration")}));
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> u(30);
  std::vector<double> v(30);
  int rejected = 0;
  const int sims = 10000;
  for (int i = 0; i < sims; ++i) {
    for (auto& q : u) q = z(rng);
    for (auto& q : v) q = z(rng);
    rejected += t_test_independent(u, v).p_value < 0.05;
  }
  const double rate = rejected / static_cast<double>(sims);
  c.expect(std::abs(rate - 0.05) <= 0.02, "null rejection " + num(rate, 4));
  return c;
}

}  // namespace

int main() {
  report(1, noise_table);
  report(2, weighted_table);
  report(3, data_size_trend);
  report(4, oracle_unbiased);
  report(5, bias_identity);
  report(6, bound_coverage);
  report(7, sepsis_properties);
  report(8, dp_oracles);
  report(9, statistics);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
