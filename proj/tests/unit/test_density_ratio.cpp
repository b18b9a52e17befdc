#include <doctest.h>

#include <cmath>
#include <sstream>

#include "shortlong/density_ratio.hpp"
#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"
#include "shortlong/synthetic.hpp"

using namespace shortlong;

namespace {

// 2 x 2 grid over [0, 2]^2; bin (i, j) holds points near (i + 0.5, j + 0.5).
const BinGrid kGrid{{2, 2}, {{0.0, 2.0}, {0.0, 2.0}}};

Trajectory in_bin(int i, int j) { return toy_prefix(i + 0.5, j + 0.5); }

BehaviorDataset behavior_counts(const std::vector<int>& counts) {
  std::vector<LabeledTrajectory> items;
  for (int b = 0; b < 4; ++b) {
    for (int c = 0; c < counts[static_cast<std::size_t>(b)]; ++c) items.push_back({in_bin(b / 2, b % 2), 0.0});
  }
  return BehaviorDataset(std::move(items));
}

TargetDataset target_counts(const std::vector<int>& counts) {
  std::vector<Trajectory> items;
  for (int b = 0; b < 4; ++b) {
    for (int c = 0; c < counts[static_cast<std::size_t>(b)]; ++c) items.push_back(in_bin(b / 2, b % 2));
  }
  return TargetDataset(std::move(items));
}

RatioOptions lenient() {
  RatioOptions o;
  o.strict_coverage = false;
  return o;
}

}  // namespace

TEST_CASE("bin lookup clamps to the edge bins") {
  CHECK(kGrid.bin_of(toy_prefix(0.1, 1.9)) == 1);
  CHECK(kGrid.bin_of(toy_prefix(1.9, 0.1)) == 2);
  CHECK(kGrid.bin_of(toy_prefix(-5.0, 9.0)) == 1);
  CHECK(kGrid.coordinates(3) == std::vector<int>{1, 1});
  CHECK_THROWS_AS(kGrid.bin_of(Trajectory(1, {0, 0, 0}, {})), InvalidArgument);
  CHECK_THROWS_AS((BinGrid{{0}, {{0.0, 1.0}}}.validate()), InvalidArgument);
  CHECK(BinGrid::toy_default().total_bins() == 2500);
}

TEST_CASE("histogram ratio arithmetic") {
  SUBCASE("identical distributions") {
    const auto m = fit_histogram_ratio(behavior_counts({5, 3, 0, 2}), target_counts({5, 3, 0, 2}), kGrid);
    CHECK(m.ratio(in_bin(0, 0)) == 1.0);
    CHECK(m.ratio(in_bin(0, 1)) == 1.0);
    CHECK(m.ratio(in_bin(1, 1)) == 1.0);
  }
  SUBCASE("10/100 over 50/5000") {
    const auto m = fit_histogram_ratio(behavior_counts({50, 4950, 0, 0}), target_counts({10, 90, 0, 0}), kGrid);
    CHECK(m.ratio(in_bin(0, 0)) == doctest::Approx(10.0));
    CHECK(m.numerator_counts()[0] == 10);
    CHECK(m.denominator_counts()[0] == 50);
  }
  SUBCASE("zero-target bins give ratio 0") {
    const auto m = fit_histogram_ratio(behavior_counts({5, 5, 0, 0}), target_counts({4, 0, 0, 0}), kGrid);
    CHECK(m.ratio(in_bin(0, 1)) == 0.0);
  }
  SUBCASE("coverage violation names the bin") {
    try {
      (void)fit_histogram_ratio(behavior_counts({5, 5, 0, 0}), target_counts({1, 0, 0, 1}), kGrid);
      FAIL("expected a coverage error");
    } catch (const CoverageError& e) {
      CHECK(std::string(e.what()).find("(1, 1)") != std::string::npos);
    }
    const auto m = fit_histogram_ratio(behavior_counts({5, 5, 0, 0}), target_counts({1, 0, 0, 1}), kGrid, lenient());
    CHECK(m.uncovered_target_count() == 1);
    CHECK(m.ratio(in_bin(1, 1)) == 0.0);
  }
  SUBCASE("clipping") {
    RatioOptions o;
    o.clip_max = 3.0;
    const auto m = fit_histogram_ratio(behavior_counts({1, 99, 0, 0}), target_counts({50, 50, 0, 0}), kGrid, o);
    CHECK(m.ratio(in_bin(0, 0)) == 3.0);
  }
}

TEST_CASE("histogram dump") {
  const auto m = fit_histogram_ratio(behavior_counts({2, 2, 0, 0}), target_counts({1, 1, 0, 0}), kGrid);
  std::ostringstream out;
  m.dump_histogram_csv(out);
  CHECK(out.str().rfind("bin_index_s0,bin_index_s1,count_b,count_e,ratio\n0,0,2,1,1\n0,1,2,1,1\n", 0) == 0);
}

TEST_CASE("tabular ratio") {
  const KeyFunction key = exact_trajectory_key;
  std::vector<LabeledTrajectory> b;
  std::vector<Trajectory> e;
  for (int i = 0; i < 5000; ++i) b.push_back({toy_prefix(i < 50 ? 1.0 : 2.0, 0.0), 0.0});
  for (int i = 0; i < 500; ++i) e.push_back(toy_prefix(i < 5 ? 1.0 : 2.0, 0.0));
  e.back() = toy_prefix(2.0, 0.0);
  const auto m = fit_tabular_ratio(BehaviorDataset(b), TargetDataset(e), key);
  CHECK(m.ratio(toy_prefix(1.0, 0.0)) == doctest::Approx(1.0));
  CHECK(m.ratio(toy_prefix(7.0, 0.0)) == 0.0);
  CHECK(m.cell_of(toy_prefix(7.0, 0.0)) == -1);
  CHECK(mean_weight_diagnostic(m, BehaviorDataset(b)).mean == doctest::Approx(1.0));

  std::vector<Trajectory> e2 = e;
  e2.push_back(toy_prefix(3.0, 0.0));
  CHECK_THROWS_AS(fit_tabular_ratio(BehaviorDataset(b), TargetDataset(e2), key), CoverageError);
}

TEST_CASE("tabular and histogram agree when the grid resolves every key") {
  const auto b = behavior_counts({7, 3, 1, 9});
  const auto e = target_counts({2, 2, 3, 1});
  const auto hist = fit_histogram_ratio(b, e, kGrid);
  const auto tab = fit_tabular_ratio(b, e, exact_trajectory_key);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(hist.ratio(in_bin(i, j)) == doctest::Approx(tab.ratio(in_bin(i, j))));
  }
}

TEST_CASE("self-normalisation of frequency ratios") {
  ToyConfig c;
  c.seed = 21;
  c.n_target = 5000;
  const auto b = sample_behavior(c);
  // target drawn from the behavior process itself: full coverage
  ToyConfig c2 = c;
  c2.seed = 22;
  std::vector<Trajectory> e;
  const auto drawn = sample_behavior(c2);
  for (const auto& item : drawn.items()) e.push_back(item.prefix);
  const auto m = fit_histogram_ratio(b, TargetDataset(e), BinGrid::toy_default(), lenient());
  const auto d = mean_weight_diagnostic(m, b);
  CHECK(d.mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("per-bin ratios converge to one under identical distributions") {
  const BinGrid coarse{{4, 4}, {{-0.5, 2.0}, {-0.5, 2.0}}};
  double previous = INFINITY;
  for (const std::size_t n : {1000u, 10000u, 100000u}) {
    ToyConfig a;
    a.n_behavior = n;
    a.seed = 31;
    ToyConfig e = a;
    e.seed = 32;
    std::vector<Trajectory> t;
    const auto drawn = sample_behavior(e);
    for (const auto& item : drawn.items()) t.push_back(item.prefix);
    const auto m = fit_histogram_ratio(sample_behavior(a), TargetDataset(t), coarse, lenient());
    // binomial noise: sd of log-ratio ~ sqrt(2 / count)
    double worst = 0.0;
    for (std::size_t cell = 0; cell < m.cell_ratios().size(); ++cell) {
      const double count = m.denominator_counts()[cell];
      if (count < 100) continue;
      const double z = std::abs(std::log(m.cell_ratios()[cell])) / std::sqrt(2.0 / count);
      worst = std::max(worst, z);
    }
    CHECK(worst < 4.5);
    double spread = 0.0;
    double weight = 0.0;
    for (std::size_t cell = 0; cell < m.cell_ratios().size(); ++cell) {
      spread += m.denominator_counts()[cell] * std::abs(m.cell_ratios()[cell] - 1.0);
      weight += m.denominator_counts()[cell];
    }
    CHECK(spread / weight < previous);
    previous = spread / weight;
  }
}

TEST_CASE("denominator corruption") {
  SUBCASE("forced +10") {
    const auto m = fit_histogram_ratio(behavior_counts({10, 10, 0, 0}), target_counts({20, 0, 0, 0}), kGrid,
                                       lenient());
    // N = M = 20 so the ratio reads num / den
    CHECK(m.ratio(in_bin(0, 0)) == doctest::Approx(2.0));
    const std::vector<double> shift{10.0, 0.0, 0.0, 0.0};
    CHECK(corrupt_density_denominator(m, shift).ratio(in_bin(0, 0)) == doctest::Approx(1.0));
    const std::vector<double> none{0.0, 0.0, 0.0, 0.0};
    CHECK(corrupt_density_denominator(m, none).ratio(in_bin(0, 0)) == m.ratio(in_bin(0, 0)));
  }
  SUBCASE("negative denominators hit the floor") {
    const auto m = fit_histogram_ratio(behavior_counts({1, 99, 0, 0}), target_counts({1, 99, 0, 0}), kGrid);
    const std::vector<double> shift{-5.0, 0.0, 0.0, 0.0};
    const auto bad = corrupt_density_denominator(m, shift);
    const double r = bad.ratio(in_bin(0, 0));
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);
    CHECK(r <= bad.clip_max());
    CHECK(bad.denominator_counts()[0] == doctest::Approx(1e-3));
  }
  SUBCASE("seeded N(10, 10) noise") {
    ToyConfig c;
    c.seed = 4;
    const auto b = sample_behavior(c);
    const auto m = fit_histogram_ratio(b, sample_target(c).data, BinGrid::toy_default(), lenient());
    const auto x = corrupt_density_denominator(m, 7);
    const auto y = corrupt_density_denominator(m, 7);
    CHECK(std::equal(x.cell_ratios().begin(), x.cell_ratios().end(), y.cell_ratios().begin()));
    double mean_shift = 0.0;
    for (std::size_t cell = 0; cell < m.denominator_counts().size(); ++cell) {
      mean_shift += x.denominator_counts()[cell] - m.denominator_counts()[cell];
    }
    mean_shift /= static_cast<double>(m.denominator_counts().size());
    CHECK(mean_shift == doctest::Approx(10.0).epsilon(0.1));
    CHECK(std::abs(mean_weight_diagnostic(x, b).mean - mean_weight_diagnostic(m, b).mean) > 0.01);
  }
}

TEST_CASE("weight diagnostic") {
  const auto b = behavior_counts({1, 1, 1, 1});
  const auto zero = mean_weight_diagnostic([](const Trajectory&) { return 0.0; }, b);
  CHECK(zero.mean == 0.0);
  CHECK(zero.flagged);
  const auto one = mean_weight_diagnostic([](const Trajectory&) { return 1.1; }, b);
  CHECK_FALSE(one.flagged);
}

TEST_CASE("classifier ratio") {
  SUBCASE("identical distributions give ratios near one") {
    ToyConfig a;
    a.n_behavior = 4000;
    a.seed = 41;
    ToyConfig e = a;
    e.n_behavior = 1000;
    e.seed = 42;
    std::vector<Trajectory> t;
    const auto drawn = sample_behavior(e);
    for (const auto& item : drawn.items()) t.push_back(item.prefix);
    const auto b = sample_behavior(a);
    const auto m = fit_classifier_ratio(b, TargetDataset(t), toy_linear_features());
    for (std::size_t i = 0; i < b.size(); i += 50) CHECK(std::abs(m.ratio(b[i].prefix) - 1.0) < 0.1);
  }
  SUBCASE("one-bin problem: the prior factor reproduces the frequency ratio") {
    const FeatureMap constant{"constant", 1, 1, [](const Trajectory&, std::span<double> out) { out[0] = 0.0; }};
    const auto b = behavior_counts({300, 0, 0, 0});
    const auto e = target_counts({40, 0, 0, 0});
    const auto c = fit_classifier_ratio(b, e, constant);
    const auto h = fit_histogram_ratio(b, e, kGrid);
    CHECK(c.ratio(in_bin(0, 0)) == doctest::Approx(h.ratio(in_bin(0, 0))).epsilon(1e-6));
  }
  SUBCASE("separable classes saturate") {
    std::vector<LabeledTrajectory> b;
    std::vector<Trajectory> e;
    for (int i = 0; i < 200; ++i) {
      b.push_back({toy_prefix(-1.0 - 0.01 * i, 0.0), 0.0});
      e.push_back(toy_prefix(1.0 + 0.01 * i, 0.0));
    }
    RatioOptions o;
    o.clip_max = 20.0;
    ClassifierOptions weak;
    weak.l2 = 0.0;
    weak.max_iterations = 200000;
    weak.tolerance = 1e-3;
    const auto m = fit_classifier_ratio(BehaviorDataset(b), TargetDataset(e), toy_linear_features(), o, weak);
    CHECK(m.ratio(toy_prefix(3.0, 0.0)) == 20.0);
    CHECK(m.ratio(toy_prefix(-3.0, 0.0)) < 0.05);
  }
  SUBCASE("iteration cap reports the gradient norm") {
    ToyConfig c;
    c.seed = 3;
    ClassifierOptions tight;
    tight.max_iterations = 2;
    try {
      (void)fit_classifier_ratio(sample_behavior(c), sample_target(c).data, toy_linear_features(), {}, tight);
      FAIL("expected non-convergence");
    } catch (const ConvergenceError& e) {
      CHECK(e.final_gradient_norm() > 0.0);
    }
  }
  SUBCASE("corruption needs count cells") {
    ToyConfig c;
    c.seed = 3;
    const auto m = fit_classifier_ratio(sample_behavior(c), sample_target(c).data, toy_linear_features());
    CHECK_THROWS_AS(corrupt_density_denominator(m, 1), InvalidArgument);
  }
}

TEST_CASE("every ratio lies in [0, clip_max]") {
  ToyConfig c;
  c.seed = 50;
  const auto b = sample_behavior(c);
  const auto e = sample_target(c).data;
  RatioConfig cfg;
  cfg.options = lenient();
  cfg.corrupt_denominator = true;
  const auto m = fit_ratio(cfg, b, e, 3);
  for (const auto& item : b.items()) {
    const double r = m.ratio(item.prefix);
    REQUIRE(r >= 0.0);
    REQUIRE(r <= 100.0);
  }
}
