#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "shortlong/data_model.hpp"
#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"

using namespace shortlong;

namespace {

Trajectory chain(int h) {
  std::vector<double> states;
  std::vector<double> rewards;
  std::vector<int> actions;
  for (int t = 0; t <= h; ++t) states.push_back(t);
  for (int t = 0; t < h; ++t) {
    rewards.push_back(0.5 * t);
    actions.push_back(t % 3);
  }
  return Trajectory(1, states, rewards, actions);
}

std::vector<std::size_t> fold_sizes(const std::vector<int>& fold_of, int k) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (const int f : fold_of) {
    REQUIRE(f >= 0);
    REQUIRE(f < k);
    ++sizes[static_cast<std::size_t>(f)];
  }
  return sizes;
}

}  // namespace

TEST_CASE("trajectory shape checks") {
  CHECK_NOTHROW(Trajectory(1, {0.0, 1.0}, {}));
  CHECK_THROWS_AS(Trajectory(1, {0.0, 1.0}, {1.0, 2.0}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory(2, {0.0, 1.0, 2.0}, {}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory(1, {}, {}), InvalidArgument);
  CHECK_THROWS_AS(Trajectory(1, {0.0, 1.0}, {}, {}, std::nullopt, 3), InvalidArgument);
  const Trajectory two_d(2, {1, 2, 3, 4}, {7});
  CHECK(two_d.horizon() == 1);
  CHECK(two_d.state(1)[1] == 4);
  CHECK_THROWS_AS(two_d.state(2), InvalidArgument);
}

TEST_CASE("datasets reject empty input and non-finite returns") {
  CHECK_THROWS_AS(BehaviorDataset({}), InsufficientData);
  CHECK_THROWS_AS(TargetDataset({}), InsufficientData);
  CHECK_THROWS_AS(BehaviorDataset({{chain(1), NAN}}), InvalidArgument);
  const BehaviorDataset d({{chain(1), 1.0}, {chain(1), 2.0}, {chain(2), 3.0}});
  const std::vector<std::size_t> pick{2, 0};
  const auto sub = d.subset(pick);
  CHECK(sub.size() == 2);
  CHECK(sub[0].full_return == 3.0);
  CHECK(sub[1].full_return == 1.0);
}

TEST_CASE("fold plans") {
  SUBCASE("four items, two folds") {
    const auto plan = make_fold_plan(4, 4, 2, 0);
    CHECK(fold_sizes(plan.behavior_fold_of, 2) == std::vector<std::size_t>{2, 2});
    CHECK(fold_sizes(plan.target_fold_of, 2) == std::vector<std::size_t>{2, 2});
  }
  SUBCASE("remainder goes to the first folds") {
    const auto plan = make_fold_plan(5, 5, 2, 0);
    auto sizes = fold_sizes(plan.behavior_fold_of, 2);
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{2, 3});
  }
  SUBCASE("too little data") {
    CHECK_THROWS_AS(make_fold_plan(1, 1, 2, 0), InsufficientData);
    CHECK_THROWS_AS(make_fold_plan(10, 10, 1, 0), InvalidArgument);
  }
  SUBCASE("deterministic and seed dependent") {
    CHECK(make_fold_plan(50, 20, 3, 9).behavior_fold_of == make_fold_plan(50, 20, 3, 9).behavior_fold_of);
    CHECK(make_fold_plan(50, 20, 3, 9).behavior_fold_of != make_fold_plan(50, 20, 3, 10).behavior_fold_of);
  }
}

TEST_CASE("fold partition is exhaustive, disjoint and balanced") {
  for (const int k : {2, 3, 5}) {
    for (std::size_t n = static_cast<std::size_t>(k); n <= 100; n += 7) {
      const std::size_t m = std::max<std::size_t>(static_cast<std::size_t>(k), n / 2);
      const auto plan = make_fold_plan(n, m, k, n * 31 + static_cast<std::size_t>(k));
      const auto sizes = fold_sizes(plan.behavior_fold_of, k);
      CHECK(*std::max_element(sizes.begin(), sizes.end()) -
                *std::min_element(sizes.begin(), sizes.end()) <=
            1);
      std::set<std::size_t> seen;
      for (int f = 0; f < k; ++f) {
        const auto in = plan.behavior_in(f);
        const auto out = plan.behavior_not_in(f);
        CHECK(in.size() + out.size() == n);
        for (const auto i : in) CHECK(seen.insert(i).second);
      }
      CHECK(seen.size() == n);
      const auto tsizes = fold_sizes(plan.target_fold_of, k);
      CHECK(*std::max_element(tsizes.begin(), tsizes.end()) -
                *std::min_element(tsizes.begin(), tsizes.end()) <=
            1);
    }
  }
}

TEST_CASE("truncate") {
  const Trajectory full = chain(20);
  const LabeledTrajectory labeled{full, 4.25};

  const auto two = truncate(labeled, 2);
  CHECK(two.prefix.horizon() == 2);
  CHECK(two.prefix.states().size() == 3);
  CHECK(two.prefix.rewards().size() == 2);
  CHECK(two.full_return == 4.25);
  CHECK(two.prefix.next_action() == 2);

  CHECK(truncate(labeled, 20).prefix == full);
  const auto zero = truncate(labeled, 0);
  CHECK(zero.prefix.states().size() == 1);
  CHECK(zero.prefix.rewards().empty());

  CHECK(truncate(two, 2) == two);
  CHECK_THROWS_AS(truncate(labeled, 21), InvalidArgument);
  CHECK_THROWS_AS(truncate(labeled, -1), InvalidArgument);

  const Trajectory absorbed(1, {0, 1, 2, 2}, {0, 1, 0}, {}, std::nullopt, 2);
  CHECK(truncate(absorbed, 2).absorbed_at() == 2);
  CHECK_FALSE(truncate(absorbed, 1).absorbed_at().has_value());
}

TEST_CASE("discounted return") {
  CHECK(discounted_return(std::vector<double>{1, 1}, 1.0) == 2.0);
  std::vector<double> late(20, 0.0);
  late.back() = 1.0;
  CHECK(discounted_return(late, 0.99) == doctest::Approx(0.8261686238355867).epsilon(1e-14));
  CHECK(discounted_return(std::vector<double>{}, 0.5) == 0.0);
  const std::vector<double> r{0.3, -1.2, 4.0, 2.5};
  CHECK(discounted_return(r, 1.0) == doctest::Approx(0.3 - 1.2 + 4.0 + 2.5));
}

TEST_CASE("horizon config") {
  CHECK_NOTHROW((HorizonConfig{2, 20, 0.99}.validate()));
  CHECK_THROWS_AS((HorizonConfig{0, 20, 0.99}.validate()), InvalidArgument);
  CHECK_THROWS_AS((HorizonConfig{3, 2, 0.99}.validate()), InvalidArgument);
  CHECK_THROWS_AS((HorizonConfig{1, 2, 0.0}.validate()), InvalidArgument);
}

TEST_CASE("seed derivation is stable and order sensitive") {
  CHECK(derive_seed({1, 2}) == derive_seed({1, 2}));
  CHECK(derive_seed({1, 2}) != derive_seed({2, 1}));
  CHECK(stream_id("a") != stream_id("b"));
  auto a = make_stream(5, "x");
  auto b = make_stream(5, "x");
  CHECK(a() == b());
}
