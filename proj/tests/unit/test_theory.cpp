#include <doctest.h>

#include <cmath>
#include <random>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"
#include "shortlong/synthetic.hpp"
#include "shortlong/theory.hpp"

using namespace shortlong;

namespace {

BoundInputs base() {
  BoundInputs in;
  in.var_target = 0.5;
  in.second_moment_b = 2.0;
  in.eps_e = {0.1, 0.3};
  in.eps_b = {0.2, 0.1};
  in.eps_h = {0.5, 0.4};
  in.n = 5000;
  in.m = 100;
  in.k = 2;
  in.delta = 0.05;
  in.horizon = 1.0;
  in.c1 = 2.0;
  in.c2 = 30.0;
  return in;
}

}  // namespace

TEST_CASE("bound with exact nuisances keeps only the variance-free terms") {
  BoundInputs in;
  in.var_target = 1.0;
  in.eps_e = {0, 0};
  in.eps_b = {0, 0};
  in.eps_h = {0, 0};
  in.n = 5000;
  in.m = 100;
  in.c1 = 1.0;
  in.c2 = 1.0;
  const auto b = evaluate_bound(in);
  CHECK(b.terms[0] == doctest::Approx(std::sqrt(2.0 * std::log(160.0) / 100.0)));
  CHECK(b.terms[0] == doctest::Approx(0.3186).epsilon(1e-3));
  CHECK(b.terms[1] == 0.0);
  CHECK(b.terms[2] == 0.0);
  CHECK(b.terms[3] > 0.0);
  CHECK(b.terms[4] == 0.0);
  CHECK(b.terms[5] > 0.0);
  CHECK(b.terms[6] == 0.0);
}

TEST_CASE("bound arithmetic") {
  const auto in = base();
  const auto b = evaluate_bound(in);
  const double L = std::log(4.0 * 2 / 0.05);
  const double expect[7] = {std::sqrt(2 * 0.5 * L / 100),
                            std::sqrt(2 * 2.0 * L / 5000),
                            (0.2 * 0.5 + 0.1 * 0.4) / 2,
                            2 * 1.0 * 2 * L / 100,
                            0.3 * std::sqrt(2 * 2 * L / 100),
                            4 * 2.0 * 30.0 * 1.0 * 2 * L / 5000,
                            3 * 2.0 * 1.0 * 0.7 * std::sqrt(2 * 2 * L / 5000)};
  double total = 0.0;
  for (int i = 0; i < 7; ++i) {
    CHECK(std::abs(b.terms[i] - expect[i]) < 1e-12);
    total += expect[i];
  }
  CHECK(std::abs(b.total - total) < 1e-12);

  auto doubled = in;
  doubled.m *= 2;
  const auto d = evaluate_bound(doubled);
  CHECK(d.terms[0] == doctest::Approx(b.terms[0] / std::sqrt(2.0)));
  CHECK(d.terms[3] == doctest::Approx(b.terms[3] / 2.0));
  CHECK(d.terms[1] == b.terms[1]);
}

TEST_CASE("bound input validation") {
  for (const double delta : {0.0, 1.0, -0.1, 1.5}) {
    auto in = base();
    in.delta = delta;
    CHECK_THROWS_AS(evaluate_bound(in), InvalidArgument);
  }
  auto neg = base();
  neg.eps_h[0] = -1.0;
  CHECK_THROWS_AS(evaluate_bound(neg), InvalidArgument);
  auto ragged = base();
  ragged.eps_h.pop_back();
  CHECK_THROWS_AS(evaluate_bound(ragged), InvalidArgument);
}

TEST_CASE("product bias") {
  const std::vector<double> p{0.5, 0.5};
  CHECK(product_bias(p, {{1.0, 2.0}}, {{0.5, 2.0}}) == doctest::Approx(-0.75));
  CHECK(product_bias(p, {{0.0, 0.0}}, {{0.5, 2.0}}) == 0.0);
  CHECK(product_bias(p, {{1.0, 2.0}}, {{1.0, 1.0}}) == 0.0);
  // folds are averaged
  CHECK(product_bias(p, {{1.0, 2.0}, {0.0, 0.0}}, {{0.5, 2.0}, {3.0, 3.0}}) == doctest::Approx(-0.375));
  CHECK_THROWS_AS(product_bias(p, {{1.0}}, {{1.0, 1.0}}), InvalidArgument);
}

TEST_CASE("sampled product bias approaches the enumerated one") {
  const std::vector<double> p{0.2, 0.3, 0.5};
  const std::vector<double> df{1.0, -2.0, 0.5};
  const std::vector<double> rel{0.5, 1.5, 0.8};
  const double exact = product_bias(p, {df}, {rel});
  Rng rng(11);
  std::discrete_distribution<int> pick(p.begin(), p.end());
  std::vector<Trajectory> samples;
  for (int i = 0; i < 200000; ++i) samples.push_back(Trajectory(1, {static_cast<double>(pick(rng))}, {}));
  const PrefixFunction f = [&](const Trajectory& t) { return df[static_cast<std::size_t>(t.scalar_state(0))]; };
  const PrefixFunction r = [&](const Trajectory& t) { return rel[static_cast<std::size_t>(t.scalar_state(0))]; };
  CHECK(product_bias_sampled(samples, {f}, {r}) == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("relative ratio") {
  const std::vector<double> p{0.5, 0.5, 0.0};
  const auto rel = relative_ratio(p, std::vector<double>{2.0, 1.0, 7.0}, std::vector<double>{1.0, 2.0, 0.0});
  CHECK(rel == std::vector<double>{2.0, 0.5, 1.0});
  try {
    (void)relative_ratio(p, std::vector<double>{2.0, 1.0, 0.0}, std::vector<double>{1.0, 0.0, 0.0});
    FAIL("expected a coverage error");
  } catch (const CoverageError& e) {
    CHECK(std::string(e.what()).find("state 1") != std::string::npos);
  }
}

TEST_CASE("bound coverage is monotone in delta") {
  CoverageSettings s;
  s.n_seeds = 12;
  s.oracle_samples = 20000;
  s.base_seed = 4;
  s.delta = 0.5;
  const auto loose = empirical_bound_coverage(s);
  s.delta = 0.05;
  const auto tight = empirical_bound_coverage(s);
  REQUIRE(loose.rows.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(tight.rows[i].bound.total >= loose.rows[i].bound.total);
    CHECK(tight.rows[i].estimate == loose.rows[i].estimate);
  }
  CHECK(tight.coverage >= loose.coverage);
  std::ostringstream csv;
  write_coverage_csv(csv, tight);
  CHECK(csv.str().rfind("term_1,term_2,term_3,term_4,term_5,term_6,term_7,total,empirical_error,covered\n", 0) == 0);
}

TEST_CASE("oracle nuisances give an error inside the bound") {
  CoverageSettings s;
  s.n_seeds = 10;
  s.oracle_samples = 20000;
  s.nuisances = ToyNuisances::kOracle;
  const auto r = empirical_bound_coverage(s);
  for (const auto& row : r.rows) {
    CHECK(row.bound.terms[2] == 0.0);
    CHECK(row.truth == doctest::Approx(ToyDensityOracle(5000, 100, 0.1).target_value()));
  }
}
