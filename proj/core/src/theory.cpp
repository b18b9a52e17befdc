#include "shortlong/theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <random>
#include <string>

#include "shortlong/errors.hpp"
#include "shortlong/rng.hpp"
#include "shortlong/synthetic.hpp"

namespace shortlong {

void BoundInputs::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (k < 1) throw InvalidArgument("bound needs k >= 1");
  if (!(n > 0.0) || !(m > 0.0)) throw InvalidArgument("bound needs positive dataset sizes");
  if (eps_b.size() != eps_h.size()) throw InvalidArgument("eps_b and eps_h need one entry per fold");
  const auto nonneg = [](double x) { return x >= 0.0 && std::isfinite(x); };
  for (const double x : {var_target, second_moment_b, horizon, c1, c2}) {
    if (!nonneg(x)) throw InvalidArgument("bound inputs must be finite and nonnegative");
  }
  for (const auto* v : {&eps_e, &eps_b, &eps_h}) {
    if (!std::all_of(v->begin(), v->end(), nonneg)) {
      throw InvalidArgument("nuisance errors must be finite and nonnegative");
    }
  }
}

BoundBreakdown evaluate_bound(const BoundInputs& in) {
  in.validate();
  const double kk = static_cast<double>(in.k);
  const double log_term = std::log(4.0 * kk / in.delta);
  const auto max_of = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  };
  double cross = 0.0;
  double worst_b = 0.0;
  for (std::size_t j = 0; j < in.eps_b.size(); ++j) {
    cross += in.eps_b[j] * in.eps_h[j];
    worst_b = std::max(worst_b, in.eps_b[j] + in.eps_h[j]);
  }
  BoundBreakdown out;
  out.terms[0] = std::sqrt(2.0 * in.var_target * log_term / in.m);
  out.terms[1] = std::sqrt(2.0 * in.second_moment_b * log_term / in.n);
  out.terms[2] = cross / kk;
  out.terms[3] = 2.0 * in.horizon * kk * log_term / in.m;
  out.terms[4] = max_of(in.eps_e) * std::sqrt(2.0 * kk * log_term / in.m);
  out.terms[5] = 4.0 * in.c1 * in.c2 * in.horizon * kk * log_term / in.n;
  out.terms[6] = 3.0 * in.c1 * in.horizon * worst_b * std::sqrt(2.0 * kk * log_term / in.n);
  for (const double t : out.terms) out.total += t;
  return out;
}

double product_bias(std::span<const double> target_probs,
                    const std::vector<std::vector<double>>& delta_f,
                    const std::vector<std::vector<double>>& ratio_rel) {
  if (delta_f.empty() || delta_f.size() != ratio_rel.size()) {
    throw InvalidArgument("product bias needs matching per-fold nuisance tables");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < delta_f.size(); ++k) {
    if (delta_f[k].size() != target_probs.size() || ratio_rel[k].size() != target_probs.size()) {
      throw InvalidArgument("nuisance table length differs from the target distribution");
    }
    for (std::size_t s = 0; s < target_probs.size(); ++s) {
      total += target_probs[s] * delta_f[k][s] * (1.0 - ratio_rel[k][s]);
    }
  }
  return total / static_cast<double>(delta_f.size());
}

double product_bias_sampled(std::span<const Trajectory> target_samples,
                            const std::vector<PrefixFunction>& delta_f,
                            const std::vector<PrefixFunction>& ratio_rel) {
  if (delta_f.empty() || delta_f.size() != ratio_rel.size() || target_samples.empty()) {
    throw InvalidArgument("product bias needs samples and matching per-fold nuisances");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < delta_f.size(); ++k) {
    double fold = 0.0;
    for (const auto& tr : target_samples) fold += delta_f[k](tr) * (1.0 - ratio_rel[k](tr));
    total += fold / static_cast<double>(target_samples.size());
  }
  return total / static_cast<double>(delta_f.size());
}

std::vector<double> relative_ratio(std::span<const double> target_probs,
                                   std::span<const double> estimated_ratio,
                                   std::span<const double> true_ratio) {
  if (target_probs.size() != estimated_ratio.size() || target_probs.size() != true_ratio.size()) {
    throw InvalidArgument("ratio tables differ in length");
  }
  std::vector<double> out(target_probs.size(), 1.0);
  for (std::size_t s = 0; s < target_probs.size(); ++s) {
    if (target_probs[s] <= 0.0) continue;
    if (!(true_ratio[s] > 0.0)) {
      throw CoverageError("true density ratio is zero at state " + std::to_string(s) +
                          " which the target policy visits");
    }
    out[s] = estimated_ratio[s] / true_ratio[s];
  }
  return out;
}

namespace {

struct OracleDraw {
  double s0;
  double s1;
  double f;
  double g;
};

// Draws from the same mixtures the toy generator realizes on a fixed grid.
std::vector<OracleDraw> oracle_draws(bool target, std::size_t grid_size, std::size_t count,
                                     double sigma, double omega, Rng& rng) {
  const auto grid = toy_grid(grid_size);
  std::uniform_int_distribution<std::size_t> pick(0, grid_size - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<OracleDraw> out(count);
  for (auto& d : out) {
    d.s0 = grid[pick(rng)] + sigma * z(rng);
    double mean;
    if (target) {
      mean = toy_target_mean_next(d.s0);
    } else {
      const double b = unit(rng);
      const ToyBranch branch = b < 0.5 ? ToyBranch::kStay : b < 0.95 ? ToyBranch::kScale : ToyBranch::kJump;
      mean = toy_behavior_mean_next(d.s0, branch, unit(rng));
    }
    d.s1 = mean + sigma * z(rng);
    d.f = toy_true_return(d.s0, d.s1);
    d.g = d.f + omega * z(rng);
  }
  return out;
}

}  // namespace

CoverageReport empirical_bound_coverage(const CoverageSettings& cfg) {
  if (cfg.n_seeds < 1) throw InvalidArgument("coverage run needs at least one seed");
  if (cfg.oracle_samples < 2) throw InvalidArgument("coverage run needs oracle samples");
  constexpr double kSigma = 0.1;
  const ToyDensityOracle oracle(cfg.n_behavior, cfg.n_target, kSigma);
  const double truth = oracle.target_value();
  const auto f_true = [](const Trajectory& tr) {
    return toy_true_return(tr.scalar_state(0), tr.scalar_state(1));
  };
  const auto h_true = [&oracle](const Trajectory& tr) { return oracle.ratio(tr); };

  RegressorConfig regressor;
  regressor.features = toy_quadratic_features();
  regressor.options.intercept = false;
  RatioConfig ratio;
  ratio.options.strict_coverage = false;

  CoverageReport report;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < cfg.n_seeds; ++i) {
    const std::uint64_t seed = derive_seed({cfg.base_seed, i, stream_id("theory/coverage")});
    ToyConfig toy;
    toy.n_behavior = cfg.n_behavior;
    toy.n_target = cfg.n_target;
    toy.noise_omega = cfg.omega;
    toy.state_noise_sigma = kSigma;
    toy.seed = seed;
    const auto behavior = sample_behavior(toy);
    const auto target = sample_target(toy).data;

    std::vector<PrefixFunction> f_hat(static_cast<std::size_t>(cfg.k));
    std::vector<PrefixFunction> h_hat(static_cast<std::size_t>(cfg.k));
    const NuisanceFitter fit = [&](const BehaviorDataset& b, const TargetDataset& e, int fold) {
      FoldNuisances nu;
      if (cfg.nuisances == ToyNuisances::kOracle) {
        nu = FoldNuisances{f_true, h_true};
      } else {
        auto model = std::make_shared<const Regressor>(fit_regressor(regressor, b));
        auto ratio_model = std::make_shared<const DensityRatioModel>(fit_ratio(ratio, b, e));
        nu = FoldNuisances{[model](const Trajectory& tr) { return predict(*model, tr); },
                           [ratio_model](const Trajectory& tr) { return ratio_model->ratio(tr); }};
      }
      f_hat[static_cast<std::size_t>(fold)] = nu.f;
      h_hat[static_cast<std::size_t>(fold)] = nu.h;
      return nu;
    };
    const auto plan = make_fold_plan(behavior.size(), target.size(), cfg.k, seed);
    const auto est = estimate_dr(behavior, target, plan, fit);

    Rng rng = make_stream(seed, "theory/oracle-draws");
    const auto draws_b =
        oracle_draws(false, cfg.n_behavior, cfg.oracle_samples, kSigma, cfg.omega, rng);
    const auto draws_e =
        oracle_draws(true, cfg.n_target, cfg.oracle_samples, kSigma, cfg.omega, rng);

    BoundInputs in;
    in.n = static_cast<double>(behavior.size());
    in.m = static_cast<double>(target.size());
    in.k = cfg.k;
    in.delta = cfg.delta;
    in.horizon = 1.0;

    double mean_f = 0.0;
    for (const auto& d : draws_e) mean_f += d.f;
    mean_f /= static_cast<double>(draws_e.size());
    double var_f = 0.0;
    for (const auto& d : draws_e) var_f += (d.f - mean_f) * (d.f - mean_f);
    in.var_target = var_f / static_cast<double>(draws_e.size());
    double moment = 0.0;
    std::vector<double> h_b(draws_b.size());
    for (std::size_t j = 0; j < draws_b.size(); ++j) {
      h_b[j] = oracle.ratio(draws_b[j].s0, draws_b[j].s1);
      const double resid = draws_b[j].g - draws_b[j].f;
      moment += h_b[j] * h_b[j] * resid * resid;
    }
    in.second_moment_b = moment / static_cast<double>(draws_b.size());

    double c1 = 0.0;
    double c2 = 0.0;
    for (const auto& item : behavior.items()) {
      c1 = std::max({c1, std::abs(item.full_return), std::abs(f_true(item.prefix))});
      c2 = std::max(c2, h_true(item.prefix));
    }
    for (const auto& tr : target.items()) c1 = std::max(c1, std::abs(f_true(tr)));
    for (int k = 0; k < cfg.k; ++k) {
      const auto& fk = f_hat[static_cast<std::size_t>(k)];
      const auto& hk = h_hat[static_cast<std::size_t>(k)];
      double se_e = 0.0;
      for (const auto& d : draws_e) {
        const double diff = fk(toy_prefix(d.s0, d.s1)) - d.f;
        se_e += diff * diff;
      }
      double se_b = 0.0;
      double se_h = 0.0;
      for (std::size_t j = 0; j < draws_b.size(); ++j) {
        const auto tr = toy_prefix(draws_b[j].s0, draws_b[j].s1);
        const double df = fk(tr) - draws_b[j].f;
        const double dh = hk(tr) - h_b[j];
        se_b += df * df;
        se_h += dh * dh;
      }
      in.eps_e.push_back(std::sqrt(se_e / static_cast<double>(draws_e.size())));
      in.eps_b.push_back(std::sqrt(se_b / static_cast<double>(draws_b.size())));
      in.eps_h.push_back(std::sqrt(se_h / static_cast<double>(draws_b.size())));
      for (const auto& item : behavior.items()) {
        c1 = std::max(c1, std::abs(fk(item.prefix)));
        c2 = std::max(c2, hk(item.prefix));
      }
      for (const auto& tr : target.items()) c1 = std::max(c1, std::abs(fk(tr)));
    }
    in.c1 = 1.1 * c1;
    in.c2 = 1.1 * c2;

    CoverageRow row;
    row.seed = seed;
    row.bound = evaluate_bound(in);
    row.estimate = est.value;
    row.truth = truth;
    row.empirical_error = std::abs(est.value - truth);
    row.covered = row.empirical_error <= row.bound.total;
    covered += row.covered ? 1 : 0;
    report.rows.push_back(row);
  }
  report.coverage = static_cast<double>(covered) / static_cast<double>(cfg.n_seeds);
  return report;
}

void write_coverage_csv(std::ostream& out, const CoverageReport& report) {
  out.precision(12);
  out << "term_1,term_2,term_3,term_4,term_5,term_6,term_7,total,empirical_error,covered\n";
  for (const auto& row : report.rows) {
    for (const double t : row.bound.terms) out << t << ',';
    out << row.bound.total << ',' << row.empirical_error << ',' << (row.covered ? 1 : 0) << '\n';
  }
}

}  // namespace shortlong
