// shortlong: run benchmark tables, generate data, estimate values and test
// differences from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shortlong/data_model.hpp"
#include "shortlong/dataset_io.hpp"
#include "shortlong/density_ratio.hpp"
#include "shortlong/errors.hpp"
#include "shortlong/estimators.hpp"
#include "shortlong/experiment.hpp"
#include "shortlong/regression.hpp"
#include "shortlong/sepsis.hpp"
#include "shortlong/stats.hpp"
#include "shortlong/synthetic.hpp"
#include "shortlong/theory.hpp"

namespace sl = shortlong;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sl::InvalidArgument("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw sl::InvalidArgument("cannot write '" + path + "'");
  return out;
}

struct BenchArgs {
  std::string config;
  std::map<std::string, std::string> flags;
};

// Flags are forwarded under the config file's key names so both routes share
// one parser.
void add_override(CLI::App* cmd, BenchArgs& args, const std::string& flag, const std::string& key,
                  const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&args, key](const std::string& v) { args.flags[key] = v; }, help);
}

int run_bench(const BenchArgs& args) {
  sl::Settings settings;
  if (!args.config.empty()) {
    auto in = open_in(args.config);
    settings = sl::parse_settings(in);
  }
  for (const auto& [key, value] : args.flags) settings[key] = value;
  const auto config = sl::make_config(settings);
  const auto report = sl::run_experiment(config);
  if (!config.output.empty()) sl::write_report(report, config.output);
  std::cout << sl::emit_table(report, sl::TableFormat::kMarkdown);
  for (const auto& [key, value] : report.metadata) std::cout << "- " << key << ": " << value << '\n';
  std::fprintf(stderr, "wall clock: %.2f s\n", report.wall_clock_seconds);
  return 0;
}

struct CompareArgs {
  std::string behavior;
  std::string estimates;
  std::string behavior_column;
  std::string estimates_column;
  bool paired = false;
  bool independent = false;
  bool welch = false;
  std::string sides = "two-sided";
  double alpha = 0.05;
};

sl::Sidedness parse_sides(const std::string& s) {
  if (s == "two-sided") return sl::Sidedness::kTwoSided;
  if (s == "less") return sl::Sidedness::kLess;
  if (s == "greater") return sl::Sidedness::kGreater;
  throw sl::InvalidArgument("--sides must be two-sided, less or greater");
}

int run_compare(const CompareArgs& args) {
  if (args.paired == args.independent) {
    throw sl::InvalidArgument("pass exactly one of --paired or --independent");
  }
  auto bin = open_in(args.behavior);
  auto ein = open_in(args.estimates);
  const auto y = sl::read_csv_column(bin, args.behavior_column);
  const auto x = sl::read_csv_column(ein, args.estimates_column);
  const auto sides = parse_sides(args.sides);
  const auto result = args.paired ? sl::t_test_paired(x, y, sides)
                                  : sl::t_test_independent(x, y, {args.welch, sides});
  std::printf("test: %s\n", args.paired ? "paired" : (args.welch ? "independent (welch)" : "independent"));
  std::printf("n_estimates: %zu\nn_behavior: %zu\n", x.size(), y.size());
  std::printf("t: %.6g\ndf: %.6g\np: %.6g\n", result.t_statistic, result.degrees_of_freedom,
              result.p_value);
  std::printf("%s at alpha=%g\n", result.p_value < args.alpha ? "reject" : "retain", args.alpha);
  return 0;
}

struct GenerateArgs {
  std::size_t n = 5000;
  std::size_t m = 100;
  double omega = 1.0;
  std::uint64_t seed = 0;
  std::string behavior_out = "behavior.csv";
  std::string target_out = "target.csv";
  std::string truth_out;
};

int run_generate(const GenerateArgs& args) {
  sl::ToyConfig config;
  config.n_behavior = args.n;
  config.n_target = args.m;
  config.noise_omega = args.omega;
  config.seed = args.seed;
  const auto behavior = sl::sample_behavior(config);
  const auto target = sl::sample_target(config);
  {
    auto out = open_out(args.behavior_out);
    sl::write_behavior_csv(out, behavior);
  }
  {
    auto out = open_out(args.target_out);
    sl::write_target_csv(out, target.data);
  }
  if (!args.truth_out.empty()) {
    auto out = open_out(args.truth_out);
    out.precision(17);
    out << "traj_id,true_return,observed_return\n";
    for (std::size_t i = 0; i < target.true_returns.size(); ++i) {
      out << i << ',' << target.true_returns[i] << ',' << target.observed_returns[i] << '\n';
    }
  }
  std::printf("wrote %zu behavior and %zu target trajectories\n", behavior.size(), target.data.size());
  return 0;
}

struct ExportArgs {
  std::uint64_t seed = 0;
  std::string out = "sepsis_spec.txt";
  double eps_b = 0.15;
  double eps_e = 0.15;
};

int run_export(const ExportArgs& args) {
  const auto spec = sl::build_default_spec(args.seed);
  {
    auto out = open_out(args.out);
    sl::export_spec(out, spec);
  }
  const auto pb = sl::soften(sl::policy_iteration(spec, spec.behavior_actions), args.eps_b);
  const auto pe = sl::soften(sl::policy_iteration(spec, spec.target_actions), args.eps_e);
  std::printf("states: %d\nV(pi_b): %.6f\nV(pi_e): %.6f\n", spec.n_states,
              sl::exact_policy_value(spec, pb), sl::exact_policy_value(spec, pe));
  return 0;
}

struct BoundArgs {
  std::size_t seeds = 200;
  double delta = 0.05;
  std::size_t n = 5000;
  std::size_t m = 100;
  double omega = 1.0;
  int k = 2;
  std::uint64_t seed = 0;
  bool oracle = false;
  std::size_t oracle_samples = 100000;
  std::string out;
};

int run_bound(const BoundArgs& args) {
  sl::CoverageSettings settings;
  settings.n_seeds = args.seeds;
  settings.delta = args.delta;
  settings.n_behavior = args.n;
  settings.n_target = args.m;
  settings.omega = args.omega;
  settings.k = args.k;
  settings.base_seed = args.seed;
  settings.nuisances = args.oracle ? sl::ToyNuisances::kOracle : sl::ToyNuisances::kFitted;
  settings.oracle_samples = args.oracle_samples;
  const auto report = sl::empirical_bound_coverage(settings);
  if (!args.out.empty()) {
    auto out = open_out(args.out);
    sl::write_coverage_csv(out, report);
  }
  double mean_total = 0.0;
  for (const auto& row : report.rows) mean_total += row.bound.total;
  mean_total /= static_cast<double>(report.rows.size());
  std::printf("seeds: %zu\ndelta: %g\ncoverage: %.4f\nmean bound: %.6g\n", report.rows.size(),
              args.delta, report.coverage, mean_total);
  return 0;
}

struct EstimateArgs {
  std::string behavior;
  std::string target;
  std::string estimator = "dr-soft";
  std::string features = "quadratic";
  bool intercept = false;
  bool corrupt = false;
  int k = 2;
  std::uint64_t seed = 0;
  double clip = 100.0;
};

int run_estimate(const EstimateArgs& args) {
  auto bin = open_in(args.behavior);
  auto tin = open_in(args.target);
  const auto behavior = sl::read_dataset_csv(bin).behavior();
  const auto target = sl::read_dataset_csv(tin).target();

  sl::RegressorConfig regressor;
  if (args.features == "quadratic") {
    regressor.features = sl::toy_quadratic_features();
  } else if (args.features == "linear") {
    regressor.features = sl::toy_linear_features();
  } else {
    throw sl::InvalidArgument("--features must be quadratic or linear");
  }
  regressor.options.intercept = args.intercept;
  sl::RatioConfig ratio;
  ratio.options.clip_max = args.clip;
  ratio.options.strict_coverage = false;
  ratio.corrupt_denominator = args.corrupt;

  sl::ValueEstimate est;
  if (args.estimator == "soft") {
    est = sl::estimate_soft(behavior, target, regressor);
  } else if (args.estimator == "w-soft") {
    est = sl::estimate_w_soft(behavior, target, regressor, ratio, args.seed);
  } else if (args.estimator == "dr-soft" || args.estimator == "dr-w-soft") {
    sl::DrOptions options;
    options.k = args.k;
    options.seed = args.seed;
    options.weighted = args.estimator == "dr-w-soft";
    est = sl::estimate_dr(behavior, target, regressor, ratio, options);
  } else {
    throw sl::InvalidArgument("estimate supports soft, w-soft, dr-soft and dr-w-soft on dataset files");
  }
  std::printf("estimator: %s\nvalue: %.10g\n", est.estimator_id.c_str(), est.value);
  for (std::size_t k = 0; k < est.per_fold_values.size(); ++k) {
    std::printf("fold_%zu: %.10g\n", k, est.per_fold_values[k]);
  }
  for (const auto& [name, value] : est.diagnostics) std::printf("%s: %.6g\n", name.c_str(), value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-horizon policy evaluation from short-horizon target data"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "Benchmark tables");
  bench->require_subcommand(1);
  BenchArgs bench_args;
  auto* run = bench->add_subcommand("run", "Run an experiment and write rows/summary files");
  run->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  run->add_option("--config", bench_args.config, "Flat key = value config file");
  add_override(run, bench_args, "--env", "env", "toy or sepsis");
  add_override(run, bench_args, "--scenario", "scenario",
               "realizable, regressor_misspecified, ratio_misspecified, noise_sweep, data_size_sweep");
  add_override(run, bench_args, "--omega", "omega", "Return noise (toy)");
  add_override(run, bench_args, "--omegas", "omegas", "Comma list for noise_sweep");
  add_override(run, bench_args, "--sizes", "sizes", "Comma list of N for data_size_sweep");
  add_override(run, bench_args, "--ntrain,--nbehavior", "nbehavior", "Behavior trajectories N");
  add_override(run, bench_args, "--ntarget", "ntarget", "Target trajectories M");
  add_override(run, bench_args, "--h", "h", "Short horizon");
  add_override(run, bench_args, "--k", "k", "Cross-fitting folds");
  add_override(run, bench_args, "--seeds", "seeds", "Number of seeds");
  add_override(run, bench_args, "--base-seed", "base_seed", "Base seed");
  add_override(run, bench_args, "--estimators", "estimators", "Comma list of estimator ids");
  add_override(run, bench_args, "--out", "out", "Output directory");
  add_override(run, bench_args, "--eps-b", "eps_b", "Behavior policy epsilon (sepsis)");
  add_override(run, bench_args, "--eps-e", "eps_e", "Target policy epsilon (sepsis)");
  add_override(run, bench_args, "--spec-seed", "spec_seed", "Kernel jitter seed (sepsis)");
  add_override(run, bench_args, "--intercept", "intercept", "Toy regressions with intercept");
  add_override(run, bench_args, "--strict-coverage", "strict_coverage",
               "Raise on target samples in empty behavior bins");
  add_override(run, bench_args, "--threads", "threads", "Worker threads (0 = all cores)");

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "t-test of estimated against behavior returns");
  compare->add_option("--behavior", compare_args.behavior, "CSV of behavior returns")->required();
  compare->add_option("--estimates", compare_args.estimates, "CSV of estimated returns")->required();
  compare->add_option("--behavior-column", compare_args.behavior_column, "Column (default: last)");
  compare->add_option("--estimates-column", compare_args.estimates_column, "Column (default: last)");
  compare->add_flag("--paired", compare_args.paired);
  compare->add_flag("--independent", compare_args.independent);
  compare->add_flag("--welch", compare_args.welch, "Unequal-variance independent test");
  compare->add_option("--sides", compare_args.sides, "two-sided, less or greater");
  compare->add_option("--alpha", compare_args.alpha);

  GenerateArgs gen_args;
  auto* generate = app.add_subcommand("generate", "Sample toy behavior and target datasets");
  generate->add_option("--nbehavior,--ntrain", gen_args.n);
  generate->add_option("--ntarget", gen_args.m);
  generate->add_option("--omega", gen_args.omega);
  generate->add_option("--seed", gen_args.seed);
  generate->add_option("--behavior-out", gen_args.behavior_out);
  generate->add_option("--target-out", gen_args.target_out);
  generate->add_option("--truth-out", gen_args.truth_out, "Per-target true and observed returns");

  ExportArgs export_args;
  auto* sepsis_export = app.add_subcommand("sepsis-export", "Write the default sepsis MDP spec");
  sepsis_export->add_option("--seed", export_args.seed);
  sepsis_export->add_option("--out", export_args.out);
  sepsis_export->add_option("--eps-b", export_args.eps_b);
  sepsis_export->add_option("--eps-e", export_args.eps_e);

  BoundArgs bound_args;
  auto* bound = app.add_subcommand("bound", "Empirical coverage of the DR deviation bound (toy)");
  bound->add_option("--seeds", bound_args.seeds);
  bound->add_option("--delta", bound_args.delta);
  bound->add_option("--nbehavior,--ntrain", bound_args.n);
  bound->add_option("--ntarget", bound_args.m);
  bound->add_option("--omega", bound_args.omega);
  bound->add_option("--k", bound_args.k);
  bound->add_option("--seed", bound_args.seed);
  bound->add_flag("--oracle", bound_args.oracle, "Use exact nuisances");
  bound->add_option("--oracle-samples", bound_args.oracle_samples);
  bound->add_option("--out", bound_args.out, "Per-seed breakdown CSV");

  EstimateArgs est_args;
  auto* estimate = app.add_subcommand("estimate", "Estimate a value from toy dataset files");
  estimate->add_option("--behavior", est_args.behavior)->required();
  estimate->add_option("--target", est_args.target)->required();
  estimate->add_option("--estimator", est_args.estimator);
  estimate->add_option("--features", est_args.features, "quadratic or linear");
  estimate->add_flag("--intercept", est_args.intercept);
  estimate->add_flag("--corrupt-ratio", est_args.corrupt);
  estimate->add_option("--k", est_args.k);
  estimate->add_option("--seed", est_args.seed);
  estimate->add_option("--clip", est_args.clip);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_bench(bench_args);
    if (*compare) return run_compare(compare_args);
    if (*generate) return run_generate(gen_args);
    if (*sepsis_export) return run_export(export_args);
    if (*bound) return run_bound(bound_args);
    if (*estimate) return run_estimate(est_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
