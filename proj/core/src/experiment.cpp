#include "shortlong/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "shortlong/density_ratio.hpp"
#include "shortlong/estimators.hpp"
#include "shortlong/regression.hpp"
#include "shortlong/rng.hpp"
#include "shortlong/sepsis.hpp"
#include "shortlong/synthetic.hpp"

namespace shortlong {

std::string to_string(Environment env) { return env == Environment::kToy ? "toy" : "sepsis"; }

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kRealizable: return "realizable";
    case Scenario::kRegressorMisspecified: return "regressor_misspecified";
    case Scenario::kRatioMisspecified: return "ratio_misspecified";
    case Scenario::kNoiseSweep: return "noise_sweep";
    case Scenario::kDataSizeSweep: return "data_size_sweep";
  }
  return "?";
}

const std::vector<std::string>& estimator_ids() {
  static const std::vector<std::string> ids{"soft",  "w-soft",      "dr-soft",    "dr-w-soft", "lope",
                                            "model-based", "extrap-avg", "extrap-last", "mc"};
  return ids;
}

namespace {

bool toy_supports(const std::string& id) {
  return id == "soft" || id == "w-soft" || id == "dr-soft" || id == "dr-w-soft" || id == "mc";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(text);
  while (std::getline(stream, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    out.push_back(item.substr(first, last - first + 1));
  }
  return out;
}

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("setting '" + key + "': cannot parse '" + value + "' as a number");
}

std::uint64_t to_count(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("setting '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  try {
    return std::stoull(value);
  } catch (const std::exception&) {
    throw ParseError("setting '" + key + "': integer '" + value + "' out of range");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ParseError("setting '" + key + "': expected true or false, got '" + value + "'");
}

Environment to_environment(const std::string& value) {
  if (value == "toy") return Environment::kToy;
  if (value == "sepsis") return Environment::kSepsis;
  throw ParseError("unknown environment '" + value + "' (expected toy or sepsis)");
}

Scenario to_scenario(const std::string& value) {
  for (const auto s : {Scenario::kRealizable, Scenario::kRegressorMisspecified,
                       Scenario::kRatioMisspecified, Scenario::kNoiseSweep,
                       Scenario::kDataSizeSweep}) {
    if (value == to_string(s)) return s;
  }
  throw ParseError("unknown scenario '" + value + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_seeds < 1) throw InvalidArgument("experiment needs at least one seed");
  if (k_folds < 2) throw InvalidArgument("cross-fitting needs k >= 2 folds");
  if (n_behavior < static_cast<std::size_t>(k_folds) || n_target < static_cast<std::size_t>(k_folds)) {
    throw InsufficientData("datasets must hold at least k trajectories");
  }
  if (short_h < 1) throw InvalidArgument("short horizon must be >= 1");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw InvalidArgument("omega must be >= 0");
  if (!(clip_max > 0.0)) throw InvalidArgument("clip_max must be positive");
  if (!(eps_b >= 0.0 && eps_b <= 1.0) || !(eps_e >= 0.0 && eps_e <= 1.0)) {
    throw InvalidArgument("policy epsilons must lie in [0, 1]");
  }
  for (const auto& id : estimators) {
    if (std::find(estimator_ids().begin(), estimator_ids().end(), id) == estimator_ids().end()) {
      throw InvalidArgument("unknown estimator '" + id + "'");
    }
    if (environment == Environment::kToy && !toy_supports(id)) {
      throw UnsupportedDomain("estimator '" + id + "' needs the sepsis domain");
    }
  }
  if (environment == Environment::kToy) {
    if (short_h != 1) throw UnsupportedDomain("the toy domain has a single step (h = 1)");
    if (scenario == Scenario::kNoiseSweep && omegas.empty()) {
      throw InvalidArgument("noise sweep needs at least one omega");
    }
    if (scenario == Scenario::kDataSizeSweep) {
      if (behavior_sizes.empty()) throw InvalidArgument("data size sweep needs at least one size");
      for (const auto n : behavior_sizes) {
        if (n < static_cast<std::size_t>(k_folds)) {
          throw InsufficientData("behavior size " + std::to_string(n) + " is smaller than k");
        }
      }
    }
  }
}

ExperimentConfig default_config(Environment env) {
  ExperimentConfig config;
  config.environment = env;
  if (env == Environment::kSepsis) {
    config.estimators = estimator_ids();
    config.n_seeds = 5;
    config.n_target = 500;
    config.short_h = 2;
  }
  return config;
}

Settings parse_settings(std::istream& in) {
  Settings settings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty key");
    settings[key] = trim(line.substr(eq + 1));
  }
  return settings;
}

ExperimentConfig make_config(const Settings& settings) {
  const auto env_it = settings.find("env");
  ExperimentConfig config =
      default_config(env_it == settings.end() ? Environment::kToy : to_environment(env_it->second));
  for (const auto& [key, value] : settings) {
    if (key == "env") continue;
    if (key == "estimators") {
      config.estimators = split_list(value);
    } else if (key == "seeds") {
      config.n_seeds = to_count(key, value);
    } else if (key == "scenario") {
      config.scenario = to_scenario(value);
    } else if (key == "ntrain" || key == "nbehavior") {
      config.n_behavior = to_count(key, value);
    } else if (key == "ntarget") {
      config.n_target = to_count(key, value);
    } else if (key == "h") {
      config.short_h = static_cast<int>(to_count(key, value));
    } else if (key == "omega") {
      config.omega = to_double(key, value);
    } else if (key == "omegas") {
      config.omegas.clear();
      for (const auto& v : split_list(value)) config.omegas.push_back(to_double(key, v));
    } else if (key == "sizes") {
      config.behavior_sizes.clear();
      for (const auto& v : split_list(value)) config.behavior_sizes.push_back(to_count(key, v));
    } else if (key == "k") {
      config.k_folds = static_cast<int>(to_count(key, value));
    } else if (key == "base_seed" || key == "seed") {
      config.base_seed = to_count(key, value);
    } else if (key == "out") {
      config.output = value;
    } else if (key == "intercept") {
      config.intercept = to_bool(key, value);
    } else if (key == "strict_coverage") {
      config.strict_coverage = to_bool(key, value);
    } else if (key == "clip_max") {
      config.clip_max = to_double(key, value);
    } else if (key == "eps_b") {
      config.eps_b = to_double(key, value);
    } else if (key == "eps_e") {
      config.eps_e = to_double(key, value);
    } else if (key == "spec_seed") {
      config.spec_seed = to_count(key, value);
    } else if (key == "threads") {
      config.threads = to_count(key, value);
    } else {
      throw ParseError("unknown setting '" + key + "'");
    }
  }
  config.validate();
  return config;
}

ExperimentError::ExperimentError(std::size_t seed_index, std::string estimator,
                                 const std::string& what)
    : Error("seed " + std::to_string(seed_index) + ", estimator '" + estimator + "': " + what),
      seed_index_(seed_index),
      estimator_(std::move(estimator)) {}

const SummaryCell& ExperimentReport::cell(const std::string& setting,
                                          const std::string& estimator) const {
  for (const auto& c : summary) {
    if (c.setting == setting && c.estimator == estimator) return c;
  }
  throw InvalidArgument("report has no cell for (" + setting + ", " + estimator + ")");
}

SummaryCell summarize(const std::vector<double>& values) {
  SummaryCell cell;
  cell.count = values.size();
  if (values.empty()) return cell;
  double total = 0.0;
  for (const double v : values) total += v;
  cell.mean = total / static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - cell.mean) * (v - cell.mean);
  cell.std = std::sqrt(ss / static_cast<double>(values.size()));
  return cell;
}

namespace {

struct Setting {
  std::string name;
  std::size_t n_behavior;
  double omega;
  bool linear_regressor;
  bool corrupt_ratio;
};

std::vector<Setting> toy_settings(const ExperimentConfig& c) {
  switch (c.scenario) {
    case Scenario::kRealizable:
      return {{"realizable", c.n_behavior, c.omega, false, false}};
    case Scenario::kRegressorMisspecified:
      return {{"regressor_misspecified", c.n_behavior, c.omega, true, false}};
    case Scenario::kRatioMisspecified:
      return {{"ratio_misspecified", c.n_behavior, c.omega, false, true}};
    case Scenario::kNoiseSweep: {
      std::vector<Setting> out;
      for (const double w : c.omegas) out.push_back({"omega=" + fmt(w), c.n_behavior, w, false, false});
      return out;
    }
    case Scenario::kDataSizeSweep: {
      std::vector<Setting> out;
      for (const auto n : c.behavior_sizes) {
        out.push_back({"N=" + std::to_string(n), n, c.omega, false, true});
      }
      return out;
    }
  }
  return {};
}

std::uint64_t estimator_seed(const ExperimentConfig& c, std::size_t idx, const std::string& id,
                             std::string_view purpose) {
  return derive_seed({c.base_seed, idx, stream_id(id), stream_id(purpose)});
}

double mean_of(const std::vector<double>& v) {
  double total = 0.0;
  for (const double x : v) total += x;
  return total / static_cast<double>(v.size());
}

double per_trajectory_mse(const std::vector<double>& predictions, const std::vector<double>& truth) {
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    total += (predictions[i] - truth[i]) * (predictions[i] - truth[i]);
  }
  return total / static_cast<double>(truth.size());
}

// Soft, w-soft and MC are scored per trajectory against f(s0, s1); the
// cross-fitted estimators only produce a value, scored against the sample mean.
void run_toy_seed(const ExperimentConfig& c, const std::vector<Setting>& settings, std::size_t idx,
                  std::uint64_t data_seed, std::vector<MetricRow>& out) {
  for (const auto& setting : settings) {
    ToyConfig toy;
    toy.n_behavior = setting.n_behavior;
    toy.n_target = c.n_target;
    toy.noise_omega = setting.omega;
    toy.seed = data_seed;
    const auto behavior = sample_behavior(toy);
    const auto target = sample_target(toy);
    const double truth = mean_of(target.true_returns);

    RegressorConfig regressor;
    regressor.features = setting.linear_regressor ? toy_linear_features() : toy_quadratic_features();
    regressor.options.intercept = c.intercept;
    regressor.options.minimum_norm_fallback = true;
    RatioConfig ratio;
    ratio.options.clip_max = c.clip_max;
    ratio.options.strict_coverage = c.strict_coverage;
    ratio.corrupt_denominator = setting.corrupt_ratio;

    for (const auto& id : c.estimators) {
      MetricRow row{setting.name, idx, data_seed, id, 0.0, truth, 0.0};
      try {
        if (id == "soft" || id == "w-soft") {
          const auto est = id == "soft"
                               ? estimate_soft(behavior, target.data, regressor)
                               : estimate_w_soft(behavior, target.data, regressor, ratio,
                                                 estimator_seed(c, idx, id, "ratio"));
          row.estimate = est.value;
          row.metric = per_trajectory_mse(est.per_trajectory_predictions, target.true_returns);
        } else if (id == "mc") {
          row.estimate = mean_of(target.observed_returns);
          row.metric = per_trajectory_mse(target.observed_returns, target.true_returns);
        } else {
          DrOptions options;
          options.k = c.k_folds;
          options.seed = estimator_seed(c, idx, id, "folds");
          options.weighted = id == "dr-w-soft";
          const auto est = estimate_dr(behavior, target.data, regressor, ratio, options);
          row.estimate = est.value;
          row.metric = (est.value - truth) * (est.value - truth);
        }
      } catch (const std::exception& e) {
        throw ExperimentError(idx, id, e.what());
      }
      out.push_back(std::move(row));
    }
  }
}

struct SepsisWorld {
  MdpSpec spec;
  Policy behavior;
  Policy target;
  double truth = 0.0;
};

SepsisWorld make_sepsis_world(const ExperimentConfig& c) {
  SepsisWorld world;
  world.spec = build_default_spec(c.spec_seed);
  world.behavior = soften(policy_iteration(world.spec, world.spec.behavior_actions), c.eps_b);
  world.target = soften(policy_iteration(world.spec, world.spec.target_actions), c.eps_e);
  world.truth = exact_policy_value(world.spec, world.target);
  return world;
}

void run_sepsis_seed(const ExperimentConfig& c, const SepsisWorld& world, std::size_t idx,
                     std::uint64_t data_seed, std::vector<MetricRow>& out) {
  const auto& spec = world.spec;
  const auto behavior =
      rollout_behavior(spec, world.behavior, c.n_behavior, c.short_h, derive_seed({data_seed, 1}));
  const auto target =
      rollout_target(spec, world.target, c.n_target, c.short_h, derive_seed({data_seed, 2}));

  RegressorConfig regressor;
  regressor.features = sepsis_features(spec.discount);
  regressor.options.intercept = false;
  RatioConfig ratio;
  ratio.kind = RatioKind::kClassifier;
  ratio.features = sepsis_features(spec.discount);
  ratio.options.clip_max = c.clip_max;
  ratio.options.strict_coverage = c.strict_coverage;

  for (const auto& id : c.estimators) {
    double value = 0.0;
    try {
      if (id == "soft") {
        value = estimate_soft(behavior, target.data, regressor).value;
      } else if (id == "w-soft") {
        value = estimate_w_soft(behavior, target.data, regressor, ratio).value;
      } else if (id == "dr-soft" || id == "dr-w-soft") {
        DrOptions options;
        options.k = c.k_folds;
        options.seed = estimator_seed(c, idx, id, "folds");
        options.weighted = id == "dr-w-soft";
        value = estimate_dr(behavior, target.data, regressor, ratio, options).value;
      } else if (id == "lope") {
        LopeConfig lope;
        lope.state_features = sepsis_features(spec.discount);
        lope.action_buckets = 4;
        lope.bucket_of = [](int a) { return a & 3; };
        lope.target_action_probs = [&world](const Trajectory& prefix) {
          const int s = static_cast<int>(prefix.scalar_state(prefix.horizon()));
          const auto row = world.target.row(s);
          return std::vector<double>(row.begin(), row.end());
        };
        lope.options.intercept = false;
        value = estimate_lope(behavior, target.data, lope, ratio).value;
      } else if (id == "model-based") {
        value = estimate_model_based(target.data, model_based_config(spec, world.target)).value;
      } else if (id == "extrap-avg" || id == "extrap-last") {
        const auto mode = id == "extrap-avg" ? ExtrapolationMode::kAverage : ExtrapolationMode::kLast;
        value = estimate_extrapolation(target.data, mode, spec.horizon, spec.discount).value;
      } else {
        value = mean_of(target.full_returns);
      }
    } catch (const std::exception& e) {
      throw ExperimentError(idx, id, e.what());
    }
    out.push_back(MetricRow{"sepsis", idx, data_seed, id, value, world.truth,
                            (value - world.truth) * (value - world.truth)});
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.config = config;
  std::vector<Setting> toy;
  SepsisWorld world;
  if (config.environment == Environment::kToy) {
    toy = toy_settings(config);
    for (const auto& s : toy) report.settings.push_back(s.name);
  } else {
    world = make_sepsis_world(config);
    report.settings.push_back("sepsis");
    report.metadata["true_value"] = fmt(world.truth);
    report.metadata["behavior_value"] = fmt(exact_policy_value(world.spec, world.behavior));
  }

  // One slot per seed, filled independently so the output does not depend
  // on scheduling.
  std::vector<std::vector<MetricRow>> slots(config.n_seeds);
  std::vector<std::exception_ptr> errors(config.n_seeds);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  const auto work = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= config.n_seeds || failed.load()) return;
      const auto data_seed = derive_seed({config.base_seed, idx, stream_id("data")});
      try {
        if (config.environment == Environment::kToy) {
          run_toy_seed(config, toy, idx, data_seed, slots[idx]);
        } else {
          run_sepsis_seed(config, world, idx, data_seed, slots[idx]);
        }
      } catch (...) {
        errors[idx] = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::size_t threads = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  threads = std::clamp<std::size_t>(threads, 1, config.n_seeds);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& setting : report.settings) {
    for (std::size_t idx = 0; idx < config.n_seeds; ++idx) {
      for (const auto& row : slots[idx]) {
        if (row.setting == setting) report.rows.push_back(row);
      }
    }
  }
  for (const auto& setting : report.settings) {
    for (const auto& id : config.estimators) {
      std::vector<double> metrics;
      for (const auto& row : report.rows) {
        if (row.setting == setting && row.estimator == id) metrics.push_back(row.metric);
      }
      auto cell = summarize(metrics);
      cell.setting = setting;
      cell.estimator = id;
      report.summary.push_back(cell);
    }
  }

  report.metadata["environment"] = to_string(config.environment);
  if (config.environment == Environment::kToy) {
    report.metadata["scenario"] = to_string(config.scenario);
    report.metadata["intercept"] = config.intercept ? "true" : "false";
    report.metadata["metric"] =
        "soft, w-soft, mc: per-trajectory squared error against f(s0, s1); "
        "dr-*: squared error of the estimate against the mean of f over the target sample";
  } else {
    report.metadata["metric"] = "squared error of the estimate against the exact target value";
  }
  report.metadata["seeds"] = std::to_string(config.n_seeds);
  report.metadata["base_seed"] = std::to_string(config.base_seed);
  report.metadata["n_behavior"] = std::to_string(config.n_behavior);
  report.metadata["n_target"] = std::to_string(config.n_target);
  report.metadata["h"] = std::to_string(config.short_h);
  report.metadata["k"] = std::to_string(config.k_folds);

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::string format_cell(double mean, double std) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f (%.3f)", mean, std);
  return buf;
}

std::string emit_table(const ExperimentReport& report, TableFormat format) {
  std::ostringstream out;
  const auto& settings = report.settings;
  if (format == TableFormat::kCsv) {
    out << "estimator";
    for (const auto& s : settings) out << ',' << s << "_mean," << s << "_std";
    out << '\n';
    for (const auto& id : report.config.estimators) {
      out << id;
      for (const auto& s : settings) {
        const auto& c = report.cell(s, id);
        out << ',' << fmt(c.mean) << ',' << fmt(c.std);
      }
      out << '\n';
    }
    return out.str();
  }
  out << "| estimator |";
  for (const auto& s : settings) out << ' ' << s << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < settings.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& id : report.config.estimators) {
    out << "| " << id << " |";
    for (const auto& s : settings) {
      const auto& c = report.cell(s, id);
      out << ' ' << format_cell(c.mean, c.std) << " |";
    }
    out << '\n';
  }
  return out.str();
}

void write_rows_csv(std::ostream& out, const ExperimentReport& report) {
  out << "setting,seed_index,seed,estimator,estimate,truth,metric\n";
  for (const auto& r : report.rows) {
    out << r.setting << ',' << r.seed_index << ',' << r.seed << ',' << r.estimator << ','
        << fmt(r.estimate) << ',' << fmt(r.truth) << ',' << fmt(r.metric) << '\n';
  }
}

void write_report(const ExperimentReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw InvalidArgument("cannot create output directory '" + directory + "': " + ec.message());
  const auto open = [&](const char* name) {
    std::ofstream f(fs::path(directory) / name);
    if (!f) throw InvalidArgument("cannot write " + (fs::path(directory) / name).string());
    return f;
  };
  {
    auto f = open("rows.csv");
    write_rows_csv(f, report);
  }
  {
    auto f = open("summary.csv");
    f << emit_table(report, TableFormat::kCsv);
  }
  auto f = open("summary.md");
  f << emit_table(report, TableFormat::kMarkdown) << '\n';
  for (const auto& [key, value] : report.metadata) f << "- " << key << ": " << value << '\n';
}

}  // namespace shortlong
