#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "shortlong/errors.hpp"

namespace shortlong {

enum class Environment { kToy, kSepsis };

enum class Scenario {
  kRealizable,              // quadratic features, clean ratios
  kRegressorMisspecified,   // linear features, clean ratios
  kRatioMisspecified,       // quadratic features, corrupted ratio denominators
  kNoiseSweep,              // realizable, one setting per omega
  kDataSizeSweep,           // ratio-misspecified, one setting per behavior size
};

std::string to_string(Environment env);
std::string to_string(Scenario scenario);

/// Recognized estimator ids, in table order.
const std::vector<std::string>& estimator_ids();

struct ExperimentConfig {
  Environment environment = Environment::kToy;
  std::vector<std::string> estimators{"soft", "w-soft", "dr-soft"};
  std::size_t n_seeds = 200;
  Scenario scenario = Scenario::kRealizable;
  std::size_t n_behavior = 5000;
  std::size_t n_target = 100;
  int short_h = 1;
  double omega = 1.0;
  std::vector<double> omegas{1.0, 10.0};
  std::vector<std::size_t> behavior_sizes{500, 1000, 50000};
  int k_folds = 2;
  std::uint64_t base_seed = 0;
  std::string output;
  /// Toy regressions: include an intercept column.
  bool intercept = false;
  /// Toy histogram ratios: raise on target samples in empty behavior bins.
  bool strict_coverage = false;
  double clip_max = 100.0;
  /// Sepsis policies and kernel.
  double eps_b = 0.15;
  double eps_e = 0.15;
  std::uint64_t spec_seed = 0;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

/// Environment-specific defaults (toy: 200 seeds, M = 100, h = 1; sepsis:
/// 5 seeds, M = 500, h = 2 and every estimator).
ExperimentConfig default_config(Environment env);

using Settings = std::map<std::string, std::string>;

/// Flat `key = value` lines; `#` starts a comment.
Settings parse_settings(std::istream& in);

/// Defaults for the `env` entry, then every other entry applied on top.
ExperimentConfig make_config(const Settings& settings);

struct MetricRow {
  std::string setting;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  double estimate = 0.0;
  double truth = 0.0;
  double metric = 0.0;
};

struct SummaryCell {
  std::string setting;
  std::string estimator;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over seeds
  std::size_t count = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<std::string> settings;
  std::vector<MetricRow> rows;
  std::vector<SummaryCell> summary;
  std::map<std::string, std::string> metadata;
  double wall_clock_seconds = 0.0;

  const SummaryCell& cell(const std::string& setting, const std::string& estimator) const;
};

/// Raised when a seed fails; names the seed and estimator.
class ExperimentError : public Error {
 public:
  ExperimentError(std::size_t seed_index, std::string estimator, const std::string& what);
  std::size_t seed_index() const noexcept { return seed_index_; }
  const std::string& estimator() const noexcept { return estimator_; }

 private:
  std::size_t seed_index_;
  std::string estimator_;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

/// Mean and population std of `values`, summed in order.
SummaryCell summarize(const std::vector<double>& values);

enum class TableFormat { kCsv, kMarkdown };

/// "mean (std)" to three decimals, e.g. "0.002 (0.003)".
std::string format_cell(double mean, double std);

/// One row per estimator, one column per setting.
std::string emit_table(const ExperimentReport& report, TableFormat format);

void write_rows_csv(std::ostream& out, const ExperimentReport& report);

/// Writes rows.csv, summary.csv and summary.md into `directory`.
void write_report(const ExperimentReport& report, const std::string& directory);

}  // namespace shortlong
