#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shortlong/data_model.hpp"

namespace shortlong {

/// Dataset files are CSV with one header line and one trajectory per line:
///
///     traj_id,fold_id,h,s_0,...,s_h,r_0,...,r_{h-1},G
///
/// `fold_id` is -1 when no fold plan was supplied. The reward columns are
/// omitted when the trajectories carry no per-step rewards (toy domain). `G`
/// is always present and left empty for target datasets. Only 1-dimensional
/// states are supported; every row in a file shares the same h.
struct DatasetTable {
  std::vector<Trajectory> prefixes;
  std::vector<std::optional<double>> returns;
  std::vector<int> fold_ids;

  BehaviorDataset behavior() const;
  TargetDataset target() const;
};

void write_behavior_csv(std::ostream& out, const BehaviorDataset& data,
                        const std::vector<int>& fold_ids = {});
void write_target_csv(std::ostream& out, const TargetDataset& data,
                      const std::vector<int>& fold_ids = {});

DatasetTable read_dataset_csv(std::istream& in);

/// Numeric values of one named column from a CSV with a header line.
/// Falls back to the last column when `column` is empty.
std::vector<double> read_csv_column(std::istream& in, const std::string& column);

}  // namespace shortlong
