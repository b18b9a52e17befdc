#include "shortlong/dataset_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "shortlong/errors.hpp"

namespace shortlong {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + text +
                     "' as a number");
  }
  return value;
}

void write_header(std::ostream& out, int h, bool with_rewards) {
  out << "traj_id,fold_id,h";
  for (int t = 0; t <= h; ++t) out << ",s_" << t;
  if (with_rewards) {
    for (int t = 0; t < h; ++t) out << ",r_" << t;
  }
  out << ",G\n";
}

void check_shape(const Trajectory& tr, int h, bool with_rewards) {
  if (tr.state_dim() != 1) throw InvalidArgument("dataset CSV supports 1-dimensional states only");
  if (tr.horizon() != h) throw InvalidArgument("all trajectories in a dataset file must share h");
  if (tr.has_rewards() != with_rewards) {
    throw InvalidArgument("all trajectories in a dataset file must agree on reward presence");
  }
}

void write_row(std::ostream& out, std::size_t id, int fold, const Trajectory& tr,
               const std::optional<double>& g) {
  out << id << ',' << fold << ',' << tr.horizon();
  for (const double s : tr.states()) out << ',' << s;
  for (const double r : tr.rewards()) out << ',' << r;
  out << ',';
  if (g) out << *g;
  out << '\n';
}

int fold_for(const std::vector<int>& fold_ids, std::size_t i) {
  if (fold_ids.empty()) return -1;
  return fold_ids.at(i);
}

}  // namespace

BehaviorDataset DatasetTable::behavior() const {
  std::vector<LabeledTrajectory> items;
  items.reserve(prefixes.size());
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    if (!returns[i]) {
      throw ParseError("row " + std::to_string(i) + " has no return; not a behavior dataset");
    }
    items.push_back(LabeledTrajectory{prefixes[i], *returns[i]});
  }
  return BehaviorDataset(std::move(items));
}

TargetDataset DatasetTable::target() const { return TargetDataset(prefixes); }

void write_behavior_csv(std::ostream& out, const BehaviorDataset& data,
                        const std::vector<int>& fold_ids) {
  const auto& first = data[0].prefix;
  const int h = first.horizon();
  const bool with_rewards = first.has_rewards();
  out.precision(17);
  write_header(out, h, with_rewards);
  for (std::size_t i = 0; i < data.size(); ++i) {
    check_shape(data[i].prefix, h, with_rewards);
    write_row(out, i, fold_for(fold_ids, i), data[i].prefix, data[i].full_return);
  }
}

void write_target_csv(std::ostream& out, const TargetDataset& data,
                      const std::vector<int>& fold_ids) {
  const int h = data[0].horizon();
  const bool with_rewards = data[0].has_rewards();
  out.precision(17);
  write_header(out, h, with_rewards);
  for (std::size_t i = 0; i < data.size(); ++i) {
    check_shape(data[i], h, with_rewards);
    write_row(out, i, fold_for(fold_ids, i), data[i], std::nullopt);
  }
}

DatasetTable read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file");
  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "traj_id" || header[1] != "fold_id" || header[2] != "h" ||
      header.back() != "G") {
    throw ParseError("dataset header must read traj_id,fold_id,h,s_0..,[r_0..],G");
  }
  int state_columns = 0;
  int reward_columns = 0;
  for (std::size_t c = 3; c + 1 < header.size(); ++c) {
    if (header[c].rfind("s_", 0) == 0) {
      ++state_columns;
    } else if (header[c].rfind("r_", 0) == 0) {
      ++reward_columns;
    } else {
      throw ParseError("unexpected column '" + header[c] + "'");
    }
  }
  const int h = state_columns - 1;
  if (h < 0 || (reward_columns != 0 && reward_columns != h)) {
    throw ParseError("inconsistent state/reward columns in dataset header");
  }

  DatasetTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    if (static_cast<int>(parse_double(cells[2], line_no)) != h) {
      throw ParseError("line " + std::to_string(line_no) + ": h column disagrees with header");
    }
    std::vector<double> states;
    std::vector<double> rewards;
    for (int t = 0; t <= h; ++t) states.push_back(parse_double(cells[3 + t], line_no));
    for (int t = 0; t < reward_columns; ++t) {
      rewards.push_back(parse_double(cells[3 + state_columns + t], line_no));
    }
    table.prefixes.emplace_back(1, std::move(states), std::move(rewards));
    table.fold_ids.push_back(static_cast<int>(parse_double(cells[1], line_no)));
    if (cells.back().empty()) {
      table.returns.emplace_back(std::nullopt);
    } else {
      table.returns.emplace_back(parse_double(cells.back(), line_no));
    }
  }
  if (table.prefixes.empty()) throw ParseError("dataset file has no rows");
  return table;
}

std::vector<double> read_csv_column(std::istream& in, const std::string& column) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file");
  const auto header = split_csv_line(line);
  std::size_t index = header.size() - 1;
  if (!column.empty()) {
    bool found = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == column) {
        index = c;
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("CSV has no column named '" + column + "'");
  }
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (index >= cells.size()) {
      throw ParseError("line " + std::to_string(line_no) + " is missing column " + column);
    }
    if (cells[index].empty()) continue;
    values.push_back(parse_double(cells[index], line_no));
  }
  return values;
}

}  // namespace shortlong
