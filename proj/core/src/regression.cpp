#include "shortlong/regression.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "shortlong/errors.hpp"

namespace shortlong {

std::vector<double> FeatureMap::apply(const Trajectory& prefix) const {
  std::vector<double> out(static_cast<std::size_t>(dim));
  apply_into(prefix, out);
  return out;
}

void FeatureMap::apply_into(const Trajectory& prefix, std::span<double> out) const {
  if (arity >= 0 && prefix.horizon() != arity) {
    throw InvalidArgument("feature map '" + name + "' expects horizon " + std::to_string(arity) +
                          ", got " + std::to_string(prefix.horizon()));
  }
  if (static_cast<int>(out.size()) != dim) {
    throw InvalidArgument("feature map '" + name + "' output buffer has wrong size");
  }
  fill(prefix, out);
}

FeatureMap toy_quadratic_features() {
  return FeatureMap{"toy-quadratic", 1, 3, [](const Trajectory& tr, std::span<double> out) {
                      const double s0 = tr.scalar_state(0);
                      const double s1 = tr.scalar_state(1);
                      out[0] = s0;
                      out[1] = s1;
                      out[2] = s1 * s1;
                    }};
}

FeatureMap toy_linear_features() {
  return FeatureMap{"toy-linear", 1, 2, [](const Trajectory& tr, std::span<double> out) {
                      out[0] = tr.scalar_state(0);
                      out[1] = tr.scalar_state(1);
                    }};
}

TrajectoryKey exact_trajectory_key(const Trajectory& prefix) {
  std::ostringstream key;
  key.precision(17);
  for (const double s : prefix.states()) key << s << ';';
  key << '|';
  for (const double r : prefix.rewards()) key << r << ';';
  return key.str();
}

double LinearModel::predict(const Trajectory& prefix) const {
  const auto phi = features.apply(prefix);
  double value = has_intercept ? intercept : 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) value += coefficients[j] * phi[j];
  return value;
}

void LinearModel::dump(std::ostream& out) const {
  out.precision(17);
  out << "features " << features.name << '\n';
  if (has_intercept) out << "intercept " << intercept << '\n';
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    out << "theta_" << j << ' ' << coefficients[j] << '\n';
  }
}

double TabularModel::predict(const Trajectory& prefix) const {
  const auto it = table.find(key(prefix));
  return it == table.end() ? default_value : it->second.mean;
}

double predict(const Regressor& model, const Trajectory& prefix) {
  return std::visit([&](const auto& m) { return m.predict(prefix); }, model);
}

namespace {

std::vector<double> checked_weights(std::optional<std::span<const double>> weights,
                                    std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (!weights) return w;
  if (weights->size() != n) {
    throw InvalidArgument("got " + std::to_string(weights->size()) + " weights for " +
                          std::to_string(n) + " items");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = (*weights)[i];
    if (!(wi >= 0.0) || !std::isfinite(wi)) {
      throw InvalidArgument("regression weight " + std::to_string(i) + " is negative or not finite");
    }
    w[i] = wi;
    total += wi;
  }
  if (!(total > 0.0)) throw InvalidArgument("regression weights sum to zero");
  return w;
}

LinearSolution minimum_norm_solution(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                                     const std::vector<double>& w, bool intercept) {
  const Eigen::Index p = design.cols();
  const Eigen::Index q = p + (intercept ? 1 : 0);
  Eigen::MatrixXd a(design.rows(), q);
  Eigen::VectorXd b(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const double root = std::sqrt(w[static_cast<std::size_t>(i)]);
    a.row(i).head(p) = root * design.row(i);
    if (intercept) a(i, p) = root;
    b(i) = root * targets(i);
  }
  const Eigen::VectorXd theta = a.completeOrthogonalDecomposition().solve(b);
  LinearSolution solution;
  solution.coefficients.assign(theta.data(), theta.data() + p);
  solution.intercept = intercept ? theta(p) : 0.0;
  return solution;
}

}  // namespace

LinearSolution solve_weighted_least_squares(const Eigen::MatrixXd& design,
                                            const Eigen::VectorXd& targets,
                                            std::optional<std::span<const double>> weights,
                                            const LeastSquaresOptions& options,
                                            const std::string& basis_name) {
  const auto n = static_cast<std::size_t>(design.rows());
  const auto w = checked_weights(weights, n);
  const Eigen::Index p = design.cols();
  const Eigen::Index q = p + (options.intercept ? 1 : 0);
  if (q == 0) throw InvalidArgument("least squares with no features and no intercept");

  std::size_t support = 0;
  for (const double wi : w) support += wi > 0.0 ? 1 : 0;
  if (support < static_cast<std::size_t>(q)) {
    if (options.minimum_norm_fallback) {
      return minimum_norm_solution(design, targets, w, options.intercept);
    }
    throw InsufficientData("basis '" + basis_name + "' has " + std::to_string(q) +
                           " parameters but only " + std::to_string(support) +
                           " positively weighted rows");
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd row(q);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const double wi = w[static_cast<std::size_t>(i)];
    if (wi == 0.0) continue;
    row.head(p) = design.row(i).transpose();
    if (options.intercept) row(p) = 1.0;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(row, wi);
    rhs.noalias() += wi * targets(i) * row;
  }
  gram = gram.selfadjointView<Eigen::Lower>();

  // Rank check on the unit-diagonal rescaling so feature scale does not matter.
  Eigen::VectorXd scale(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!(gram(j, j) > 0.0)) {
      if (options.minimum_norm_fallback) {
        return minimum_norm_solution(design, targets, w, options.intercept);
      }
      throw RankDeficientError("basis '" + basis_name + "' is rank deficient: column " +
                               std::to_string(j) + " is identically zero on the weighted data");
    }
    scale(j) = 1.0 / std::sqrt(gram(j, j));
  }
  const Eigen::MatrixXd correlation = scale.asDiagonal() * gram * scale.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(correlation,
                                                           Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    if (options.minimum_norm_fallback) {
      return minimum_norm_solution(design, targets, w, options.intercept);
    }
    throw RankDeficientError("basis '" + basis_name +
                             "' is rank deficient on the weighted data (smallest scaled "
                             "eigenvalue " +
                             std::to_string(min_eig) + ")");
  }

  gram.diagonal().array() += options.ridge;
  const Eigen::VectorXd theta = gram.ldlt().solve(rhs);

  LinearSolution solution;
  solution.coefficients.assign(theta.data(), theta.data() + p);
  solution.intercept = options.intercept ? theta(p) : 0.0;
  return solution;
}

LinearModel fit_least_squares(const BehaviorDataset& data, const FeatureMap& features,
                              std::optional<std::span<const double>> weights,
                              const LeastSquaresOptions& options) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd design(n, features.dim);
  Eigen::VectorXd targets(n);
  std::vector<double> phi(static_cast<std::size_t>(features.dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& item = data[static_cast<std::size_t>(i)];
    features.apply_into(item.prefix, phi);
    for (int j = 0; j < features.dim; ++j) design(i, j) = phi[static_cast<std::size_t>(j)];
    targets(i) = item.full_return;
  }
  auto solution = solve_weighted_least_squares(design, targets, weights, options, features.name);
  return LinearModel{features, std::move(solution.coefficients), solution.intercept,
                     options.intercept};
}

TabularModel fit_tabular(const BehaviorDataset& data, KeyFunction key,
                         std::optional<std::span<const double>> weights) {
  const auto w = checked_weights(weights, data.size());
  TabularModel model;
  model.key = std::move(key);
  std::map<TrajectoryKey, std::pair<double, double>> sums;  // (sum w*G, sum w)
  double total = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (w[i] == 0.0) continue;
    auto& cell = sums[model.key(data[i].prefix)];
    cell.first += w[i] * data[i].full_return;
    cell.second += w[i];
    total += w[i] * data[i].full_return;
    total_weight += w[i];
  }
  for (const auto& [k, cell] : sums) {
    model.table.emplace(k, TabularCell{cell.first / cell.second, cell.second});
  }
  model.default_value = total / total_weight;
  return model;
}

Regressor fit_regressor(const RegressorConfig& config, const BehaviorDataset& data,
                        std::optional<std::span<const double>> weights) {
  if (config.kind == RegressorConfig::Kind::kTabular) {
    if (!config.key) throw InvalidArgument("tabular regressor needs a key function");
    return fit_tabular(data, config.key, weights);
  }
  if (!config.features.fill) throw InvalidArgument("linear regressor needs a feature map");
  return fit_least_squares(data, config.features, weights, config.options);
}

}  // namespace shortlong
