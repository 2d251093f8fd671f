#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace otflow {

// Finitely supported probability measure: atoms x_i in R^n with positive
// weights summing to one.  Treated as immutable once built.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<Eigen::VectorXd> atoms, std::vector<double> weights);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(atoms_.size()); }
  const std::vector<Eigen::VectorXd>& atoms() const { return atoms_; }
  const Eigen::VectorXd& atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }

 private:
  int dim_ = 0;
  std::vector<Eigen::VectorXd> atoms_;
  std::vector<double> weights_;
};

// Normalizes weights to total mass one (uniform if none given) and drops
// zero-weight atoms.  Throws std::invalid_argument on empty input, mixed
// dimensions, negative weights, non-finite data or zero total mass.
DiscreteMeasure build_measure(std::vector<Eigen::VectorXd> points,
                              std::optional<std::vector<double>> weights = std::nullopt);

struct PlanEntry {
  int i;
  int j;
  double mass;
};

// Sparse coupling between a source of n1 atoms and a target of n2 atoms.
// Entries are sorted by (i, j); marginals are cached at construction.
class CouplingPlan {
 public:
  CouplingPlan(int n1, int n2, std::vector<PlanEntry> entries);

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  const std::vector<PlanEntry>& entries() const { return entries_; }
  int support_size() const { return static_cast<int>(entries_.size()); }
  const std::vector<double>& row_marginal() const { return row_marginal_; }
  const std::vector<double>& col_marginal() const { return col_marginal_; }

  // Largest deviation of the cached marginals from the measures' weights.
  double marginal_residual(const DiscreteMeasure& mu, const DiscreteMeasure& nu) const;

 private:
  int n1_ = 0;
  int n2_ = 0;
  std::vector<PlanEntry> entries_;
  std::vector<double> row_marginal_;
  std::vector<double> col_marginal_;
};

// |x - y|^2 with a dimension check.
double squared_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Exact minimizer of sum_ij gamma_ij |x_i - y_j|^2 over couplings of mu and
// nu (transportation simplex).  The support of the result has at most
// n1 + n2 entries.
CouplingPlan solve_optimal_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

double transport_cost(const CouplingPlan& plan, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu);

// sqrt of the optimal transport cost.
double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Image measure: applies the map to every atom, weights unchanged.
DiscreteMeasure pushforward(const DiscreteMeasure& mu,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map);

}  // namespace otflow
