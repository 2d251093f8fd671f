#include "otflow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otflow {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Eigen::VectorXd> atoms,
                                 std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  require(!atoms_.empty(), "measure: no atoms");
  require(atoms_.size() == weights_.size(), "measure: atom/weight count mismatch");
  dim_ = static_cast<int>(atoms_.front().size());
  require(dim_ > 0, "measure: zero-dimensional atom");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    require(atoms_[i].size() == dim_, "measure: mixed atom dimensions");
    require(atoms_[i].allFinite(), "measure: non-finite atom");
    require(std::isfinite(weights_[i]) && weights_[i] > 0.0,
            "measure: weights must be positive and finite");
    total += weights_[i];
  }
  require(std::abs(total - 1.0) <= 1e-9, "measure: weights must sum to one");
}

DiscreteMeasure build_measure(std::vector<Eigen::VectorXd> points,
                              std::optional<std::vector<double>> weights) {
  require(!points.empty(), "build_measure: no points");
  std::vector<double> w;
  if (weights) {
    require(weights->size() == points.size(), "build_measure: weight count mismatch");
    w = std::move(*weights);
  } else {
    w.assign(points.size(), 1.0);
  }
  double total = 0.0;
  for (double wi : w) {
    require(std::isfinite(wi) && wi >= 0.0, "build_measure: negative or non-finite weight");
    total += wi;
  }
  require(total > 0.0, "build_measure: total mass is zero");

  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> norm;
  atoms.reserve(points.size());
  norm.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (w[i] == 0.0) continue;
    atoms.push_back(std::move(points[i]));
    norm.push_back(w[i] / total);
  }
  return DiscreteMeasure(std::move(atoms), std::move(norm));
}

CouplingPlan::CouplingPlan(int n1, int n2, std::vector<PlanEntry> entries)
    : n1_(n1), n2_(n2), entries_(std::move(entries)) {
  require(n1_ > 0 && n2_ > 0, "plan: empty marginal sizes");
  std::sort(entries_.begin(), entries_.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  row_marginal_.assign(static_cast<std::size_t>(n1_), 0.0);
  col_marginal_.assign(static_cast<std::size_t>(n2_), 0.0);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    const PlanEntry& p = entries_[e];
    require(p.i >= 0 && p.i < n1_ && p.j >= 0 && p.j < n2_, "plan: entry out of range");
    require(std::isfinite(p.mass) && p.mass > 0.0, "plan: entry mass must be positive");
    if (e > 0)
      require(entries_[e - 1].i != p.i || entries_[e - 1].j != p.j, "plan: duplicate entry");
    row_marginal_[static_cast<std::size_t>(p.i)] += p.mass;
    col_marginal_[static_cast<std::size_t>(p.j)] += p.mass;
  }
}

double CouplingPlan::marginal_residual(const DiscreteMeasure& mu,
                                       const DiscreteMeasure& nu) const {
  require(mu.size() == n1_ && nu.size() == n2_, "plan: marginal size mismatch");
  double worst = 0.0;
  for (int i = 0; i < n1_; ++i)
    worst = std::max(worst, std::abs(row_marginal_[static_cast<std::size_t>(i)] - mu.weight(i)));
  for (int j = 0; j < n2_; ++j)
    worst = std::max(worst, std::abs(col_marginal_[static_cast<std::size_t>(j)] - nu.weight(j)));
  return worst;
}

double squared_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require(x.size() == y.size(), "squared_cost: dimension mismatch");
  return (x - y).squaredNorm();
}

double transport_cost(const CouplingPlan& plan, const DiscreteMeasure& mu,
                      const DiscreteMeasure& nu) {
  require(plan.n1() == mu.size() && plan.n2() == nu.size(),
          "transport_cost: plan does not match measures");
  double cost = 0.0;
  for (const PlanEntry& p : plan.entries())
    cost += p.mass * squared_cost(mu.atom(p.i), nu.atom(p.j));
  return cost;
}

double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  CouplingPlan plan = solve_optimal_plan(mu, nu);
  return std::sqrt(std::max(0.0, transport_cost(plan, mu, nu)));
}

DiscreteMeasure pushforward(const DiscreteMeasure& mu,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map) {
  std::vector<Eigen::VectorXd> atoms;
  atoms.reserve(static_cast<std::size_t>(mu.size()));
  for (const Eigen::VectorXd& x : mu.atoms()) {
    Eigen::VectorXd y = map(x);
    require(y.allFinite(), "pushforward: map produced non-finite point");
    atoms.push_back(std::move(y));
  }
  return DiscreteMeasure(std::move(atoms), mu.weights());
}

}  // namespace otflow
