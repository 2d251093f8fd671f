// Transportation simplex for the quadratic-cost coupling problem.
//
// North-west-corner start, Dantzig entering rule with lexicographic
// tie-breaks, spanning-tree basis.  Degeneracy is handled by a deterministic
// lexicographic perturbation of the supplies; after optimality the masses are
// recomputed exactly from the unperturbed weights on the final basis tree
// (optimality of a basis depends only on reduced costs, never on masses).
// A pivot-count cap switches the entering rule to Bland's, which terminates
// even on degenerate instances; if the exact recomputation ever produced a
// negative mass the solve would rerun unperturbed with Bland's rule from the
// start.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "otflow/measure.hpp"

namespace otflow {

namespace {

constexpr double kReducedCostTol = 1e-11;
constexpr double kDropMassTol = 1e-14;
constexpr double kNegativeMassTol = -1e-12;
constexpr std::int64_t kDenseCostLimit = 4000000;

struct Arc {
  int row;
  int col;
  double mass;
};

class TransportSimplex {
 public:
  TransportSimplex(const DiscreteMeasure& mu, const DiscreteMeasure& nu)
      : mu_(mu), nu_(nu), m_(mu.size()), n_(nu.size()), dim_(mu.dim()) {
    if (static_cast<std::int64_t>(m_) * n_ <= kDenseCostLimit) {
      dense_cost_.resize(static_cast<std::size_t>(m_) * static_cast<std::size_t>(n_));
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < n_; ++j)
          dense_cost_[static_cast<std::size_t>(i) * n_ + j] =
              (mu_.atom(i) - nu_.atom(j)).squaredNorm();
    } else {
      // Lazy costs from flat coordinate arrays.
      xflat_.resize(static_cast<std::size_t>(m_) * dim_);
      yflat_.resize(static_cast<std::size_t>(n_) * dim_);
      xsq_.resize(static_cast<std::size_t>(m_));
      ysq_.resize(static_cast<std::size_t>(n_));
      for (int i = 0; i < m_; ++i) {
        for (int d = 0; d < dim_; ++d)
          xflat_[static_cast<std::size_t>(i) * dim_ + d] = mu_.atom(i)[d];
        xsq_[static_cast<std::size_t>(i)] = mu_.atom(i).squaredNorm();
      }
      for (int j = 0; j < n_; ++j) {
        for (int d = 0; d < dim_; ++d)
          yflat_[static_cast<std::size_t>(j) * dim_ + d] = nu_.atom(j)[d];
        ysq_[static_cast<std::size_t>(j)] = nu_.atom(j).squaredNorm();
      }
    }
    rows_per_block_ = std::max(1, static_cast<int>(65536 / std::max(1, n_)));
    n_blocks_ = (m_ + rows_per_block_ - 1) / rows_per_block_;
  }

  // perturb: lexicographic supply perturbation; bland: Bland's rule from the
  // first pivot on.
  bool run(bool perturb, bool bland, std::vector<PlanEntry>* out) {
    supplies_.assign(mu_.weights().begin(), mu_.weights().end());
    demands_.assign(nu_.weights().begin(), nu_.weights().end());
    if (perturb) {
      const double unit = 2e-12 / (static_cast<double>(m_) * (static_cast<double>(m_) + 1.0));
      double added = 0.0;
      for (int i = 0; i < m_; ++i) {
        supplies_[static_cast<std::size_t>(i)] += unit * (i + 1);
        added += unit * (i + 1);
      }
      demands_[static_cast<std::size_t>(n_ - 1)] += added;
    }

    northwest_corner();
    cursor_ = 0;
    const long pivot_cap = static_cast<long>(m_ + n_) * 50;
    long pivots = 0;
    while (true) {
      compute_duals();
      int ei = -1, ej = -1;
      const bool use_bland = bland || pivots >= pivot_cap;
      if (!find_entering(use_bland, &ei, &ej)) break;
      pivot(ei, ej);
      ++pivots;
    }
    return extract(out);
  }

 private:
  double cost(int i, int j) const {
    if (!dense_cost_.empty())
      return dense_cost_[static_cast<std::size_t>(i) * n_ + j];
    const double* x = &xflat_[static_cast<std::size_t>(i) * dim_];
    const double* y = &yflat_[static_cast<std::size_t>(j) * dim_];
    double dot = 0.0;
    for (int d = 0; d < dim_; ++d) dot += x[d] * y[d];
    return xsq_[static_cast<std::size_t>(i)] + ysq_[static_cast<std::size_t>(j)] - 2.0 * dot;
  }

  int col_node(int j) const { return m_ + j; }

  void add_arc(int row, int col, double mass) {
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back(Arc{row, col, mass});
    adj_[static_cast<std::size_t>(row)].push_back(id);
    adj_[static_cast<std::size_t>(col_node(col))].push_back(id);
  }

  void remove_arc(int id) {
    auto drop = [&](int node) {
      auto& list = adj_[static_cast<std::size_t>(node)];
      list.erase(std::find(list.begin(), list.end(), id));
    };
    drop(arcs_[static_cast<std::size_t>(id)].row);
    drop(col_node(arcs_[static_cast<std::size_t>(id)].col));
    dead_.push_back(id);
    arcs_[static_cast<std::size_t>(id)].row = -1;
  }

  void insert_arc(int row, int col, double mass) {
    if (!dead_.empty()) {
      const int id = dead_.back();
      dead_.pop_back();
      arcs_[static_cast<std::size_t>(id)] = Arc{row, col, mass};
      adj_[static_cast<std::size_t>(row)].push_back(id);
      adj_[static_cast<std::size_t>(col_node(col))].push_back(id);
    } else {
      add_arc(row, col, mass);
    }
  }

  void northwest_corner() {
    arcs_.clear();
    dead_.clear();
    adj_.assign(static_cast<std::size_t>(m_ + n_), {});
    arcs_.reserve(static_cast<std::size_t>(m_ + n_));
    std::vector<double> ra = supplies_;
    std::vector<double> rb = demands_;
    int i = 0, j = 0;
    while (true) {
      const double take = std::min(ra[static_cast<std::size_t>(i)], rb[static_cast<std::size_t>(j)]);
      add_arc(i, j, take);
      ra[static_cast<std::size_t>(i)] -= take;
      rb[static_cast<std::size_t>(j)] -= take;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (j == n_ - 1 || (i < m_ - 1 && ra[static_cast<std::size_t>(i)] <= rb[static_cast<std::size_t>(j)]))
        ++i;
      else
        ++j;
    }
  }

  // Tree walk from row 0 with u[0] = 0; u_i + v_j = c_ij on basic arcs.
  void compute_duals() {
    u_.assign(static_cast<std::size_t>(m_), 0.0);
    v_.assign(static_cast<std::size_t>(n_), 0.0);
    std::vector<char> seen(static_cast<std::size_t>(m_ + n_), 0);
    stack_.clear();
    stack_.push_back(0);
    seen[0] = 1;
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      for (int id : adj_[static_cast<std::size_t>(node)]) {
        const Arc& a = arcs_[static_cast<std::size_t>(id)];
        const int other = (node == a.row) ? col_node(a.col) : a.row;
        if (seen[static_cast<std::size_t>(other)]) continue;
        seen[static_cast<std::size_t>(other)] = 1;
        if (other >= m_)
          v_[static_cast<std::size_t>(other - m_)] = cost(a.row, a.col) - u_[static_cast<std::size_t>(a.row)];
        else
          u_[static_cast<std::size_t>(other)] = cost(a.row, a.col) - v_[static_cast<std::size_t>(a.col)];
        stack_.push_back(other);
      }
    }
  }

  // Most negative reduced cost within a row range; lexicographic ties.
  bool scan_rows(int i_begin, int i_end, int* ei, int* ej, bool first_hit) const {
    double best = -kReducedCostTol;
    bool found = false;
    for (int i = i_begin; i < i_end; ++i) {
      const double ui = u_[static_cast<std::size_t>(i)];
      const double* row = dense_cost_.empty()
                              ? nullptr
                              : &dense_cost_[static_cast<std::size_t>(i) * n_];
      for (int j = 0; j < n_; ++j) {
        const double r = (row ? row[j] : cost(i, j)) - ui - v_[static_cast<std::size_t>(j)];
        if (r < best) {
          best = r;
          *ei = i;
          *ej = j;
          found = true;
          if (first_hit) return true;
        }
      }
    }
    return found;
  }

  // Block pricing: rotate over row blocks, take the most negative reduced
  // cost inside the first block that has one.  Bland mode scans everything in
  // lexicographic order and enters at the first violation, which terminates
  // even under degeneracy.
  bool find_entering(bool bland, int* ei, int* ej) {
    if (bland) return scan_rows(0, m_, ei, ej, /*first_hit=*/true);
    for (int step = 0; step < n_blocks_; ++step) {
      const int b = (cursor_ + step) % n_blocks_;
      const int lo = b * rows_per_block_;
      const int hi = std::min(m_, lo + rows_per_block_);
      if (scan_rows(lo, hi, ei, ej, /*first_hit=*/false)) {
        cursor_ = b;
        return true;
      }
    }
    return false;
  }

  // Tree path between the entering arc's endpoints; arcs along the path
  // alternate -,+,-,... starting from the entering row.
  void pivot(int ei, int ej) {
    const int src = ei;
    const int dst = col_node(ej);
    parent_.assign(static_cast<std::size_t>(m_ + n_), -1);
    parent_arc_.assign(static_cast<std::size_t>(m_ + n_), -1);
    stack_.clear();
    stack_.push_back(src);
    parent_[static_cast<std::size_t>(src)] = src;
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      if (node == dst) break;
      for (int id : adj_[static_cast<std::size_t>(node)]) {
        const Arc& a = arcs_[static_cast<std::size_t>(id)];
        const int other = (node == a.row) ? col_node(a.col) : a.row;
        if (parent_[static_cast<std::size_t>(other)] >= 0) continue;
        parent_[static_cast<std::size_t>(other)] = node;
        parent_arc_[static_cast<std::size_t>(other)] = id;
        stack_.push_back(other);
      }
    }

    path_.clear();
    for (int node = dst; node != src; node = parent_[static_cast<std::size_t>(node)])
      path_.push_back(parent_arc_[static_cast<std::size_t>(node)]);
    std::reverse(path_.begin(), path_.end());

    // path_[0] leaves src, so it carries sign -, then alternating.  Leaving
    // arc: smallest mass among minus arcs, ties by (row, col).
    double delta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t p = 0; p < path_.size(); p += 2) {
      const int id = path_[p];
      const Arc& a = arcs_[static_cast<std::size_t>(id)];
      if (a.mass < delta || (a.mass == delta && better_lex(id, leaving))) {
        delta = a.mass;
        leaving = id;
      }
    }

    double sign = -1.0;
    for (int id : path_) {
      Arc& a = arcs_[static_cast<std::size_t>(id)];
      a.mass = std::max(0.0, a.mass + sign * delta);
      sign = -sign;
    }
    remove_arc(leaving);
    insert_arc(ei, ej, delta);
  }

  bool better_lex(int id, int against) const {
    if (against < 0) return true;
    const Arc& a = arcs_[static_cast<std::size_t>(id)];
    const Arc& b = arcs_[static_cast<std::size_t>(against)];
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  }

  // Exact masses from the unperturbed weights by leaf elimination on the
  // basis tree.  Returns false when a mass comes out significantly negative.
  bool extract(std::vector<PlanEntry>* out) {
    std::vector<double> resid(static_cast<std::size_t>(m_ + n_), 0.0);
    for (int i = 0; i < m_; ++i) resid[static_cast<std::size_t>(i)] = mu_.weight(i);
    for (int j = 0; j < n_; ++j) resid[static_cast<std::size_t>(col_node(j))] = -nu_.weight(j);

    std::vector<int> degree(static_cast<std::size_t>(m_ + n_), 0);
    for (int node = 0; node < m_ + n_; ++node)
      degree[static_cast<std::size_t>(node)] = static_cast<int>(adj_[static_cast<std::size_t>(node)].size());
    std::vector<char> arc_done(arcs_.size(), 0);
    std::vector<double> mass(arcs_.size(), 0.0);
    std::vector<int> leaves;
    for (int node = 0; node < m_ + n_; ++node)
      if (degree[static_cast<std::size_t>(node)] == 1) leaves.push_back(node);

    while (!leaves.empty()) {
      const int node = leaves.back();
      leaves.pop_back();
      int live = -1;
      for (int id : adj_[static_cast<std::size_t>(node)])
        if (!arc_done[static_cast<std::size_t>(id)]) live = id;
      if (live < 0) continue;
      const Arc& a = arcs_[static_cast<std::size_t>(live)];
      const bool at_row = (node < m_);
      // Row residual is outstanding supply, column residual is -demand.
      const double flow = at_row ? resid[static_cast<std::size_t>(node)]
                                 : -resid[static_cast<std::size_t>(node)];
      mass[static_cast<std::size_t>(live)] = flow;
      arc_done[static_cast<std::size_t>(live)] = 1;
      resid[static_cast<std::size_t>(node)] = 0.0;
      const int other = at_row ? col_node(a.col) : a.row;
      if (at_row)
        resid[static_cast<std::size_t>(other)] += flow;
      else
        resid[static_cast<std::size_t>(other)] -= flow;
      if (--degree[static_cast<std::size_t>(other)] == 1) leaves.push_back(other);
      --degree[static_cast<std::size_t>(node)];
    }

    out->clear();
    for (std::size_t id = 0; id < arcs_.size(); ++id) {
      const Arc& a = arcs_[id];
      if (a.row < 0) continue;
      const double w = mass[id];
      if (w < kNegativeMassTol) return false;
      if (w < kDropMassTol) continue;
      out->push_back(PlanEntry{a.row, a.col, w});
    }
    return true;
  }

  const DiscreteMeasure& mu_;
  const DiscreteMeasure& nu_;
  int m_;
  int n_;
  int dim_;
  int rows_per_block_ = 1;
  int n_blocks_ = 1;
  int cursor_ = 0;
  std::vector<double> dense_cost_;
  std::vector<double> xflat_;
  std::vector<double> yflat_;
  std::vector<double> xsq_;
  std::vector<double> ysq_;
  std::vector<double> supplies_;
  std::vector<double> demands_;
  std::vector<Arc> arcs_;
  std::vector<int> dead_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<int> stack_;
  std::vector<int> parent_;
  std::vector<int> parent_arc_;
  std::vector<int> path_;
};

}  // namespace

CouplingPlan solve_optimal_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("solve_optimal_plan: dimension mismatch");
  TransportSimplex simplex(mu, nu);
  std::vector<PlanEntry> entries;
  if (!simplex.run(/*perturb=*/true, /*bland=*/false, &entries)) {
    if (!simplex.run(/*perturb=*/false, /*bland=*/true, &entries))
      throw std::runtime_error("solve_optimal_plan: negative basis mass on exact weights");
  }
  return CouplingPlan(mu.size(), nu.size(), std::move(entries));
}

}  // namespace otflow
