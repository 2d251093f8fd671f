// Acceptance suite: one printed pass/fail line per criterion, tolerances
// pinned below.  Criteria 8 and 9 share one trained desk-scale instance;
// criterion 11 shells out to the CLI binary (path injected by the build).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "otflow/evaluation.hpp"
#include "otflow/experiment.hpp"
#include "otflow/flow.hpp"
#include "otflow/measure.hpp"
#include "otflow/rng.hpp"
#include "otflow/trainer.hpp"

using namespace otflow;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-9;             // 1: solver vs permutation minimum
constexpr double kOracleBudgetSec = 5.0;        // 1
constexpr double kResidualTol = 1e-9;           // 2: marginal residuals
constexpr double kSparsityBudgetSec = 30.0;     // 2
constexpr double kMaximizerTol = 1e-8;          // 3: closed form vs numeric argmax
constexpr double kMaximizerBudgetSec = 1.0;     // 3
constexpr double kGradientRelTol = 1e-5;        // 4: adjoint vs finite differences
constexpr double kGradientBudgetSec = 10.0;     // 4
constexpr double kBoundsBudgetSec = 30.0;       // 5: growth/Lipschitz containment
constexpr double kDeskCostFraction = 0.1;       // 8: coupling cost vs initial W2^2
constexpr double kDeskMapErrorMax = 0.15;       // 8: L2 map error vs analytic map
constexpr double kDeskBudgetSec = 300.0;        // 8
constexpr double kGeodesicSlack = 1e-9;         // 9
constexpr double kGammaBudgetSec = 1200.0;      // 10

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", id, ": ", detail);
}

template <typename Fn>
void criterion(int id, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::vector<Eigen::VectorXd> random_points(SplitMix64& rng, int n, int dim) {
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = rng.uniform(-1.0, 1.0);
    pts.push_back(std::move(x));
  }
  return pts;
}

double assignment_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const int n = mu.size();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i)
      c += squared_cost(mu.atom(i), nu.atom(perm[static_cast<std::size_t>(i)]));
    best = std::min(best, c / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

ControlSchedule random_control(SplitMix64& rng, int M, int k, double scale) {
  Eigen::MatrixXd values(M, k);
  for (int l = 0; l < M; ++l)
    for (int j = 0; j < k; ++j) values(l, j) = rng.uniform(-scale, scale);
  return make_control(M, k, std::move(values));
}

// Desk-scale instance shared by criteria 6-9: pinned configuration, seed 1.
struct DeskRun {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  CouplingPlan plan;
  double initial_cost;
  TrainResult result;
  EvalReport report;
  PointMap exact;
  double seconds;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const FieldFamily field = make_hermite2d_family(10.0);
    const TargetMapConfig target;
    DiscreteMeasure mu = disc_triangulation(0.5, 0.08);
    DiscreteMeasure nu = sample_target(0.5, 400, std::uint64_t{1}, target);
    CouplingPlan plan = solve_optimal_plan(mu, nu);
    const double initial = transport_cost(plan, mu, nu);
    TrainerConfig config;  // beta = 5e-4 default
    TrainResult result = train(field, mu, nu, plan, config, 32);
    PointMap exact = [target](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return target_map(Eigen::Vector2d(x), target.Q, target.v, target.c);
    };
    EvalReport rep = evaluate(field, result.u, mu, nu, plan, &exact);
    const double secs = seconds_since(t0);
    return DeskRun{std::move(mu), std::move(nu), std::move(plan), initial,
                   std::move(result), std::move(rep), std::move(exact), secs};
  }();
  return run;
}

// Walks one training history against the accept/reject contract; returns a
// failure description or the empty string.
std::string check_history(const TrainResult& result, double cost0, double rho0,
                          double tau) {
  double last_cost = cost0;
  double last_rho = rho0;
  double best = cost0;
  for (const auto& rec : result.history) {
    if (rec.accepted) {
      if (!(rec.cost < last_cost)) return "accepted iteration did not decrease the cost";
      if (rec.rho != last_rho) return "accepted iteration changed rho";
      best = std::min(best, rec.cost);
    } else {
      if (rec.cost != last_cost) return "rejected iteration changed the cost";
      if (rec.rho != last_rho * tau) return "rejected iteration mis-scaled rho";
    }
    last_cost = rec.cost;
    last_rho = rec.rho;
  }
  if (result.cost != best) return "returned cost is not the best seen";
  return "";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing:" + path.string() + ">";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("criterion 1: solver matches the permutation oracle") {
  criterion(1, [] {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(101);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const int n = 2 + static_cast<int>(rng.below(6));
      const int dim = 2 + static_cast<int>(rng.below(2));
      const DiscreteMeasure mu = build_measure(random_points(rng, n, dim));
      const DiscreteMeasure nu = build_measure(random_points(rng, n, dim));
      const CouplingPlan plan = solve_optimal_plan(mu, nu);
      const double cost = transport_cost(plan, mu, nu);
      worst = std::max(worst, std::abs(cost - assignment_oracle(mu, nu)));
    }
    const double secs = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "50 instances (n <= 7), worst |cost - oracle| = %.3g (tol %.0e), %.2f s",
                  worst, kOracleTol, secs);
    report(1, worst <= kOracleTol && secs < kOracleBudgetSec, detail);
  });
}

TEST_CASE("criterion 2: plan feasibility and sparsity") {
  criterion(2, [] {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(202);
    double worst_residual = 0.0;
    int sparsity_violations = 0;
    for (int rep = 0; rep < 50; ++rep) {
      const int n1 = 2 + static_cast<int>(rng.below(199));
      const int n2 = 2 + static_cast<int>(rng.below(199));
      std::vector<double> w1, w2;
      for (int i = 0; i < n1; ++i) w1.push_back(rng.uniform(0.05, 1.0));
      for (int j = 0; j < n2; ++j) w2.push_back(rng.uniform(0.05, 1.0));
      const DiscreteMeasure mu = build_measure(random_points(rng, n1, 2), w1);
      const DiscreteMeasure nu = build_measure(random_points(rng, n2, 2), w2);
      const CouplingPlan plan = solve_optimal_plan(mu, nu);
      worst_residual = std::max(worst_residual, plan.marginal_residual(mu, nu));
      if (plan.support_size() > n1 + n2) ++sparsity_violations;
    }
    const double secs = seconds_since(t0);
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "50 instances (sizes <= 200), worst residual = %.3g (tol %.0e), "
                  "sparsity violations = %d, %.2f s",
                  worst_residual, kResidualTol, sparsity_violations, secs);
    report(2, worst_residual <= kResidualTol && sparsity_violations == 0 &&
                  secs < kSparsityBudgetSec,
           detail);
  });
}

TEST_CASE("criterion 3: hamiltonian maximizer vs numeric oracle") {
  criterion(3, [] {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(303);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const int k = 1 + static_cast<int>(rng.below(5));
      Eigen::VectorXd a(k), u(k);
      for (int j = 0; j < k; ++j) {
        a[j] = rng.uniform(-5.0, 5.0);
        u[j] = rng.uniform(-5.0, 5.0);
      }
      const double beta = rng.uniform(1e-4, 1e-2);
      const double rho = rng.uniform(0.01, 10.0);
      const Eigen::VectorXd closed = maximize_augmented_hamiltonian(a, u, beta, rho);
      // The objective is separable and strictly concave per component; bisect
      // its derivative a_j - beta t - (t - u_j)/rho to machine precision.
      for (int j = 0; j < k; ++j) {
        double lo = -1e4, hi = 1e4;
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double slope = a[j] - beta * mid - (mid - u[j]) / rho;
          (slope > 0.0 ? lo : hi) = mid;
        }
        worst = std::max(worst, std::abs(closed[j] - 0.5 * (lo + hi)));
      }
    }
    const double secs = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "100 random inputs, worst |closed - bisection| = %.3g (tol %.0e), %.3f s",
                  worst, kMaximizerTol, secs);
    report(3, worst <= kMaximizerTol && secs < kMaximizerBudgetSec, detail);
  });
}

TEST_CASE("criterion 4: adjoint gradient vs central differences") {
  criterion(4, [] {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(404);
    const FieldFamily field = make_hermite2d_family(10.0);
    const double beta = 5e-4;
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const DiscreteMeasure mu = build_measure(random_points(rng, 3, 2));
      const DiscreteMeasure nu = build_measure(random_points(rng, 3, 2));
      const CouplingPlan plan = solve_optimal_plan(mu, nu);
      const ControlSchedule u = random_control(rng, 4, field.channels(), 0.5);
      const Eigen::MatrixXd g = adjoint_gradient(field, u, mu, nu, plan, beta);
      const double eps = 1e-6;
      for (int l = 0; l < u.M; ++l) {
        for (int j = 0; j < u.k; ++j) {
          ControlSchedule up = u, um = u;
          up.values(l, j) += eps;
          um.values(l, j) -= eps;
          const double fd = (cost_functional(field, up, mu, nu, plan, beta) -
                             cost_functional(field, um, mu, nu, plan, beta)) /
                            (2.0 * eps);
          worst = std::max(worst, std::abs(g(l, j) - fd) / std::max(1.0, std::abs(fd)));
        }
      }
    }
    const double secs = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "20 instances (M=4, 14 channels), max relative error = %.3g (tol %.0e), %.2f s",
                  worst, kGradientRelTol, secs);
    report(4, worst <= kGradientRelTol && secs < kGradientBudgetSec, detail);
  });
}

TEST_CASE("criterion 5: growth and lipschitz containment") {
  criterion(5, [] {
    const auto t0 = std::chrono::steady_clock::now();
    SplitMix64 rng(505);
    const double radius = 1.0;
    int violations = 0;
    int checks = 0;
    for (int family = 0; family < 2; ++family) {
      const FieldFamily field = family == 0 ? make_translation_family(2)
                                            : make_hermite2d_family(10.0);
      for (int rep = 0; rep < 100; ++rep) {
        const int M = 8 + static_cast<int>(rng.below(25));
        ControlSchedule u = random_control(rng, M, field.channels(), 1.0);
        const double target_norm = 1.2 * rng.uniform01();
        if (l2_norm(u) > 0.0) u.values *= target_norm / l2_norm(u);
        const double unorm = l2_norm(u);
        Eigen::VectorXd x(2), y(2);
        for (int d = 0; d < 2; ++d) {
          x[d] = rng.uniform(-radius, radius) / std::sqrt(2.0);
          y[d] = rng.uniform(-radius, radius) / std::sqrt(2.0);
        }
        const Trajectory tx = flow_forward(field, u, x);
        const Trajectory ty = flow_forward(field, u, y);
        const double rbound = growth_bound(field, radius, unorm);
        const double lbound = lipschitz_bound(field, unorm);
        const double slack = 1.0 + 10.0 / M;
        for (int l = 0; l <= M; ++l) {
          ++checks;
          if (tx.states.col(l).norm() > rbound * slack) ++violations;
          if ((tx.states.col(l) - ty.states.col(l)).norm() >
              lbound * slack * (x - y).norm() + 1e-14)
            ++violations;
        }
      }
    }
    const double secs = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "200 controls x 2 bounds at every node (%d checks), violations = %d, %.2f s",
                  checks, violations, secs);
    report(5, violations == 0 && secs < kBoundsBudgetSec, detail);
  });
}

TEST_CASE("criterion 6: sweep accept/reject contract") {
  criterion(6, [] {
    const DeskRun& desk = desk_run();
    const FieldFamily hermite = make_hermite2d_family(10.0);
    TrainerConfig config;

    std::string failure = check_history(
        desk.result,
        cost_functional(hermite, zero_control(32, hermite.channels()), desk.mu, desk.nu,
                        desk.plan, config.beta),
        config.rho0, config.tau);

    if (failure.empty()) {
      SplitMix64 rng(606);
      const DiscreteMeasure mu = build_measure(random_points(rng, 6, 2));
      const DiscreteMeasure nu = build_measure(random_points(rng, 8, 2));
      const CouplingPlan plan = solve_optimal_plan(mu, nu);
      TrainerConfig small;
      small.max_iter = 80;
      small.rho0 = 4.0;  // provoke rejections as well
      const TrainResult result = train(hermite, mu, nu, plan, small, 16);
      failure = check_history(
          result,
          cost_functional(hermite, zero_control(16, hermite.channels()), mu, nu, plan,
                          small.beta),
          small.rho0, small.tau);
      if (failure.empty() && result.accepted == static_cast<int>(result.history.size()))
        failure = "backtracking was never exercised";
    }

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "desk history (%zu iters, %d accepted) and a backtracking run: %s",
                  desk.result.history.size(), desk.result.accepted,
                  failure.empty() ? "contract holds" : failure.c_str());
    report(6, failure.empty(), detail);
  });
}

TEST_CASE("criterion 7: minimizer norm bound") {
  criterion(7, [] {
    const DeskRun& desk = desk_run();
    const double beta = 5e-4;
    const double bound = minimizer_norm_bound(desk.mu, desk.nu, beta);
    const double desk_norm2 = l2_norm(desk.result.u) * l2_norm(desk.result.u);

    const FieldFamily hermite = make_hermite2d_family(10.0);
    SplitMix64 rng(707);
    const DiscreteMeasure mu = build_measure(random_points(rng, 5, 2));
    const DiscreteMeasure nu = build_measure(random_points(rng, 7, 2));
    const CouplingPlan plan = solve_optimal_plan(mu, nu);
    GradientDescentConfig gd;
    gd.beta = beta;
    gd.max_iter = 60;
    const TrainResult gd_result = gradient_descent_train(hermite, mu, nu, plan, gd, 16);
    const double gd_norm2 = l2_norm(gd_result.u) * l2_norm(gd_result.u);
    const double gd_bound = minimizer_norm_bound(mu, nu, beta);

    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "desk ||u||^2 = %.4g <= %.4g; gd ||u||^2 = %.4g <= %.4g",
                  desk_norm2, bound, gd_norm2, gd_bound);
    report(7, desk_norm2 <= bound && gd_norm2 <= gd_bound, detail);
  });
}

TEST_CASE("criterion 8: desk-scale reproduction quality and budget") {
  criterion(8, [] {
    const DeskRun& desk = desk_run();
    const double fraction = desk.report.coupling_cost / desk.initial_cost;
    const double l2 = desk.report.l2_map_error.value();
    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "coupling cost %.4g = %.2f%% of initial W2^2 %.4g (gate %.0f%%), "
                  "L2 map error %.4g (gate %.2f), %.1f s (gate %.0f s)",
                  desk.report.coupling_cost, 100.0 * fraction, desk.initial_cost,
                  100.0 * kDeskCostFraction, l2, kDeskMapErrorMax, desk.seconds,
                  kDeskBudgetSec);
    report(8, fraction <= kDeskCostFraction && l2 <= kDeskMapErrorMax &&
                  desk.seconds <= kDeskBudgetSec,
           detail);
  });
}

TEST_CASE("criterion 9: geodesic deviation bound") {
  criterion(9, [] {
    const DeskRun& desk = desk_run();
    const FieldFamily field = make_hermite2d_family(10.0);
    const double l2 = desk.report.l2_map_error.value();
    const auto samples =
        geodesic_deviation(field, desk.result.u, desk.mu, desk.exact, {0.25, 0.5, 0.75});
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples)
      worst_excess = std::max(worst_excess, s.actual - (s.t * l2 + kGeodesicSlack));
    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "W2 deviations {%.3g, %.3g, %.3g} vs bounds {%.3g, %.3g, %.3g}",
                  samples[0].actual, samples[1].actual, samples[2].actual,
                  0.25 * l2, 0.5 * l2, 0.75 * l2);
    report(9, worst_excess <= 0.0, detail);
  });
}

TEST_CASE("criterion 10: refinement ladder trend") {
  criterion(10, [] {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig base;  // desk defaults: hermite2d zeta=10, M=32, beta=5e-4
    base.seed = 1;
    const auto rows = gamma_convergence_study(base, default_gamma_ladder());
    std::vector<double> gaps;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
      gaps.push_back(std::abs(rows[i + 1].min_cost - rows[i].min_cost));
    const double secs = seconds_since(t0);
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "minima {%.4g, %.4g, %.4g, %.4g}, gaps {%.3g, %.3g, %.3g}, "
                  "final <= first: %s, %.1f s (gate %.0f s)",
                  rows[0].min_cost, rows[1].min_cost, rows[2].min_cost, rows[3].min_cost,
                  gaps[0], gaps[1], gaps[2], gaps.back() <= gaps.front() ? "yes" : "no",
                  secs, kGammaBudgetSec);
    report(10, gaps.back() <= gaps.front() && secs < kGammaBudgetSec, detail);
  });
}

TEST_CASE("criterion 11: bit-identical reproduction via the CLI") {
  criterion(11, [] {
    const fs::path dir1 = fs::temp_directory_path() / "otflow_accept_det1";
    const fs::path dir2 = fs::temp_directory_path() / "otflow_accept_det2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    const std::string base = std::string(OTFLOW_CLI_PATH) +
                             " reproduce-paper --desk --seed 1 --out ";
    const int rc1 = std::system((base + dir1.string() + " > /dev/null 2>&1").c_str());
    const int rc2 = std::system((base + dir2.string() + " > /dev/null 2>&1").c_str());
    if (rc1 != 0 || rc2 != 0) {
      report(11, false, "CLI invocation failed");
      return;
    }
    const char* artifacts[] = {"mu_N.csv",     "nu_N.csv", "plan.csv",
                               "control.json", "run.json", "eval.json",
                               "measures.svg", "pushforward.svg", "map_comparison.svg"};
    int identical = 0;
    std::string first_diff;
    for (const char* name : artifacts) {
      if (slurp(dir1 / name) == slurp(dir2 / name))
        ++identical;
      else if (first_diff.empty())
        first_diff = name;
    }
    char detail[200];
    std::snprintf(detail, sizeof(detail), "%d/9 data artifacts byte-identical%s%s",
                  identical, first_diff.empty() ? "" : ", first difference: ",
                  first_diff.c_str());
    report(11, identical == 9, detail);
  });
}
