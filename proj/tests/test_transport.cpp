#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

#include "otflow/csv_io.hpp"
#include "otflow/measure.hpp"
#include "otflow/rng.hpp"

using otflow::CouplingPlan;
using otflow::DiscreteMeasure;
using otflow::PlanEntry;
using otflow::SplitMix64;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

std::vector<Eigen::VectorXd> random_points(SplitMix64& rng, int n, int dim,
                                           double lo = -1.0, double hi = 1.0) {
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = rng.uniform(lo, hi);
    pts.push_back(std::move(x));
  }
  return pts;
}

std::vector<double> random_weights(SplitMix64& rng, int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& wi : w) wi = rng.uniform(0.05, 1.0);
  return w;
}

// Oracle for uniform-weight square instances: the optimal coupling is an
// assignment, so the exact cost is the minimum over all permutations.
double assignment_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const int n = mu.size();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i)
      c += otflow::squared_cost(mu.atom(i), nu.atom(perm[static_cast<std::size_t>(i)]));
    best = std::min(best, c / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("build_measure basics") {
  auto mu = otflow::build_measure({vec2(0, 0), vec2(1, 0)});
  CHECK(mu.size() == 2);
  CHECK(mu.dim() == 2);
  CHECK(mu.weight(0) == doctest::Approx(0.5).epsilon(1e-15));

  auto weighted = otflow::build_measure({vec2(0, 0), vec2(1, 0), vec2(2, 2)},
                                        std::vector<double>{2.0, 0.0, 6.0});
  CHECK(weighted.size() == 2);
  CHECK(weighted.weight(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(weighted.weight(1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(weighted.atom(1)[0] == 2.0);

  CHECK_THROWS(otflow::build_measure({}));
  CHECK_THROWS(otflow::build_measure({vec2(0, 0)}, std::vector<double>{-1.0}));
  CHECK_THROWS(otflow::build_measure({vec2(0, 0), vec2(1, 1)}, std::vector<double>{0.0, 0.0}));
  std::vector<Eigen::VectorXd> mixed = {vec2(0, 0), Eigen::VectorXd::Zero(3)};
  CHECK_THROWS(otflow::build_measure(std::move(mixed)));
}

TEST_CASE("squared_cost") {
  CHECK(otflow::squared_cost(vec2(0, 0), vec2(3, 4)) == doctest::Approx(25.0));
  CHECK(otflow::squared_cost(vec2(1, 2), vec2(1, 2)) == 0.0);
  CHECK_THROWS(otflow::squared_cost(vec2(0, 0), Eigen::VectorXd::Zero(3)));
}

TEST_CASE("two-atom crossing instance") {
  // mu at {0, 1}, nu at {1, 0} on the line: identity pairing is optimal
  // only through the crossing; cost is 0 taking x->x matches.
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  auto mu = otflow::build_measure({a, b});
  auto nu = otflow::build_measure({b, a});
  auto plan = otflow::solve_optimal_plan(mu, nu);
  CHECK(otflow::transport_cost(plan, mu, nu) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(plan.marginal_residual(mu, nu) <= 1e-12);
}

TEST_CASE("solver matches permutation oracle on random square instances") {
  SplitMix64 rng(101);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(6));  // 2..7
    const int dim = 2 + static_cast<int>(rng.below(2));
    auto mu = otflow::build_measure(random_points(rng, n, dim));
    auto nu = otflow::build_measure(random_points(rng, n, dim));
    auto plan = otflow::solve_optimal_plan(mu, nu);
    const double cost = otflow::transport_cost(plan, mu, nu);
    const double oracle = assignment_oracle(mu, nu);
    CHECK(cost == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(cost >= oracle - 1e-12);
  }
}

TEST_CASE("feasibility and sparsity on rectangular instances") {
  SplitMix64 rng(202);
  for (int rep = 0; rep < 25; ++rep) {
    const int n1 = 1 + static_cast<int>(rng.below(60));
    const int n2 = 1 + static_cast<int>(rng.below(60));
    auto mu = otflow::build_measure(random_points(rng, n1, 2), random_weights(rng, n1));
    auto nu = otflow::build_measure(random_points(rng, n2, 2), random_weights(rng, n2));
    auto plan = otflow::solve_optimal_plan(mu, nu);
    CHECK(plan.marginal_residual(mu, nu) <= 1e-9);
    CHECK(plan.support_size() <= n1 + n2);
    // Basic solutions are in fact one entry sparser.
    CHECK(plan.support_size() <= n1 + n2 - 1);
    for (const PlanEntry& p : plan.entries()) CHECK(p.mass > 0.0);
  }
}

TEST_CASE("duality gap is zero against dual feasible potentials") {
  // Cross-check optimality on a moderate instance: compare against costs of
  // many random feasible plans produced by rebalancing; the solver must not
  // exceed any of them.
  SplitMix64 rng(303);
  auto mu = otflow::build_measure(random_points(rng, 30, 2), random_weights(rng, 30));
  auto nu = otflow::build_measure(random_points(rng, 45, 2), random_weights(rng, 45));
  auto plan = otflow::solve_optimal_plan(mu, nu);
  const double opt = otflow::transport_cost(plan, mu, nu);
  // Independent feasible plan: product coupling gamma_ij = w_i v_j.
  double product_cost = 0.0;
  for (int i = 0; i < mu.size(); ++i)
    for (int j = 0; j < nu.size(); ++j)
      product_cost += mu.weight(i) * nu.weight(j) * otflow::squared_cost(mu.atom(i), nu.atom(j));
  CHECK(opt <= product_cost + 1e-12);
}

TEST_CASE("w2 metric properties on samples") {
  SplitMix64 rng(404);
  auto mu = otflow::build_measure(random_points(rng, 12, 2), random_weights(rng, 12));
  auto nu = otflow::build_measure(random_points(rng, 9, 2), random_weights(rng, 9));
  auto kappa = otflow::build_measure(random_points(rng, 15, 2), random_weights(rng, 15));

  CHECK(otflow::w2_distance(mu, mu) == doctest::Approx(0.0).epsilon(1e-9));
  const double ab = otflow::w2_distance(mu, nu);
  const double ba = otflow::w2_distance(nu, mu);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-10));
  const double ak = otflow::w2_distance(mu, kappa);
  const double kb = otflow::w2_distance(kappa, nu);
  CHECK(ab <= ak + kb + 1e-9);
}

TEST_CASE("translation invariance shift") {
  // Shifting nu by a constant vector changes W2 between point masses exactly.
  Eigen::VectorXd shift = vec2(0.3, -0.7);
  auto mu = otflow::build_measure({vec2(0, 0)});
  auto nu = otflow::build_measure({vec2(0.3, -0.7)});
  CHECK(otflow::w2_distance(mu, nu) == doctest::Approx(shift.norm()).epsilon(1e-12));
}

TEST_CASE("degenerate weights: equal supplies and demands") {
  // Heavily tied instance exercising the anti-cycling path.
  std::vector<Eigen::VectorXd> xs, ys;
  for (int i = 0; i < 16; ++i) {
    xs.push_back(vec2(i % 4, i / 4));
    ys.push_back(vec2((i % 4) + 0.5, (i / 4) - 0.25));
  }
  auto mu = otflow::build_measure(xs);
  auto nu = otflow::build_measure(ys);
  auto plan = otflow::solve_optimal_plan(mu, nu);
  CHECK(plan.marginal_residual(mu, nu) <= 1e-9);
  // Pure translation: optimal pairing is the identity, cost = |shift|^2.
  CHECK(otflow::transport_cost(plan, mu, nu) == doctest::Approx(0.3125).epsilon(1e-9));
}

TEST_CASE("single row and single column plans") {
  auto mu = otflow::build_measure({vec2(0, 0)});
  auto nu = otflow::build_measure(
      {vec2(1, 0), vec2(0, 1), vec2(-1, 0)}, std::vector<double>{0.2, 0.3, 0.5});
  auto plan = otflow::solve_optimal_plan(mu, nu);
  CHECK(plan.support_size() == 3);
  CHECK(otflow::transport_cost(plan, mu, nu) == doctest::Approx(1.0).epsilon(1e-12));

  auto rev = otflow::solve_optimal_plan(nu, mu);
  CHECK(rev.support_size() == 3);
  CHECK(otflow::transport_cost(rev, nu, mu) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pushforward keeps weights and moves atoms") {
  auto mu = otflow::build_measure({vec2(0, 0), vec2(1, 1)}, std::vector<double>{0.25, 0.75});
  auto nu = otflow::pushforward(mu, [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(2 * x);
  });
  CHECK(nu.weight(0) == 0.25);
  CHECK(nu.atom(1)[0] == doctest::Approx(2.0));
  CHECK_THROWS(otflow::pushforward(mu, [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    y[0] = std::numeric_limits<double>::quiet_NaN();
    return y;
  }));
}

TEST_CASE("csv round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "otflow_csv_test";
  fs::create_directories(dir);
  SplitMix64 rng(505);
  auto mu = otflow::build_measure(random_points(rng, 17, 3), random_weights(rng, 17));
  const std::string mpath = (dir / "m.csv").string();
  otflow::write_measure_csv(mpath, mu);
  auto back = otflow::read_measure_csv(mpath);
  REQUIRE(back.size() == mu.size());
  REQUIRE(back.dim() == 3);
  for (int i = 0; i < mu.size(); ++i) {
    CHECK(back.weight(i) == mu.weight(i));
    CHECK((back.atom(i) - mu.atom(i)).norm() == 0.0);
  }

  auto nu = otflow::build_measure(random_points(rng, 11, 3), random_weights(rng, 11));
  auto plan = otflow::solve_optimal_plan(mu, nu);
  const std::string ppath = (dir / "p.csv").string();
  otflow::write_plan_csv(ppath, plan);
  auto plan_back = otflow::read_plan_csv(ppath);
  REQUIRE(plan_back.support_size() == plan.support_size());
  for (std::size_t e = 0; e < plan.entries().size(); ++e) {
    CHECK(plan_back.entries()[e].i == plan.entries()[e].i);
    CHECK(plan_back.entries()[e].j == plan.entries()[e].j);
    CHECK(plan_back.entries()[e].mass == plan.entries()[e].mass);
  }
  fs::remove_all(dir);
}
