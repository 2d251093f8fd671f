#include "otflow/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "otflow/csv_io.hpp"
#include "otflow/flow.hpp"
#include "otflow/svg.hpp"

namespace otflow {

namespace fs = std::filesystem;

void TargetMapConfig::validate() const {
  if (std::abs(Q(0, 1) - Q(1, 0)) > 1e-12)
    throw std::invalid_argument("target map: Q must be symmetric");
  if (Q(0, 0) <= 0.0 || Q.determinant() <= 0.0)
    throw std::invalid_argument("target map: Q must be positive definite");
  if (c <= 0.0) throw std::invalid_argument("target map: c must be positive");
}

double target_potential(const Eigen::Vector2d& x, const Eigen::Matrix2d& Q,
                        const Eigen::Vector2d& v, double c) {
  const Eigen::Vector2d d = x - v;
  const double q = d.dot(Q * d) + c;
  if (q <= 0.0) throw std::invalid_argument("target map: non-positive radicand");
  return std::sqrt(q);
}

Eigen::Vector2d target_map(const Eigen::Vector2d& x, const Eigen::Matrix2d& Q,
                           const Eigen::Vector2d& v, double c) {
  const Eigen::Vector2d d = x - v;
  const double q = d.dot(Q * d) + c;
  if (q <= 0.0) throw std::invalid_argument("target map: non-positive radicand");
  return (Q * d) / std::sqrt(q);
}

DiscreteMeasure disc_triangulation(double radius, double spacing) {
  if (radius <= 0.0 || spacing <= 0.0)
    throw std::invalid_argument("disc triangulation: radius and spacing must be positive");
  const double row_h = spacing * std::sqrt(3.0) / 2.0;
  const int rmax = static_cast<int>(std::floor(radius / row_h));
  std::vector<Eigen::VectorXd> points;
  for (int r = -rmax; r <= rmax; ++r) {
    const double y = r * row_h;
    const bool odd = ((r % 2) + 2) % 2 == 1;
    const double off = odd ? spacing / 2.0 : 0.0;
    const int mmax = static_cast<int>(std::floor(radius / spacing)) + 1;
    for (int m = -mmax; m <= mmax; ++m) {
      const double x = m * spacing + off;
      if (x * x + y * y <= radius * radius)
        points.push_back(Eigen::Vector2d(x, y));
    }
  }
  if (points.empty())
    throw std::invalid_argument("disc triangulation: no lattice point inside the disc");
  return build_measure(std::move(points));
}

std::vector<Eigen::VectorXd> sample_disc(double radius, int n, SplitMix64& rng) {
  if (radius <= 0.0 || n < 1)
    throw std::invalid_argument("sample_disc: need positive radius and n >= 1");
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(points.size()) < n) {
    const double x = rng.uniform(-radius, radius);
    const double y = rng.uniform(-radius, radius);
    if (x * x + y * y <= radius * radius) points.push_back(Eigen::Vector2d(x, y));
  }
  return points;
}

DiscreteMeasure sample_target(double radius, int n_samples, SplitMix64 rng,
                              const TargetMapConfig& target) {
  target.validate();
  std::vector<Eigen::VectorXd> points = sample_disc(radius, n_samples, rng);
  for (auto& p : points)
    p = target_map(Eigen::Vector2d(p), target.Q, target.v, target.c);
  return build_measure(std::move(points));
}

DiscreteMeasure sample_target(double radius, int n_samples, std::uint64_t seed,
                              const TargetMapConfig& target) {
  return sample_target(radius, n_samples, SplitMix64(seed), target);
}

void ExperimentConfig::validate() const {
  if (radius <= 0.0) throw std::invalid_argument("experiment: radius must be positive");
  if (spacing <= 0.0) throw std::invalid_argument("experiment: spacing must be positive");
  if (target_samples < 1) throw std::invalid_argument("experiment: need target_samples >= 1");
  if (steps < 2) throw std::invalid_argument("experiment: need steps >= 2");
  if (beta <= 0.0) throw std::invalid_argument("experiment: beta must be positive");
  if (method != "pmp" && method != "gd")
    throw std::invalid_argument("experiment: method must be 'pmp' or 'gd'");
  if (eval_refine < 1) throw std::invalid_argument("experiment: eval_refine must be >= 1");
  target.validate();
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["field"] = config.field;
  j["radius"] = config.radius;
  j["spacing"] = config.spacing;
  j["target_samples"] = config.target_samples;
  j["seed"] = config.seed;
  j["steps"] = config.steps;
  j["beta"] = config.beta;
  j["method"] = config.method;
  j["trainer"] = {{"rho0", config.trainer.rho0},
                  {"tau", config.trainer.tau},
                  {"max_iter", config.trainer.max_iter},
                  {"rho_min", config.trainer.rho_min},
                  {"cost_tol", config.trainer.cost_tol}};
  j["gd"] = {{"step0", config.gd.step0},
             {"shrink", config.gd.shrink},
             {"grow", config.gd.grow},
             {"step_max", config.gd.step_max},
             {"armijo", config.gd.armijo},
             {"max_iter", config.gd.max_iter},
             {"step_min", config.gd.step_min},
             {"cost_tol", config.gd.cost_tol}};
  j["target"] = {{"Q", {{config.target.Q(0, 0), config.target.Q(0, 1)},
                        {config.target.Q(1, 0), config.target.Q(1, 1)}}},
                 {"v", {config.target.v(0), config.target.v(1)}},
                 {"c", config.target.c}};
  j["eval_refine"] = config.eval_refine;
  j["with_references"] = config.with_references;
  return j;
}

namespace {

// Derivation tag for the reference-sampling stream, so the evaluation
// references never reuse the draws that produced nu_N.
constexpr std::uint64_t kReferenceStreamTag = 1;

Eigen::MatrixXd to_point_matrix(const std::vector<Eigen::VectorXd>& points) {
  Eigen::MatrixXd out(2, static_cast<Eigen::Index>(points.size()));
  for (std::size_t c = 0; c < points.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = points[c];
  return out;
}

Eigen::MatrixXd to_point_matrix(const DiscreteMeasure& mu) {
  return to_point_matrix(mu.atoms());
}

template <typename Fn>
auto run_stage(std::ofstream& log, const std::string& name, Fn&& fn)
    -> decltype(fn()) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto value = fn();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << "stage " << name << ": ok (" << dt << " s)\n" << std::flush;
    return value;
  } catch (const std::exception& e) {
    log << "stage " << name << ": FAILED: " << e.what() << "\n" << std::flush;
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

nlohmann::json history_to_json(const std::vector<IterationRecord>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rec : history)
    arr.push_back({{"iter", rec.iter},
                   {"cost", rec.cost},
                   {"rho", rec.rho},
                   {"accepted", rec.accepted}});
  return arr;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  std::ofstream log(fs::path(config.out_dir) / "run.log");
  if (!log) throw std::runtime_error("cannot open run.log under " + config.out_dir);
  const auto t_start = std::chrono::steady_clock::now();

  TrainerConfig trainer = config.trainer;
  trainer.beta = config.beta;
  GradientDescentConfig gd = config.gd;
  gd.beta = config.beta;

  const FieldFamily field =
      run_stage(log, "field", [&] { return parse_field_family(config.field); });
  const DiscreteMeasure mu = run_stage(log, "triangulate", [&] {
    return disc_triangulation(config.radius, config.spacing);
  });
  const DiscreteMeasure nu = run_stage(log, "sample", [&] {
    return sample_target(config.radius, config.target_samples, config.seed, config.target);
  });
  log << "atoms: n1=" << mu.size() << " n2=" << nu.size() << "\n";

  const CouplingPlan plan =
      run_stage(log, "plan", [&] { return solve_optimal_plan(mu, nu); });
  const double initial_cost = transport_cost(plan, mu, nu);
  log << "initial transport cost: " << format_double(initial_cost) << "\n";

  const TrainResult result = run_stage(log, "train", [&] {
    if (config.method == "gd")
      return gradient_descent_train(field, mu, nu, plan, gd, config.steps);
    return train(field, mu, nu, plan, trainer, config.steps);
  });
  log << "training: " << result.termination << " after "
      << result.history.size() << " iterations (" << result.accepted
      << " accepted), final cost " << format_double(result.cost) << "\n";

  const PointMap exact = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return target_map(Eigen::Vector2d(x), config.target.Q, config.target.v, config.target.c);
  };
  EvalReport report = run_stage(log, "evaluate", [&] {
    if (!config.with_references)
      return evaluate(field, result.u, mu, nu, plan, &exact);
    const DiscreteMeasure mu_ref =
        disc_triangulation(config.radius, config.spacing / config.eval_refine);
    const DiscreteMeasure nu_ref = sample_target(
        config.radius, config.target_samples * config.eval_refine,
        SplitMix64(config.seed).substream(kReferenceStreamTag), config.target);
    return evaluate(field, result.u, mu, nu, plan, &exact, &mu_ref, &nu_ref);
  });

  run_stage(log, "artifacts", [&] {
    const fs::path dir(config.out_dir);
    write_measure_csv(dir / "mu_N.csv", mu);
    write_measure_csv(dir / "nu_N.csv", nu);
    write_plan_csv(dir / "plan.csv", plan);
    write_control_json(dir / "control.json", result.u);

    nlohmann::json run;
    run["config"] = experiment_config_to_json(config);
    run["n1"] = mu.size();
    run["n2"] = nu.size();
    run["initial_cost"] = initial_cost;
    run["final_cost"] = result.cost;
    run["termination"] = result.termination;
    run["accepted"] = result.accepted;
    run["iterations"] = history_to_json(result.history);
    std::ofstream rj(dir / "run.json", std::ios::binary);
    if (!rj) throw std::runtime_error("cannot write run.json");
    rj << run.dump(2) << "\n";

    write_eval_json((dir / "eval.json").string(), report);

    const std::vector<Eigen::VectorXd> pushed = [&] {
      std::vector<Trajectory> trajs = flow_map(field, result.u, mu.atoms());
      std::vector<Eigen::VectorXd> out;
      out.reserve(trajs.size());
      for (const auto& tr : trajs) out.push_back(tr.terminal());
      return out;
    }();
    std::vector<Eigen::VectorXd> exact_pushed;
    exact_pushed.reserve(mu.atoms().size());
    for (const auto& x : mu.atoms()) exact_pushed.push_back(exact(x));

    write_scatter_svg((dir / "measures.svg").string(),
                      {{"source atoms", "#1f77b4", 2.5, to_point_matrix(mu)},
                       {"target samples", "#ff7f0e", 2.5, to_point_matrix(nu)}});
    write_scatter_svg((dir / "pushforward.svg").string(),
                      {{"target samples", "#ff7f0e", 2.5, to_point_matrix(nu)},
                       {"flowed atoms", "#2ca02c", 2.5, to_point_matrix(pushed)}});
    write_scatter_svg((dir / "map_comparison.svg").string(),
                      {{"exact map", "#d62728", 2.5, to_point_matrix(exact_pushed)},
                       {"flowed atoms", "#2ca02c", 2.5, to_point_matrix(pushed)}});
    return 0;
  });

  ExperimentSummary summary;
  summary.n1 = mu.size();
  summary.n2 = nu.size();
  summary.initial_cost = initial_cost;
  summary.result = result;
  summary.report = report;
  summary.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  summary.out_dir = config.out_dir;
  log << "total wall time: " << summary.elapsed_seconds << " s\n";
  return summary;
}

std::vector<GammaLevel> default_gamma_ladder() {
  return {{0.15, 100}, {0.106, 200}, {0.08, 400}, {0.057, 800}};
}

std::vector<GammaRow> gamma_convergence_study(const ExperimentConfig& base,
                                              const std::vector<GammaLevel>& levels) {
  base.validate();
  if (levels.size() < 3)
    throw std::invalid_argument("gamma study: need at least 3 refinement levels");
  const FieldFamily field = parse_field_family(base.field);
  TrainerConfig trainer = base.trainer;
  trainer.beta = base.beta;
  GradientDescentConfig gd = base.gd;
  gd.beta = base.beta;

  std::vector<GammaRow> rows;
  rows.reserve(levels.size());
  for (const auto& level : levels) {
    if (level.spacing <= 0.0 || level.samples < 1)
      throw std::invalid_argument("gamma study: bad refinement level");
    const DiscreteMeasure mu = disc_triangulation(base.radius, level.spacing);
    const DiscreteMeasure nu =
        sample_target(base.radius, level.samples, base.seed, base.target);
    const CouplingPlan plan = solve_optimal_plan(mu, nu);
    const TrainResult result =
        base.method == "gd" ? gradient_descent_train(field, mu, nu, plan, gd, base.steps)
                            : train(field, mu, nu, plan, trainer, base.steps);
    rows.push_back({mu.size(), nu.size(), level.spacing, result.cost});
  }
  return rows;
}

void write_gamma_csv(const std::string& path, const std::vector<GammaRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "n1,n2,spacing,min_cost\n";
  for (const auto& row : rows)
    out << row.n1 << "," << row.n2 << "," << format_double(row.spacing) << ","
        << format_double(row.min_cost) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace otflow
