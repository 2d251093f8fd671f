// Command-line front end: experiment generation, coupling solves, training,
// evaluation and the full reproduction pipeline.  Every data artifact
// (CSV/JSON) is a deterministic function of the configuration; wall times go
// to stdout and run.log only.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "otflow/csv_io.hpp"
#include "otflow/evaluation.hpp"
#include "otflow/experiment.hpp"
#include "otflow/flow.hpp"
#include "otflow/measure.hpp"
#include "otflow/svg.hpp"
#include "otflow/trainer.hpp"

namespace fs = std::filesystem;
using namespace otflow;

namespace {

void add_target_options(CLI::App* cmd, TargetMapConfig& target) {
  cmd->add_option("--q11", target.Q(0, 0), "Q(1,1) of the target potential")->capture_default_str();
  cmd->add_option("--q12", target.Q(0, 1), "Q(1,2) = Q(2,1) of the target potential")->capture_default_str();
  cmd->add_option("--q22", target.Q(1, 1), "Q(2,2) of the target potential")->capture_default_str();
  cmd->add_option("--vx", target.v(0), "center v, first coordinate")->capture_default_str();
  cmd->add_option("--vy", target.v(1), "center v, second coordinate")->capture_default_str();
  cmd->add_option("--c", target.c, "additive constant under the square root")->capture_default_str();
}

void add_trainer_options(CLI::App* cmd, ExperimentConfig& config) {
  cmd->add_option("--field", config.field, "field family descriptor")->capture_default_str();
  cmd->add_option("--steps", config.steps, "Euler steps M")->capture_default_str();
  cmd->add_option("--beta", config.beta, "control penalty weight")->capture_default_str();
  cmd->add_option("--method", config.method, "training method: pmp or gd")
      ->check(CLI::IsMember({"pmp", "gd"}))
      ->capture_default_str();
  cmd->add_option("--rho0", config.trainer.rho0, "initial proximal weight (pmp)")->capture_default_str();
  cmd->add_option("--tau", config.trainer.tau, "backtracking factor (pmp)")->capture_default_str();
  cmd->add_option("--rho-min", config.trainer.rho_min, "stall threshold on rho (pmp)")->capture_default_str();
  cmd->add_option("--max-iter", config.trainer.max_iter, "iteration budget")->capture_default_str();
  cmd->add_option("--cost-tol", config.trainer.cost_tol, "relative-decrease stopping tolerance")->capture_default_str();
  cmd->add_option("--step0", config.gd.step0, "initial step size (gd)")->capture_default_str();
  cmd->add_option("--armijo", config.gd.armijo, "sufficient-decrease constant (gd)")->capture_default_str();
}

// --max-iter and --cost-tol are shared knobs; mirror them into the gd config.
void sync_shared_knobs(ExperimentConfig& config) {
  config.gd.max_iter = config.trainer.max_iter;
  config.gd.cost_tol = config.trainer.cost_tol;
}

void finalize_target(TargetMapConfig& target) { target.Q(1, 0) = target.Q(0, 1); }

DiscreteMeasure load_measure(const std::string& path) { return read_measure_csv(path); }

PointMap make_exact_map(const TargetMapConfig& target) {
  return [target](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return target_map(Eigen::Vector2d(x), target.Q, target.v, target.c);
  };
}

nlohmann::json history_json(const std::vector<IterationRecord>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rec : history)
    arr.push_back({{"iter", rec.iter},
                   {"cost", rec.cost},
                   {"rho", rec.rho},
                   {"accepted", rec.accepted}});
  return arr;
}

void print_report(const EvalReport& report) {
  std::printf("W2(pushforward, target samples) = %.6g\n", report.w2_push_vs_target);
  std::printf("coupling cost (kappa proxy)     = %.6g\n", report.coupling_cost);
  std::printf("control L2 norm                 = %.6g\n", report.control_norm);
  if (report.l2_map_error)
    std::printf("L2 map error vs analytic map    = %.6g\n", *report.l2_map_error);
  if (report.decomposition) {
    const auto& d = *report.decomposition;
    std::printf("error decomposition: %.6g + %.6g + %.6g = %.6g\n", d[0], d[1], d[2],
                d[0] + d[1] + d[2]);
  }
}

int cmd_sample(const ExperimentConfig& config) {
  fs::create_directories(config.out_dir);
  const DiscreteMeasure mu = disc_triangulation(config.radius, config.spacing);
  const DiscreteMeasure nu =
      sample_target(config.radius, config.target_samples, config.seed, config.target);
  write_measure_csv((fs::path(config.out_dir) / "mu_N.csv").string(), mu);
  write_measure_csv((fs::path(config.out_dir) / "nu_N.csv").string(), nu);
  std::printf("wrote mu_N.csv (%d atoms) and nu_N.csv (%d atoms) under %s\n", mu.size(),
              nu.size(), config.out_dir.c_str());
  return 0;
}

int cmd_plan(const std::string& mu_path, const std::string& nu_path,
             const std::string& out_dir) {
  fs::create_directories(out_dir);
  const DiscreteMeasure mu = load_measure(mu_path);
  const DiscreteMeasure nu = load_measure(nu_path);
  const CouplingPlan plan = solve_optimal_plan(mu, nu);
  write_plan_csv((fs::path(out_dir) / "plan.csv").string(), plan);
  std::printf("plan.csv: support %d (bound %d), cost %.17g, marginal residual %.3g\n",
              plan.support_size(), mu.size() + nu.size(), transport_cost(plan, mu, nu),
              plan.marginal_residual(mu, nu));
  return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& mu_path,
              const std::string& nu_path, const std::string& plan_path) {
  fs::create_directories(config.out_dir);
  const FieldFamily field = parse_field_family(config.field);
  const DiscreteMeasure mu = load_measure(mu_path);
  const DiscreteMeasure nu = load_measure(nu_path);
  const CouplingPlan plan =
      plan_path.empty() ? solve_optimal_plan(mu, nu) : read_plan_csv(plan_path);

  TrainerConfig trainer = config.trainer;
  trainer.beta = config.beta;
  GradientDescentConfig gd = config.gd;
  gd.beta = config.beta;
  const double initial_cost = transport_cost(plan, mu, nu);
  const TrainResult result =
      config.method == "gd" ? gradient_descent_train(field, mu, nu, plan, gd, config.steps)
                            : train(field, mu, nu, plan, trainer, config.steps);

  write_control_json((fs::path(config.out_dir) / "control.json").string(), result.u);
  nlohmann::json run;
  run["config"] = experiment_config_to_json(config);
  run["n1"] = mu.size();
  run["n2"] = nu.size();
  run["initial_cost"] = initial_cost;
  run["final_cost"] = result.cost;
  run["termination"] = result.termination;
  run["accepted"] = result.accepted;
  run["iterations"] = history_json(result.history);
  std::ofstream rj(fs::path(config.out_dir) / "run.json", std::ios::binary);
  if (!rj) throw std::runtime_error("cannot write run.json");
  rj << run.dump(2) << "\n";

  std::printf("%s: %s after %zu iterations (%d accepted), cost %.17g -> %.17g\n",
              config.method.c_str(), result.termination.c_str(), result.history.size(),
              result.accepted, initial_cost, result.cost);
  return 0;
}

int cmd_eval(const ExperimentConfig& config, const std::string& mu_path,
             const std::string& nu_path, const std::string& plan_path,
             const std::string& control_path, bool analytic_target,
             const std::string& mu_ref_path, const std::string& nu_ref_path) {
  fs::create_directories(config.out_dir);
  const FieldFamily field = parse_field_family(config.field);
  const DiscreteMeasure mu = load_measure(mu_path);
  const DiscreteMeasure nu = load_measure(nu_path);
  const CouplingPlan plan =
      plan_path.empty() ? solve_optimal_plan(mu, nu) : read_plan_csv(plan_path);
  const ControlSchedule u = read_control_json(control_path);

  std::optional<PointMap> exact;
  if (analytic_target) exact = make_exact_map(config.target);
  std::optional<DiscreteMeasure> mu_ref, nu_ref;
  if (!mu_ref_path.empty()) mu_ref = load_measure(mu_ref_path);
  if (!nu_ref_path.empty()) nu_ref = load_measure(nu_ref_path);

  const EvalReport report =
      evaluate(field, u, mu, nu, plan, exact ? &*exact : nullptr,
               mu_ref ? &*mu_ref : nullptr, nu_ref ? &*nu_ref : nullptr);
  write_eval_json((fs::path(config.out_dir) / "eval.json").string(), report);
  print_report(report);
  return 0;
}

int cmd_geodesic(const ExperimentConfig& config, const std::string& mu_path,
                 const std::string& control_path, std::vector<double> ts) {
  fs::create_directories(config.out_dir);
  const FieldFamily field = parse_field_family(config.field);
  const DiscreteMeasure mu = load_measure(mu_path);
  const ControlSchedule u = read_control_json(control_path);
  if (ts.empty()) ts = {0.25, 0.5, 0.75};
  const PointMap exact = make_exact_map(config.target);

  const auto segment = geodesic_deviation(field, u, mu, exact, ts);
  const auto curve = prefix_curve_deviation(field, u, mu, exact, ts);
  const fs::path path = fs::path(config.out_dir) / "geodesic.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,bound,actual,flow_marginal\n";
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out << format_double(segment[i].t) << "," << format_double(segment[i].bound) << ","
        << format_double(segment[i].actual) << "," << format_double(curve[i].value) << "\n";
    std::printf("t=%.4g: W2 deviation %.6g (bound %.6g), flow marginal vs segment %.6g\n",
                segment[i].t, segment[i].actual, segment[i].bound, curve[i].value);
  }
  return 0;
}

int cmd_gamma(const ExperimentConfig& config, const std::vector<std::string>& level_specs) {
  fs::create_directories(config.out_dir);
  std::vector<GammaLevel> levels;
  if (level_specs.empty()) {
    levels = default_gamma_ladder();
  } else {
    for (const auto& text : level_specs) {
      GammaLevel level;
      if (std::sscanf(text.c_str(), "%lf:%d", &level.spacing, &level.samples) != 2)
        throw std::runtime_error("bad --level '" + text + "', expected spacing:samples");
      levels.push_back(level);
    }
  }
  const auto rows = gamma_convergence_study(config, levels);
  write_gamma_csv((fs::path(config.out_dir) / "gamma_study.csv").string(), rows);
  for (const auto& row : rows)
    std::printf("n1=%d n2=%d spacing=%.4g min_cost=%.10g\n", row.n1, row.n2, row.spacing,
                row.min_cost);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    std::printf("gap %zu->%zu: %.10g\n", i, i + 1,
                std::abs(rows[i + 1].min_cost - rows[i].min_cost));
  return 0;
}

int cmd_reproduce(ExperimentConfig config, bool paper_scale) {
  if (paper_scale) {
    config.spacing = 0.04;
    config.target_samples = 1500;
  }
  const ExperimentSummary summary = run_experiment(config);
  std::printf("n1=%d n2=%d\n", summary.n1, summary.n2);
  std::printf("initial W2^2 = %.10g\n", summary.initial_cost);
  std::printf("final cost   = %.10g (%s, %d accepted)\n", summary.result.cost,
              summary.result.termination.c_str(), summary.result.accepted);
  print_report(summary.report);
  std::printf("wall time: %.3f s\n", summary.elapsed_seconds);
  std::printf("artifacts under %s\n", summary.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal-transport map approximation with linear-control flows"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file ([subcommand] sections)");

  ExperimentConfig config;

  auto* sample = app.add_subcommand("sample", "write the source triangulation and target samples");
  sample->add_option("--radius", config.radius, "disc radius")->capture_default_str();
  sample->add_option("--spacing", config.spacing, "triangulation spacing")->capture_default_str();
  sample->add_option("--samples", config.target_samples, "target sample count")->capture_default_str();
  sample->add_option("--seed", config.seed, "rng seed")->capture_default_str();
  add_target_options(sample, config.target);
  sample->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  std::string mu_path = "mu_N.csv", nu_path = "nu_N.csv", plan_path, control_path = "control.json";
  auto* plan = app.add_subcommand("plan", "solve the optimal coupling between two measures");
  plan->add_option("--mu", mu_path, "source measure CSV")->capture_default_str();
  plan->add_option("--nu", nu_path, "target measure CSV")->capture_default_str();
  plan->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "train a control on an optimal coupling");
  train->add_option("--mu", mu_path, "source measure CSV")->capture_default_str();
  train->add_option("--nu", nu_path, "target measure CSV")->capture_default_str();
  train->add_option("--plan", plan_path, "coupling CSV (solved when omitted)");
  add_trainer_options(train, config);
  add_target_options(train, config.target);
  train->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  bool analytic_target = false;
  std::string mu_ref_path, nu_ref_path;
  auto* eval = app.add_subcommand("eval", "evaluate a trained control");
  eval->add_option("--mu", mu_path, "source measure CSV")->capture_default_str();
  eval->add_option("--nu", nu_path, "target measure CSV")->capture_default_str();
  eval->add_option("--plan", plan_path, "coupling CSV (solved when omitted)");
  eval->add_option("--control", control_path, "control JSON")->capture_default_str();
  eval->add_option("--field", config.field, "field family descriptor")->capture_default_str();
  eval->add_flag("--analytic-target", analytic_target,
                 "compare against the built-in analytic map");
  eval->add_option("--mu-ref", mu_ref_path, "finer source reference CSV");
  eval->add_option("--nu-ref", nu_ref_path, "finer target reference CSV");
  add_target_options(eval, config.target);
  eval->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  std::vector<double> ts;
  auto* geodesic = app.add_subcommand("geodesic",
                                      "deviation from the exact displacement interpolation");
  geodesic->add_option("--mu", mu_path, "source measure CSV")->capture_default_str();
  geodesic->add_option("--control", control_path, "control JSON")->capture_default_str();
  geodesic->add_option("--field", config.field, "field family descriptor")->capture_default_str();
  geodesic->add_option("--t", ts, "interpolation times (default 0.25 0.5 0.75)");
  add_target_options(geodesic, config.target);
  geodesic->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  std::vector<std::string> level_specs;
  auto* gamma = app.add_subcommand("gamma-study", "training minima across a refinement ladder");
  gamma->add_option("--radius", config.radius, "disc radius")->capture_default_str();
  gamma->add_option("--seed", config.seed, "rng seed")->capture_default_str();
  gamma->add_option("--level", level_specs,
                    "refinement level spacing:samples (repeatable; default ladder)");
  add_trainer_options(gamma, config);
  add_target_options(gamma, config.target);
  gamma->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  bool desk = false, paper_scale = false;
  auto* repro = app.add_subcommand("reproduce-paper", "run the full experiment pipeline");
  repro->add_flag("--desk", desk, "desk scale: spacing 0.08, 400 samples (default)");
  repro->add_flag("--paper-scale", paper_scale, "paper scale: spacing 0.04, 1500 samples");
  repro->add_option("--radius", config.radius, "disc radius")->capture_default_str();
  repro->add_option("--seed", config.seed, "rng seed")->capture_default_str();
  repro->add_option("--eval-refine", config.eval_refine,
                    "reference refinement factor for the evaluation")->capture_default_str();
  repro->add_flag("!--no-references", config.with_references,
                  "skip the reference-measure decomposition");
  add_trainer_options(repro, config);
  add_target_options(repro, config.target);
  repro->add_option("--out", config.out_dir, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    finalize_target(config.target);
    sync_shared_knobs(config);
    if (sample->parsed()) return cmd_sample(config);
    if (plan->parsed()) return cmd_plan(mu_path, nu_path, config.out_dir);
    if (train->parsed()) return cmd_train(config, mu_path, nu_path, plan_path);
    if (eval->parsed())
      return cmd_eval(config, mu_path, nu_path, plan_path, control_path, analytic_target,
                      mu_ref_path, nu_ref_path);
    if (geodesic->parsed()) return cmd_geodesic(config, mu_path, control_path, ts);
    if (gamma->parsed()) return cmd_gamma(config, level_specs);
    if (repro->parsed()) {
      if (desk && paper_scale)
        throw std::runtime_error("choose one of --desk / --paper-scale");
      return cmd_reproduce(config, paper_scale);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
