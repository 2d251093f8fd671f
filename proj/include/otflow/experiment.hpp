#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "otflow/evaluation.hpp"
#include "otflow/measure.hpp"
#include "otflow/rng.hpp"
#include "otflow/trainer.hpp"

namespace otflow {

// Analytic benchmark map T = grad f for f(x) = sqrt((x-v)^T Q (x-v) + c),
// the gradient of a convex potential, hence a bona fide optimal map.
struct TargetMapConfig {
  Eigen::Matrix2d Q = (Eigen::Matrix2d() << 3.0, 1.0, 1.0, 2.0).finished();
  Eigen::Vector2d v = Eigen::Vector2d(0.5, 0.5);
  double c = 2.0;

  void validate() const;  // symmetric positive definite Q, c > 0
};

double target_potential(const Eigen::Vector2d& x, const Eigen::Matrix2d& Q,
                        const Eigen::Vector2d& v, double c);

// T(x) = Q (x - v) / sqrt((x-v)^T Q (x-v) + c); throws on a non-positive
// radicand.
Eigen::Vector2d target_map(const Eigen::Vector2d& x, const Eigen::Matrix2d& Q,
                           const Eigen::Vector2d& v, double c);

// Vertices of the regular triangular lattice (row height spacing*sqrt(3)/2,
// odd rows shifted by spacing/2, origin a vertex) inside the closed disc,
// equally weighted.  Rows are emitted bottom to top, left to right.
DiscreteMeasure disc_triangulation(double radius, double spacing);

// n points uniform on the closed disc by rejection from the bounding square;
// consumes two rng draws per attempt.
std::vector<Eigen::VectorXd> sample_disc(double radius, int n, SplitMix64& rng);

// Empirical target: uniform disc samples pushed through target_map, equal
// weights.
DiscreteMeasure sample_target(double radius, int n_samples, SplitMix64 rng,
                              const TargetMapConfig& target);
DiscreteMeasure sample_target(double radius, int n_samples, std::uint64_t seed,
                              const TargetMapConfig& target);

struct ExperimentConfig {
  std::string field = "hermite2d:zeta=10";
  double radius = 0.5;
  double spacing = 0.08;       // triangulation size for the source
  int target_samples = 400;    // N2
  std::uint64_t seed = 1;
  int steps = 32;              // Euler steps M
  double beta = 5e-4;          // applied to both trainer configs
  std::string method = "pmp";  // "pmp" | "gd"
  TrainerConfig trainer;
  GradientDescentConfig gd;
  TargetMapConfig target;
  // The decomposition references: a (spacing / eval_refine) triangulation and
  // an (eval_refine * target_samples) sampling on a derived rng stream.
  int eval_refine = 4;
  bool with_references = true;
  std::string out_dir = ".";

  void validate() const;
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

struct ExperimentSummary {
  int n1 = 0;
  int n2 = 0;
  double initial_cost = 0.0;  // transport cost of the optimal plan, W2^2
  TrainResult result;
  EvalReport report;
  double elapsed_seconds = 0.0;
  std::string out_dir;
};

// Full pipeline: triangulate, sample, solve the plan, train, evaluate, and
// write mu_N.csv, nu_N.csv, plan.csv, control.json, run.json, eval.json,
// measures.svg, pushforward.svg, map_comparison.svg and run.log under
// config.out_dir.  Timing goes to run.log only, so the data artifacts are
// byte-reproducible.  A failing stage aborts with its name in the message.
ExperimentSummary run_experiment(const ExperimentConfig& config);

struct GammaLevel {
  double spacing = 0.0;
  int samples = 0;
};

struct GammaRow {
  int n1 = 0;
  int n2 = 0;
  double spacing = 0.0;
  double min_cost = 0.0;
};

// The pinned refinement ladder: spacings {0.15, 0.106, 0.08, 0.057} with
// sample counts {100, 200, 400, 800}.
std::vector<GammaLevel> default_gamma_ladder();

// Trains one instance per level (same seed, so repeated levels coincide) and
// reports the minimal cost reached at each refinement.
std::vector<GammaRow> gamma_convergence_study(const ExperimentConfig& base,
                                              const std::vector<GammaLevel>& levels);

// Header "n1,n2,spacing,min_cost".
void write_gamma_csv(const std::string& path, const std::vector<GammaRow>& rows);

}  // namespace otflow
