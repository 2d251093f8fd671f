#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "otflow/control.hpp"
#include "otflow/field_family.hpp"
#include "otflow/flow.hpp"
#include "otflow/measure.hpp"

namespace otflow {

// Trains u to minimize
//   J(u) = sum_ij gamma_ij |Phi_u(x_i) - y_j|^2 + (beta/2) ||u||_{L2}^2
// by the sweep method: maximize the augmented Hamiltonian step by step with a
// proximal weight rho, accept when the cost strictly decreases, otherwise
// shrink rho by tau.
struct TrainerConfig {
  double beta = 5e-4;
  double rho0 = 1.0;
  double tau = 0.5;
  int max_iter = 500;
  double rho_min = 1e-10;
  double cost_tol = 1e-9;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double rho = 0.0;  // proximal weight (step size for gradient descent)
  bool accepted = false;
};

struct TrainerState {
  ControlSchedule u;
  std::vector<Trajectory> trajectories;
  std::vector<Eigen::MatrixXd> covectors;  // per atom, (M+1) x dim
  double cost = 0.0;
  double rho = 0.0;
  int flag = 1;  // 1: trajectories changed, covectors refresh next sweep
  std::vector<IterationRecord> history;
};

struct TrainResult {
  ControlSchedule u;
  double cost = 0.0;
  std::vector<IterationRecord> history;
  std::string termination;  // "converged" | "stalled" | "max_iter"
  int accepted = 0;
};

double cost_functional(const FieldFamily& field, const ControlSchedule& u,
                       const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       const CouplingPlan& plan, double beta);

// Terminal covectors lambda_i = -2 sum_j gamma_ij (z_i - y_j) for all atoms.
std::vector<Eigen::VectorXd> terminal_covector(const std::vector<Eigen::VectorXd>& terminal,
                                               const CouplingPlan& plan,
                                               const DiscreteMeasure& nu);

// Re-anchors a covector after the sweep moved node l from z_old to z_new:
// lambda - 2 w_i (z_new - z_old), w_i the atom's plan row mass.
Eigen::VectorXd corrected_covector(const Eigen::VectorXd& lambda, double row_mass,
                                   const Eigen::VectorXd& z_old,
                                   const Eigen::VectorXd& z_new);

// argmax_v  a . v - (beta/2)|v|^2 - 1/(2 rho) |v - u_prev|^2
//         = (rho a + u_prev) / (1 + rho beta).
Eigen::VectorXd maximize_augmented_hamiltonian(const Eigen::VectorXd& a,
                                               const Eigen::VectorXd& u_prev,
                                               double beta, double rho);

TrainerState init_trainer_state(const FieldFamily& field, const DiscreteMeasure& mu,
                                const DiscreteMeasure& nu, const CouplingPlan& plan,
                                const TrainerConfig& config,
                                const std::optional<ControlSchedule>& u0, int steps);

// One accept-or-backtrack sweep; appends a history record.
void pmp_iteration(const FieldFamily& field, const DiscreteMeasure& mu,
                   const DiscreteMeasure& nu, const CouplingPlan& plan,
                   const TrainerConfig& config, TrainerState& state);

// Full loop; returns the best control seen.  steps is the number of Euler
// steps M when no initial control is given.
TrainResult train(const FieldFamily& field, const DiscreteMeasure& mu,
                  const DiscreteMeasure& nu, const CouplingPlan& plan,
                  const TrainerConfig& config, int steps,
                  const std::optional<ControlSchedule>& u0 = std::nullopt);

// Exact gradient of the discrete cost (M x k), via the transposed state
// transition (I + h A)^T, not the implicit costate scheme.
Eigen::MatrixXd adjoint_gradient(const FieldFamily& field, const ControlSchedule& u,
                                 const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 const CouplingPlan& plan, double beta);

struct GradientDescentConfig {
  double beta = 5e-4;
  double step0 = 1.0;
  double shrink = 0.5;
  double grow = 2.0;
  double step_max = 1e6;
  double armijo = 1e-4;
  int max_iter = 500;
  double step_min = 1e-14;
  double cost_tol = 1e-9;

  void validate() const;
};

TrainResult gradient_descent_train(const FieldFamily& field, const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu, const CouplingPlan& plan,
                                   const GradientDescentConfig& config, int steps,
                                   const std::optional<ControlSchedule>& u0 = std::nullopt);

// A-priori bound ||u*||_{L2}^2 <= (2/beta) max |x_i - y_j|^2, the max over
// the plan support when given, else over all pairs.
double minimizer_norm_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                            double beta, const CouplingPlan* plan = nullptr);

}  // namespace otflow
