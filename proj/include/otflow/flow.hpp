#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "otflow/control.hpp"
#include "otflow/field_family.hpp"

namespace otflow {

// Explicit-Euler path of one point: column l holds the state at node l/M.
struct Trajectory {
  Eigen::MatrixXd states;  // dim x (M+1)

  int steps() const { return static_cast<int>(states.cols()) - 1; }
  Eigen::VectorXd initial() const { return states.col(0); }
  Eigen::VectorXd terminal() const { return states.col(states.cols() - 1); }
};

// Thrown when an Euler step leaves the representable range.
class FlowBlowupError : public std::runtime_error {
 public:
  FlowBlowupError(int step, int atom)
      : std::runtime_error("flow blew up at step " + std::to_string(step) +
                           (atom >= 0 ? " (atom " + std::to_string(atom) + ")" : "")),
        step_(step), atom_(atom) {}
  int step() const { return step_; }
  int atom() const { return atom_; }

 private:
  int step_;
  int atom_;
};

// z^{l+1} = z^l + h F(z^l) u_l, h = 1/M.
Trajectory flow_forward(const FieldFamily& field, const ControlSchedule& u,
                        const Eigen::VectorXd& x0);

std::vector<Trajectory> flow_map(const FieldFamily& field, const ControlSchedule& u,
                                 const std::vector<Eigen::VectorXd>& points);

// Implicit-Euler costate sweep: row l of the result is the covector at node
// l, solving lambda^l (I - h A_l) = lambda^{l+1} with A_l = d/dz [F(z^l) u_l],
// starting from the given terminal row lambda^M.  Throws when a step matrix
// is singular (step size too large for the linearized dynamics).
Eigen::MatrixXd costate_backward(const FieldFamily& field, const ControlSchedule& u,
                                 const Trajectory& traj,
                                 const Eigen::VectorXd& lambda_terminal);

// Radius bound (r + C sqrt(k) rho) e^{sqrt(k) rho} for |x| <= r and
// ||u||_{L2} <= rho; Euler nodes satisfy it exactly for the built-in
// families (each channel obeys |F_j(x)| <= C + |x|).
double growth_bound(const FieldFamily& field, double radius, double control_norm);

// Flow Lipschitz bound e^{L sqrt(k) rho} between two initial points.
double lipschitz_bound(const FieldFamily& field, double control_norm);

// States of all points at the grid node l = round(t M), t in [0, 1].
std::vector<Eigen::VectorXd> flow_prefix_map(const FieldFamily& field,
                                             const ControlSchedule& u,
                                             const std::vector<Eigen::VectorXd>& points,
                                             double t);

}  // namespace otflow
